"""Synthetic datasets and local deployments for the efficiency experiments."""

from __future__ import annotations

import contextlib
import itertools
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Optional, Sequence

import numpy as np

from .agents import DelayedReasoner, RuleReasoner, SpecialistBackends
from .orchestrator import Mode, Orchestrator, RunRecord, WorkflowConfig, run_dataset
from .scene_store import (
    DatasetManifest,
    Region,
    SceneBundle,
    SceneLabel,
    SyntheticSpec,
    make_synthetic_scene,
    write_dataset,
)
from .spectral import DelayedSegmenter, ThresholdConfig, ThresholdFireSegmenter, ThresholdFloodSegmenter
from .transport import SceneResolver, SimNet, build_nodes, http_deployment, local_deployment


@dataclass(frozen=True)
class CostModel:
    """Injected latencies standing in for model inference.

    Segmentation costs ``per_tile_ms`` per tile; early warning costs a fixed
    ``early_warning_ms``; the decision reasoner adds ``decision_ms``.
    """

    early_warning_ms: float = 0.0
    per_tile_ms: float = 0.0
    decision_ms: float = 0.0


def make_backends(cost: CostModel = CostModel(), cfg: ThresholdConfig = ThresholdConfig()):
    """(specialist backends, early-warning reasoner, decision reasoner)."""
    fire = ThresholdFireSegmenter.from_config(cfg)
    flood = ThresholdFloodSegmenter()
    if cost.per_tile_ms:
        fire, flood = DelayedSegmenter(fire, cost.per_tile_ms), DelayedSegmenter(flood, cost.per_tile_ms)
    base = RuleReasoner()
    ew = DelayedReasoner(base, cost.early_warning_ms) if cost.early_warning_ms else base
    dec = DelayedReasoner(base, cost.decision_ms) if cost.decision_ms else base
    return SpecialistBackends(fire, flood, base), ew, dec


@contextlib.contextmanager
def deployment(root, manifest: Optional[DatasetManifest] = None, cfg: ThresholdConfig = ThresholdConfig(),
               cost: CostModel = CostModel(), transport: str = "inprocess",
               simnet: Optional[SimNet] = None) -> Iterator[Orchestrator]:
    """Four local nodes plus an orchestrator wired to them."""
    backends, ew, dec = make_backends(cost, cfg)
    nodes = build_nodes(SceneResolver(root, manifest), cfg, backends, ew, dec)
    if transport == "inprocess":
        dep = local_deployment(nodes, simnet)
    elif transport == "http":
        dep = http_deployment(nodes)
    else:
        raise ValueError(f"unknown transport {transport!r}")
    with dep:
        yield Orchestrator(WorkflowConfig(dep.descriptors, thresholds=cfg), dep.transport)


def run_experiment(manifest: DatasetManifest, modes: Sequence[Mode] = tuple(Mode), out_path=None,
                   cfg: ThresholdConfig = ThresholdConfig(), cost: CostModel = CostModel(),
                   transport: str = "inprocess") -> list[RunRecord]:
    with deployment(manifest.root, manifest, cfg, cost, transport) as orch:
        return run_dataset(manifest, orch, modes, out_path)


# --- scene recipes -----------------------------------------------------------


def _rect(rng: np.random.Generator, h: int, w: int, rh: int, rw: int) -> tuple[int, int]:
    return int(rng.integers(0, h - rh + 1)), int(rng.integers(0, w - rw + 1))


def wildfire_scene(scene_id: str, h: int, w: int, seed: int, pixel_size_m: float = 20.0) -> SceneBundle:
    """Burn scar with an active fire front along one edge."""
    rng = np.random.default_rng(seed)
    sh, sw = max(h // 3, 16), max(w // 3, 16)
    r, c = _rect(rng, h, w, sh, sw)
    fh = max(sh // 4, 12)
    regions = [Region("burn_scar", r, c, sh, sw), Region("fire", r, c, fh, sw)]
    return make_synthetic_scene(SyntheticSpec(scene_id, w, h, pixel_size_m, regions, seed, label=SceneLabel.wildfire))


def flood_scene(scene_id: str, h: int, w: int, seed: int, pixel_size_m: float = 20.0) -> SceneBundle:
    """Flood covering about a quarter of the scene next to a permanent lake."""
    rng = np.random.default_rng(seed)
    fh, fw = max(h // 2, 8), max(w // 2, 8)
    r, c = _rect(rng, h, w, fh, fw)
    lh, lw = max(h // 10, 2), max(w // 10, 2)
    lr, lc = _rect(rng, h, w, lh, lw)
    regions = [Region("permanent_water", lr, lc, lh, lw), Region("flood", r, c, fh, fw)]
    return make_synthetic_scene(SyntheticSpec(scene_id, w, h, pixel_size_m, regions, seed, label=SceneLabel.flood))


def quiet_scene(scene_id: str, h: int, w: int, seed: int, pixel_size_m: float = 20.0) -> SceneBundle:
    """No hazard; a small permanent lake on some scenes."""
    rng = np.random.default_rng(seed)
    regions = []
    if rng.random() < 0.5 and h >= 20 and w >= 20:
        lh, lw = h // 10, w // 10
        lr, lc = _rect(rng, h, w, lh, lw)
        regions.append(Region("permanent_water", lr, lc, lh, lw))
    return make_synthetic_scene(SyntheticSpec(scene_id, w, h, pixel_size_m, regions, seed, label=SceneLabel.none))


RECIPES = {SceneLabel.wildfire: wildfire_scene, SceneLabel.flood: flood_scene, SceneLabel.none: quiet_scene}


def mixed_scenes(n: int, seed: int = 0, sizes: Sequence[int] = (128, 192, 256)) -> list[SceneBundle]:
    """``n`` scenes cycling none/wildfire/flood; each label triple steps to the next size."""
    labels = itertools.cycle([SceneLabel.none, SceneLabel.wildfire, SceneLabel.flood])
    scenes = []
    for i, label in zip(range(n), labels):
        size = sizes[(i // 3) % len(sizes)]
        scenes.append(RECIPES[label](f"scene-{i:03d}", size, size, seed * 1000 + i))
    return scenes


def two_regime_scenes(no_event_heights: Sequence[int], event_heights: Sequence[int], width: int = 256,
                      seed: int = 0) -> list[SceneBundle]:
    """Quiet scenes and hazard scenes drawn from separate size ranges.

    Hazard scenes alternate wildfire/flood.
    """
    scenes = []
    for i, h in enumerate(no_event_heights):
        scenes.append(quiet_scene(f"quiet-{i:03d}", h, width, seed * 1000 + i))
    for i, h in enumerate(event_heights):
        recipe = wildfire_scene if i % 2 == 0 else flood_scene
        scenes.append(recipe(f"event-{i:03d}", h, width, seed * 1000 + 500 + i))
    return scenes


def build_dataset(scenes: Sequence[SceneBundle], root) -> DatasetManifest:
    return write_dataset(scenes, Path(root))


# --- presets -----------------------------------------------------------------


@dataclass(frozen=True)
class Preset:
    scenes: list[SceneBundle]
    cfg: ThresholdConfig
    cost: CostModel


def routing_efficiency_preset(n: int = 30, seed: int = 0) -> Preset:
    """Mixed single-tile scenes; each specialist costs 25 ms against a 4 ms early warning."""
    return Preset(mixed_scenes(n, seed), ThresholdConfig(), CostModel(early_warning_ms=4.0, per_tile_ms=25.0))


def area_correlation_preset(seed: int = 0) -> Preset:
    """Two size regimes with segmentation cost proportional to tile count.

    Quiet scenes span 64-512 rows and hazard scenes 384-832 rows (256 columns,
    64 px tiles without overlap), so quiet scenes are both smaller and cheaper
    to route; the group offset then cancels the within-group area trend.
    Injected costs are large enough that the untimed work of the wildfire
    tools does not blur the area trend among hazard scenes.
    """
    scenes = two_regime_scenes(range(64, 64 * 9, 64), range(384, 384 + 64 * 8, 64), seed=seed)
    return Preset(scenes, ThresholdConfig(tile_size=64, tile_stride=64), CostModel(early_warning_ms=100.0, per_tile_ms=10.0))


PRESETS = {"routing-efficiency": routing_efficiency_preset, "area-correlation": area_correlation_preset}
