"""The wildfire and flood detection tools.

Each tool returns a ``(ToolResult, mask)`` pair. The mask is the full-scene
boolean raster behind the tool's metrics.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np

from ..scene_store import BandId, MissingBandError, SceneBundle
from .backends import FLOOD, FLOOD_CLASSES, BackendError, SegmenterBackend
from .config import ThresholdConfig
from .indices import bai, normalized_difference
from .masks import above, connected_components, mask_area_km2, water_mask
from .tiling import MergeError, merge_tile_masks, tile_segment

ML_FIRE_BANDS = (BandId.B8, BandId.B11, BandId.B12)
INDEX_FIRE_BANDS = (BandId.B3, BandId.B8, BandId.B11, BandId.B12)
BURNED_AREA_BANDS = (BandId.B3, BandId.B4, BandId.B8, BandId.B11, BandId.B12)
ML_FLOOD_BANDS = (BandId.VV, BandId.VH)


class ToolName(str, Enum):
    ml_fire = "ml_fire"
    index_fire = "index_fire"
    burned_area = "burned_area"
    ml_flood = "ml_flood"


@dataclass
class ToolResult:
    tool_name: ToolName
    detected: bool
    metrics: dict[str, float] = field(default_factory=dict)
    mask_pixels: int = 0
    elapsed_ms: float = 0.0
    error: Optional[str] = None

    def to_dict(self) -> dict:
        doc = {
            "tool_name": self.tool_name.value,
            "detected": self.detected,
            "metrics": dict(self.metrics),
            "mask_pixels": self.mask_pixels,
            "elapsed_ms": self.elapsed_ms,
        }
        if self.error is not None:
            doc["error"] = self.error
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "ToolResult":
        return cls(
            tool_name=ToolName(doc["tool_name"]),
            detected=bool(doc["detected"]),
            metrics={k: float(v) for k, v in doc.get("metrics", {}).items()},
            mask_pixels=int(doc.get("mask_pixels", 0)),
            elapsed_ms=float(doc.get("elapsed_ms", 0.0)),
            error=doc.get("error"),
        )

    @classmethod
    def failed(cls, tool: ToolName, error: str, elapsed_ms: float = 0.0) -> "ToolResult":
        return cls(tool, False, {}, 0, elapsed_ms, error)


def require_bands(scene: SceneBundle, bands) -> None:
    for band in bands:
        if band not in scene.bands:
            raise MissingBandError(band, scene.scene_id)


def _ms_since(t0: float) -> float:
    return (time.perf_counter() - t0) * 1000.0


# --- optical masks -----------------------------------------------------------


def nhi_mask(scene: SceneBundle, swir_threshold: float, swnir_threshold: float, eps: float) -> np.ndarray:
    swir1 = scene.band(BandId.B11)
    nhi_swir = normalized_difference(scene.band(BandId.B12), swir1, eps)
    nhi_swnir = normalized_difference(swir1, scene.band(BandId.B8), eps)
    return above(nhi_swir, swir_threshold) | above(nhi_swnir, swnir_threshold)


def hotspot_mask(scene: SceneBundle, cfg: ThresholdConfig) -> np.ndarray:
    """Strict-threshold active-fire mask with water pixels removed."""
    require_bands(scene, INDEX_FIRE_BANDS)
    hot = nhi_mask(scene, cfg.nhi_swir_hot, cfg.nhi_swnir_hot, cfg.eps_denominator)
    return hot & ~water_mask(scene, cfg)


def burned_area_masks(scene: SceneBundle, cfg: ThresholdConfig) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(candidate, bai_mask, final) for the burned-area tool."""
    require_bands(scene, BURNED_AREA_BANDS)
    candidate = nhi_mask(scene, cfg.nhi_swir_relaxed, cfg.nhi_swnir_relaxed, cfg.eps_denominator)
    candidate &= ~water_mask(scene, cfg)
    bai_mask = above(bai(scene.band(BandId.B4), scene.band(BandId.B8), cfg.eps_denominator), cfg.bai_burn)
    return candidate, bai_mask, candidate & bai_mask


# --- tools -------------------------------------------------------------------


def tool_index_fire(scene: SceneBundle, cfg: ThresholdConfig = ThresholdConfig()) -> tuple[ToolResult, np.ndarray]:
    t0 = time.perf_counter()
    mask = hotspot_mask(scene, cfg)
    area = mask_area_km2(mask, scene.pixel_size_m)
    result = ToolResult(
        ToolName.index_fire,
        detected=area >= cfg.fire_area_min_km2,
        metrics={"active_fire_area_km2": area},
        mask_pixels=int(mask.sum()),
        elapsed_ms=_ms_since(t0),
    )
    return result, mask


def tool_burned_area(scene: SceneBundle, cfg: ThresholdConfig = ThresholdConfig()) -> tuple[ToolResult, np.ndarray]:
    t0 = time.perf_counter()
    _, _, final = burned_area_masks(scene, cfg)
    area = mask_area_km2(final, scene.pixel_size_m)
    result = ToolResult(
        ToolName.burned_area,
        detected=area >= cfg.fire_area_min_km2,
        metrics={"burned_area_km2": area, "hotspot_count": float(connected_components(final))},
        mask_pixels=int(final.sum()),
        elapsed_ms=_ms_since(t0),
    )
    return result, final


def _segment_tiles(backend, features: np.ndarray, cfg: ThresholdConfig, aux_full=None, binarize=None):
    _, h, w = features.shape
    tiles = []
    for window in tile_segment(h, w, cfg.tile_size, cfg.tile_stride):
        rs, cs = window.slices()
        aux = None if aux_full is None else {k: v[rs, cs] for k, v in aux_full.items()}
        try:
            pred = backend.predict(features[:, rs, cs], window, aux)
        except BackendError:
            raise
        except Exception as exc:  # backend bugs surface as backend failures
            raise BackendError(backend.backend_id, f"{type(exc).__name__}: {exc}") from exc
        pred = np.asarray(pred)
        if pred.shape != (window.height, window.width):
            raise BackendError(backend.backend_id, f"tile prediction {pred.shape} does not match {window}")
        tiles.append((window, binarize(pred) if binarize else pred))
    try:
        return merge_tile_masks(tiles, h, w)
    except MergeError as exc:
        raise BackendError(backend.backend_id, str(exc)) from exc


def tool_ml_fire(
    scene: SceneBundle, backend: SegmenterBackend, cfg: ThresholdConfig = ThresholdConfig()
) -> tuple[ToolResult, np.ndarray]:
    t0 = time.perf_counter()
    require_bands(scene, ML_FIRE_BANDS)
    features = np.stack([scene.band(b) for b in ML_FIRE_BANDS])
    mask = _segment_tiles(backend, features, cfg, binarize=lambda p: p.astype(bool))
    mask &= np.isfinite(features).all(axis=0)
    area = mask_area_km2(mask, scene.pixel_size_m)
    result = ToolResult(
        ToolName.ml_fire,
        detected=area >= cfg.fire_area_min_km2,
        metrics={"active_fire_area_km2": area},
        mask_pixels=int(mask.sum()),
        elapsed_ms=_ms_since(t0),
    )
    return result, mask


def flood_features(scene: SceneBundle, eps: float) -> np.ndarray:
    """Stack (VV, VH, VV/VH); the ratio is NaN where VH < eps."""
    vv = scene.band(BandId.VV).astype(np.float64)
    vh = scene.band(BandId.VH).astype(np.float64)
    ratio = np.full(vv.shape, np.nan)
    with np.errstate(invalid="ignore"):
        np.divide(vv, vh, out=ratio, where=vh >= eps)
    return np.stack([vv, vh, ratio])


def _flood_only(labels: np.ndarray) -> np.ndarray:
    if not np.isin(labels, FLOOD_CLASSES).all():
        raise ValueError(f"labels outside {FLOOD_CLASSES}")
    # permanent water folds into the non-flooded class
    return labels == FLOOD


def tool_ml_flood(
    scene: SceneBundle,
    backend: SegmenterBackend,
    cfg: ThresholdConfig = ThresholdConfig(),
    permanent_water: Optional[np.ndarray] = None,
) -> tuple[ToolResult, np.ndarray]:
    t0 = time.perf_counter()
    require_bands(scene, ML_FLOOD_BANDS)
    features = flood_features(scene, cfg.eps_denominator)
    if permanent_water is None:
        permanent_water = scene.permanent_water
    aux = None if permanent_water is None else {"permanent_water": np.asarray(permanent_water, dtype=bool)}

    def binarize(labels):
        try:
            return _flood_only(labels)
        except ValueError as exc:
            raise BackendError(backend.backend_id, str(exc), "schema-violation") from exc

    mask = _segment_tiles(backend, features, cfg, aux, binarize)
    mask &= np.isfinite(features[:2]).all(axis=0)
    area = mask_area_km2(mask, scene.pixel_size_m)
    fraction = float(mask.sum()) / mask.size
    result = ToolResult(
        ToolName.ml_flood,
        detected=fraction >= cfg.flood_fraction_min,
        metrics={"flood_area_km2": area, "flood_fraction": fraction},
        mask_pixels=int(mask.sum()),
        elapsed_ms=_ms_since(t0),
    )
    return result, mask
