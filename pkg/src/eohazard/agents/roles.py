"""Early-warning and specialist agents."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..scene_store import BandId, MissingBandError, SceneBundle, SceneError
from ..spectral import (
    BackendError,
    SegmenterBackend,
    ThresholdConfig,
    ThresholdFireSegmenter,
    ThresholdFloodSegmenter,
    ToolName,
    ToolResult,
    above,
    normalized_difference,
    tool_burned_area,
    tool_index_fire,
    tool_ml_fire,
    tool_ml_flood,
)
from .reasoners import ReasonerBackend, RuleReasoner, call_reasoner
from .reports import (
    Classification,
    EventType,
    HypothesisReport,
    Specialist,
    SpecialistReport,
)

log = logging.getLogger(__name__)

RGB_BANDS = (BandId.B4, BandId.B3, BandId.B2)
QUICKLOOK_STEP = 4


def _ms_since(t0: float) -> float:
    return (time.perf_counter() - t0) * 1000.0


# --- early warning -----------------------------------------------------------


def quicklook_evidence(scene: SceneBundle, step: int = QUICKLOOK_STEP, eps: float = 1e-6) -> dict:
    """Cheap whole-scene statistics on a ``step``-subsampled grid."""
    for band in RGB_BANDS:
        if band not in scene.bands:
            raise MissingBandError(band, scene.scene_id)

    def sub(band):
        return scene.band(band)[::step, ::step]

    ev = {
        "scene_id": scene.scene_id,
        "grid_step": step,
        "rgb_mean": [round(float(np.nanmean(sub(b))), 6) for b in RGB_BANDS],
        "hot_fraction": None,
        "water_fraction": None,
    }
    if scene.has(BandId.B11, BandId.B12):
        ev["hot_fraction"] = float(above(normalized_difference(sub(BandId.B12), sub(BandId.B11), eps), 0.0).mean())
    if scene.has(BandId.B3, BandId.B11):
        ev["water_fraction"] = float(above(normalized_difference(sub(BandId.B3), sub(BandId.B11), eps), 0.0).mean())
    return ev


def early_warning_assess(scene: SceneBundle, backend: Optional[ReasonerBackend] = None,
                         step: int = QUICKLOOK_STEP) -> HypothesisReport:
    """Fast hazard hypothesis used for routing.

    Backend failures degrade to ``none``: the scene is not escalated.
    """
    backend = backend or RuleReasoner()
    t0 = time.perf_counter()
    evidence = quicklook_evidence(scene, step)
    try:
        out = call_reasoner(backend, "early_warning", evidence)
    except BackendError as exc:
        log.warning("early warning degraded for %s: %s", scene.scene_id, exc)
        return HypothesisReport(
            scene.scene_id,
            EventType.none,
            f"degraded mode: reasoning backend unavailable ({exc.kind}); no hazard asserted",
            _ms_since(t0),
            degraded=True,
        )
    return HypothesisReport(scene.scene_id, EventType(out["predicted_event"]), out["reasoning"], _ms_since(t0))


# --- specialists -------------------------------------------------------------


@dataclass
class SpecialistBackends:
    fire_segmenter: SegmenterBackend = field(default_factory=ThresholdFireSegmenter)
    flood_segmenter: SegmenterBackend = field(default_factory=ThresholdFloodSegmenter)
    reasoner: ReasonerBackend = field(default_factory=RuleReasoner)


def classify_wildfire(ml_detected: bool, index_detected: bool, burned_detected: bool) -> Classification:
    if ml_detected or index_detected:
        return Classification.event_confirmed
    if burned_detected:
        return Classification.past_event
    return Classification.no_event


def classify_flood(flood_detected: bool) -> Classification:
    return Classification.event_confirmed if flood_detected else Classification.no_event


def _run_tool(tool: ToolName, fn, errors: list[str]) -> ToolResult:
    t0 = time.perf_counter()
    try:
        result, _ = fn()
        return result
    except (SceneError, BackendError) as exc:
        code = exc.kind if isinstance(exc, BackendError) else exc.code
        msg = f"{code}: {exc}"
        errors.append(f"{tool.value}: {msg}")
        return ToolResult.failed(tool, msg, _ms_since(t0))


def build_report(scene_id: str, specialist: Specialist, results: list[ToolResult],
                 reasoner: ReasonerBackend, errors: Optional[list[str]] = None,
                 elapsed_ms: float = 0.0) -> SpecialistReport:
    """Classify tool results by rule and let the reasoner narrate them."""
    errors = list(errors or [])
    flags = [r.detected for r in results]
    if specialist is Specialist.wildfire:
        classification = classify_wildfire(*flags)
    else:
        classification = classify_flood(*flags)
    evidence = {
        "scene_id": scene_id,
        "classification": classification.value,
        "tool_results": [r.to_dict() for r in results],
    }
    role = f"{specialist.value}_specialist"
    try:
        reasoning = call_reasoner(reasoner, role, evidence)["reasoning"]
    except BackendError as exc:
        errors.append(f"reasoner: {exc.kind}: {exc}")
        reasoning = RuleReasoner().reason(role, evidence)["reasoning"]
    return SpecialistReport(scene_id, specialist, results, classification, reasoning, elapsed_ms, errors)


def wildfire_specialist_analyze(scene: SceneBundle, cfg: ThresholdConfig = ThresholdConfig(),
                                backends: Optional[SpecialistBackends] = None) -> SpecialistReport:
    backends = backends or SpecialistBackends()
    t0 = time.perf_counter()
    errors: list[str] = []
    # fixed order; a failing tool does not stop the others
    results = [
        _run_tool(ToolName.ml_fire, lambda: tool_ml_fire(scene, backends.fire_segmenter, cfg), errors),
        _run_tool(ToolName.index_fire, lambda: tool_index_fire(scene, cfg), errors),
        _run_tool(ToolName.burned_area, lambda: tool_burned_area(scene, cfg), errors),
    ]
    report = build_report(scene.scene_id, Specialist.wildfire, results, backends.reasoner, errors)
    report.elapsed_ms = _ms_since(t0)
    return report


def flood_specialist_analyze(scene: SceneBundle, cfg: ThresholdConfig = ThresholdConfig(),
                             backends: Optional[SpecialistBackends] = None) -> SpecialistReport:
    backends = backends or SpecialistBackends()
    t0 = time.perf_counter()
    errors: list[str] = []
    results = [_run_tool(ToolName.ml_flood, lambda: tool_ml_flood(scene, backends.flood_segmenter, cfg), errors)]
    report = build_report(scene.scene_id, Specialist.flood, results, backends.reasoner, errors)
    report.elapsed_ms = _ms_since(t0)
    return report


SPECIALIST_ANALYZERS = {
    Specialist.wildfire: wildfire_specialist_analyze,
    Specialist.flood: flood_specialist_analyze,
}


def route(hypothesis: HypothesisReport) -> frozenset[Specialist]:
    if hypothesis.predicted_event is EventType.none:
        return frozenset()
    return frozenset({Specialist(hypothesis.predicted_event.value)})
