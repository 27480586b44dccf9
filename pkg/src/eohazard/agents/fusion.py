"""Decision-level fusion of the hypothesis and specialist reports.

The outcome (decision, event type, confidence) is fixed by rules; the
reasoning backend only writes the explanation.

Rules, in order:
  a. any confirmed specialist report -> alert for that specialist's event
  e. confirmations of two event types -> the larger affected area wins,
     ties go to wildfire
  b. otherwise no alert, even if the hypothesis named an event (refutation)
  c. a past-event report alone yields no alert with a past-event note
  d. no hypothesis and no reports -> no alert

Confidence is the share of sources (the hypothesis, unless absent, plus each
routed specialist) whose event matches the final event type.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass
from typing import Optional, Sequence

from ..spectral import BackendError, ToolName
from .reasoners import ReasonerBackend, RuleReasoner, call_reasoner
from .reports import (
    Classification,
    Decision,
    EventType,
    FinalAlert,
    HypothesisReport,
    Specialist,
    SpecialistReport,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class FusionProfile:
    # operational option: surface burn scars as informational wildfire alerts
    promote_past_event: bool = False


def affected_area_km2(report: SpecialistReport) -> float:
    if report.specialist is Specialist.flood:
        return report.result(ToolName.ml_flood).metrics.get("flood_area_km2", 0.0)
    return max(
        report.result(ToolName.ml_fire).metrics.get("active_fire_area_km2", 0.0),
        report.result(ToolName.index_fire).metrics.get("active_fire_area_km2", 0.0),
    )


def _report_metrics(report: SpecialistReport) -> dict:
    if report.specialist is Specialist.flood:
        m = report.result(ToolName.ml_flood).metrics
        return {"flood_area_km2": m.get("flood_area_km2", 0.0), "flood_fraction": m.get("flood_fraction", 0.0)}
    return {
        "active_fire_area_km2": affected_area_km2(report),
        "burned_area_km2": report.result(ToolName.burned_area).metrics.get("burned_area_km2", 0.0),
    }


def fuse_outcome(hypothesis: HypothesisReport, reports: Sequence[SpecialistReport],
                 profile: FusionProfile = FusionProfile()) -> tuple[Decision, EventType, Optional[SpecialistReport]]:
    """The rule table alone: (decision, event type, deciding report)."""
    confirmed = [r for r in reports if r.classification is Classification.event_confirmed]
    if confirmed:
        # ties resolve toward wildfire: it sorts first and max() keeps the first maximum
        confirmed.sort(key=lambda r: 0 if r.specialist is Specialist.wildfire else 1)
        best = max(confirmed, key=affected_area_km2)
        return Decision.alert, best.specialist.event, best
    past = [r for r in reports if r.classification is Classification.past_event]
    if past and profile.promote_past_event:
        return Decision.alert, EventType.wildfire, past[0]
    return Decision.no_alert, EventType.none, past[0] if past else None


def confidence(hypothesis: HypothesisReport, reports: Sequence[SpecialistReport], event: EventType,
               profile: FusionProfile = FusionProfile()) -> float:
    def source_event(r: SpecialistReport) -> EventType:
        if profile.promote_past_event and r.classification is Classification.past_event:
            return r.specialist.event
        return r.event

    sources = [] if hypothesis.absent else [hypothesis.predicted_event]
    sources += [source_event(r) for r in reports]
    if not sources:
        return 1.0
    return sum(s is event for s in sources) / len(sources)


def decision_fuse(hypothesis: Optional[HypothesisReport], reports: Sequence[SpecialistReport],
                  backend: Optional[ReasonerBackend] = None,
                  profile: FusionProfile = FusionProfile()) -> FinalAlert:
    t0 = time.perf_counter()
    reports = list(reports)
    if hypothesis is None:
        scene_id = reports[0].scene_id if reports else "unknown"
        hypothesis = HypothesisReport.placeholder(scene_id)
    backend = backend or RuleReasoner()

    decision, event, deciding = fuse_outcome(hypothesis, reports, profile)
    conf = confidence(hypothesis, reports, event, profile)
    hyp_event = None if hypothesis.absent else hypothesis.predicted_event.value
    evidence = {
        "scene_id": hypothesis.scene_id,
        "decision": decision.value,
        "event_type": event.value,
        "confidence": conf,
        "hypothesis_event": hyp_event,
        "hypothesis_reasoning": None if hypothesis.absent else hypothesis.reasoning,
        "n_reports": len(reports),
        "refuted": decision is Decision.no_alert and hyp_event not in (None, "none") and bool(reports),
        "past_event": deciding is not None and deciding.classification is Classification.past_event,
        "multi_event": sum(r.classification is Classification.event_confirmed for r in reports) > 1,
        "metrics": {} if deciding is None else _report_metrics(deciding),
        "reports": [
            {"specialist": r.specialist.value, "classification": r.classification.value, "reasoning": r.reasoning}
            for r in reports
        ],
    }
    try:
        out = call_reasoner(backend, "decision", evidence)
        if (out["decision"], out["event_type"]) != (decision.value, event.value):
            log.info("reasoner labels %s/%s overridden by fusion rules", out["decision"], out["event_type"])
        reasoning = out["reasoning"]
    except BackendError as exc:
        log.warning("decision reasoner failed: %s", exc)
        reasoning = RuleReasoner().reason("decision", evidence)["reasoning"]

    return FinalAlert(
        scene_id=hypothesis.scene_id,
        decision=decision,
        event_type=event,
        confidence=conf,
        reasoning=reasoning,
        hypothesis=hypothesis,
        specialist_reports=reports,
        elapsed_ms=(time.perf_counter() - t0) * 1000.0,
    )
