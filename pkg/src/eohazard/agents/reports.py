"""Message types exchanged between the agent tiers."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

from ..spectral.tools import ToolName, ToolResult

SCHEMA_VERSION = "1.0"
MAX_HYPOTHESIS_REASONING = 500


class EventType(str, Enum):
    wildfire = "wildfire"
    flood = "flood"
    none = "none"


class Specialist(str, Enum):
    wildfire = "wildfire"
    flood = "flood"

    @property
    def event(self) -> EventType:
        return EventType(self.value)


class Classification(str, Enum):
    event_confirmed = "event_confirmed"
    past_event = "past_event"
    no_event = "no_event"


class Decision(str, Enum):
    alert = "alert"
    no_alert = "no_alert"


TOOL_SEQUENCE = {
    Specialist.wildfire: (ToolName.ml_fire, ToolName.index_fire, ToolName.burned_area),
    Specialist.flood: (ToolName.ml_flood,),
}


class ReportError(ValueError):
    pass


@dataclass
class HypothesisReport:
    scene_id: str
    predicted_event: EventType
    reasoning: str = ""
    elapsed_ms: float = 0.0
    degraded: bool = False
    # set by the baseline workflow, which has no early-warning stage
    absent: bool = False

    def __post_init__(self):
        self.predicted_event = EventType(self.predicted_event)
        if len(self.reasoning) > MAX_HYPOTHESIS_REASONING:
            self.reasoning = self.reasoning[: MAX_HYPOTHESIS_REASONING - 3] + "..."
        if self.predicted_event is not EventType.none and not self.reasoning.strip():
            raise ReportError("hypothesis reasoning must be non-empty for a predicted event")

    @classmethod
    def placeholder(cls, scene_id: str) -> "HypothesisReport":
        return cls(scene_id, EventType.none, "no early-warning stage in this workflow", 0.0, absent=True)

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "scene_id": self.scene_id,
            "predicted_event": self.predicted_event.value,
            "reasoning": self.reasoning,
            "elapsed_ms": self.elapsed_ms,
            "degraded": self.degraded,
            "hypothesis_absent": self.absent,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "HypothesisReport":
        return cls(
            scene_id=doc["scene_id"],
            predicted_event=EventType(doc["predicted_event"]),
            reasoning=doc.get("reasoning", ""),
            elapsed_ms=float(doc.get("elapsed_ms", 0.0)),
            degraded=bool(doc.get("degraded", False)),
            absent=bool(doc.get("hypothesis_absent", False)),
        )


@dataclass
class SpecialistReport:
    scene_id: str
    specialist: Specialist
    tool_results: list[ToolResult]
    classification: Classification
    reasoning: str = ""
    elapsed_ms: float = 0.0
    errors: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.specialist = Specialist(self.specialist)
        self.classification = Classification(self.classification)
        order = tuple(r.tool_name for r in self.tool_results)
        if order != TOOL_SEQUENCE[self.specialist]:
            raise ReportError(f"{self.specialist.value} tool order {order} != {TOOL_SEQUENCE[self.specialist]}")

    def result(self, tool: ToolName) -> ToolResult:
        for r in self.tool_results:
            if r.tool_name is tool:
                return r
        raise KeyError(tool)

    @property
    def event(self) -> EventType:
        """The event this report stands for as a fusion source."""
        if self.classification is Classification.event_confirmed:
            return self.specialist.event
        return EventType.none

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "scene_id": self.scene_id,
            "specialist": self.specialist.value,
            "tool_results": [r.to_dict() for r in self.tool_results],
            "classification": self.classification.value,
            "reasoning": self.reasoning,
            "elapsed_ms": self.elapsed_ms,
            "errors": list(self.errors),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "SpecialistReport":
        return cls(
            scene_id=doc["scene_id"],
            specialist=Specialist(doc["specialist"]),
            tool_results=[ToolResult.from_dict(r) for r in doc["tool_results"]],
            classification=Classification(doc["classification"]),
            reasoning=doc.get("reasoning", ""),
            elapsed_ms=float(doc.get("elapsed_ms", 0.0)),
            errors=list(doc.get("errors", [])),
        )


@dataclass
class FinalAlert:
    scene_id: str
    decision: Decision
    event_type: EventType
    confidence: float
    reasoning: str
    hypothesis: Optional[HypothesisReport]
    specialist_reports: list[SpecialistReport]
    elapsed_ms: float = 0.0

    def __post_init__(self):
        self.decision = Decision(self.decision)
        self.event_type = EventType(self.event_type)
        if self.decision is Decision.alert and self.event_type is EventType.none:
            raise ReportError("an alert needs an event type")
        if not 0.0 <= self.confidence <= 1.0:
            raise ReportError(f"confidence {self.confidence} outside [0, 1]")

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "scene_id": self.scene_id,
            "decision": self.decision.value,
            "event_type": self.event_type.value,
            "confidence": self.confidence,
            "reasoning": self.reasoning,
            "elapsed_ms": self.elapsed_ms,
            "provenance": {
                "hypothesis": None if self.hypothesis is None else self.hypothesis.to_dict(),
                "specialist_reports": [r.to_dict() for r in self.specialist_reports],
            },
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "FinalAlert":
        prov = doc.get("provenance", {})
        hyp = prov.get("hypothesis")
        return cls(
            scene_id=doc["scene_id"],
            decision=Decision(doc["decision"]),
            event_type=EventType(doc["event_type"]),
            confidence=float(doc["confidence"]),
            reasoning=doc.get("reasoning", ""),
            hypothesis=None if hyp is None else HypothesisReport.from_dict(hyp),
            specialist_reports=[SpecialistReport.from_dict(r) for r in prov.get("specialist_reports", [])],
            elapsed_ms=float(doc.get("elapsed_ms", 0.0)),
        )
