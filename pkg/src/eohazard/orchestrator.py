"""Baseline and routed workflows over any transport.

Baseline: both specialists, then the decision node (no early warning).
Routed:   early warning, the routed specialist (if any), then decision.
"""

from __future__ import annotations

import concurrent.futures
import json
import logging
import threading
import time
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Optional, Sequence

from .agents import (
    SCHEMA_VERSION,
    EventType,
    HypothesisReport,
    Specialist,
    route,
)
from .scene_store import DatasetManifest, SceneError, read_scene_meta
from .spectral import ThresholdConfig
from .transport import (
    SPECIALIST_ROLE,
    NodeDescriptor,
    NodeRole,
    NodeTimeout,
    TransportError,
    call_node,
)

log = logging.getLogger(__name__)

TIMING_KEYS = ("elapsed_ms", "timings")
DEFAULT_TIMEOUT_MS = 30_000.0
STAGES = ("early_warning", "wildfire", "flood", "decision")


class Mode(str, Enum):
    baseline = "baseline"
    routed = "routed"


class WorkflowConfigError(ValueError):
    pass


@dataclass
class WorkflowConfig:
    nodes: dict[NodeRole, NodeDescriptor]
    mode: Mode = Mode.routed
    thresholds: ThresholdConfig = field(default_factory=ThresholdConfig)
    timeout_ms: dict[str, float] = field(default_factory=dict)
    parallel_specialists: bool = False

    def __post_init__(self):
        self.mode = Mode(self.mode)
        missing = [r.value for r in NodeRole if r not in self.nodes]
        if missing:
            raise WorkflowConfigError(f"node map lacks roles: {missing}")
        for role, desc in self.nodes.items():
            if desc.role is not role:
                raise WorkflowConfigError(f"node {desc.node_id} has role {desc.role.value}, mapped to {role.value}")
        unknown = set(self.timeout_ms) - set(STAGES)
        if unknown:
            raise WorkflowConfigError(f"unknown stages in timeout_ms: {sorted(unknown)}")

    def timeout(self, stage: str) -> float:
        return self.timeout_ms.get(stage, DEFAULT_TIMEOUT_MS)

    def to_dict(self) -> dict:
        return {
            "mode": self.mode.value,
            "nodes": {role.value: d.to_dict() for role, d in self.nodes.items()},
            "thresholds": self.thresholds.to_dict(),
            "timeout_ms": dict(self.timeout_ms),
            "parallel_specialists": self.parallel_specialists,
        }

    @classmethod
    def from_dict(cls, doc: dict, base_dir: Optional[Path] = None) -> "WorkflowConfig":
        thresholds = doc.get("thresholds", {})
        if isinstance(thresholds, str):
            path = Path(thresholds)
            if base_dir is not None and not path.is_absolute():
                path = base_dir / path
            thresholds = ThresholdConfig.load(path)
        else:
            thresholds = ThresholdConfig.from_dict(thresholds)
        nodes = doc.get("nodes") or default_nodes()
        if isinstance(next(iter(nodes.values()), None), dict):
            nodes = {NodeRole(r): NodeDescriptor.from_dict(d) for r, d in nodes.items()}
        return cls(
            nodes=nodes,
            mode=Mode(doc.get("mode", "routed")),
            thresholds=thresholds,
            timeout_ms={k: float(v) for k, v in doc.get("timeout_ms", {}).items()},
            parallel_specialists=bool(doc.get("parallel_specialists", False)),
        )

    @classmethod
    def load(cls, path) -> "WorkflowConfig":
        path = Path(path)
        return cls.from_dict(json.loads(path.read_text()), path.parent)


def default_nodes() -> dict[NodeRole, NodeDescriptor]:
    return {role: NodeDescriptor(f"{role.value}-0", role) for role in NodeRole}


@dataclass
class RunRecord:
    scene_id: str
    mode: Mode
    timings: dict[str, Optional[float]]
    specialists_invoked: list[str]
    final: Optional[dict]
    label: Optional[EventType] = None
    scene_area_km2: Optional[float] = None
    error: Optional[dict] = None

    @property
    def ok(self) -> bool:
        return self.error is None

    @property
    def total_ms(self) -> float:
        return self.timings["total"]

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "scene_id": self.scene_id,
            "mode": self.mode.value,
            "label": None if self.label is None else self.label.value,
            "scene_area_km2": self.scene_area_km2,
            "specialists_invoked": list(self.specialists_invoked),
            "timings": dict(self.timings),
            "final": self.final,
            "error": self.error,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "RunRecord":
        return cls(
            scene_id=doc["scene_id"],
            mode=Mode(doc["mode"]),
            timings=dict(doc["timings"]),
            specialists_invoked=list(doc["specialists_invoked"]),
            final=doc.get("final"),
            label=None if doc.get("label") is None else EventType(doc["label"]),
            scene_area_km2=doc.get("scene_area_km2"),
            error=doc.get("error"),
        )


def strip_timing(obj):
    """Drop timing fields at every depth."""
    if isinstance(obj, dict):
        return {k: strip_timing(v) for k, v in obj.items() if k not in TIMING_KEYS}
    if isinstance(obj, list):
        return [strip_timing(v) for v in obj]
    return obj


def canonical_json(obj) -> str:
    return json.dumps(strip_timing(obj), sort_keys=True, separators=(",", ":"))


class StageFailure(Exception):
    def __init__(self, stage: str, exc: TransportError):
        self.stage = stage
        self.exc = exc
        code = "stage-timeout" if isinstance(exc, NodeTimeout) else "node-failure"
        self.info = {"stage": stage, "code": code, "node_id": exc.node_id, "message": str(exc)}
        if exc.payload:
            self.info["remote"] = exc.payload
        super().__init__(f"{stage}: {exc}")


class Orchestrator:
    def __init__(self, cfg: WorkflowConfig, transport):
        self.cfg = cfg
        self.transport = transport

    def _call(self, stage: str, role: NodeRole, body: dict, timings: dict) -> dict:
        t0 = time.perf_counter()
        try:
            return call_node(self.transport, self.cfg.nodes[role], body, self.cfg.timeout(stage))
        except TransportError as exc:
            raise StageFailure(stage, exc) from exc
        finally:
            timings[stage] = (time.perf_counter() - t0) * 1000.0

    def _specialists(self, scene_ref: str, chosen: Sequence[Specialist], timings: dict) -> list[dict]:
        body = {"schema_version": SCHEMA_VERSION, "scene_ref": scene_ref}
        ordered = [s for s in Specialist if s in chosen]
        if self.cfg.parallel_specialists and len(ordered) > 1:
            with concurrent.futures.ThreadPoolExecutor(len(ordered)) as pool:
                futures = [pool.submit(self._call, s.value, SPECIALIST_ROLE[s], body, timings) for s in ordered]
                return [f.result() for f in futures]
        return [self._call(s.value, SPECIALIST_ROLE[s], body, timings) for s in ordered]

    def _decide(self, scene_id: str, hypothesis: dict, reports: list[dict], timings: dict) -> dict:
        body = {
            "schema_version": SCHEMA_VERSION,
            "scene_id": scene_id,
            "hypothesis": hypothesis,
            "specialist_reports": reports,
        }
        return self._call("decision", NodeRole.decision, body, timings)

    def _record(self, scene_ref, mode, label, area, run) -> RunRecord:
        timings: dict[str, Optional[float]] = dict.fromkeys(STAGES)
        invoked: list[str] = []
        t0 = time.perf_counter()
        final, error = None, None
        try:
            final = run(timings, invoked)
        except StageFailure as exc:
            log.warning("scene %s (%s) failed: %s", scene_ref, mode.value, exc)
            error = exc.info
        timings["total"] = (time.perf_counter() - t0) * 1000.0
        scene_id = final["scene_id"] if final else scene_ref
        return RunRecord(scene_id, mode, timings, invoked, final, label, area, error)

    def run_baseline(self, scene_ref: str, label: Optional[EventType] = None,
                     area_km2: Optional[float] = None) -> RunRecord:
        def run(timings, invoked):
            invoked.extend(s.value for s in Specialist)
            reports = self._specialists(scene_ref, list(Specialist), timings)
            scene_id = reports[0]["scene_id"]
            hypothesis = HypothesisReport.placeholder(scene_id).to_dict()
            return self._decide(scene_id, hypothesis, reports, timings)

        return self._record(scene_ref, Mode.baseline, label, area_km2, run)

    def run_routed(self, scene_ref: str, label: Optional[EventType] = None,
                   area_km2: Optional[float] = None) -> RunRecord:
        def run(timings, invoked):
            body = {"schema_version": SCHEMA_VERSION, "scene_ref": scene_ref}
            hypothesis = self._call("early_warning", NodeRole.early_warning, body, timings)
            chosen = route(HypothesisReport.from_dict(hypothesis))
            invoked.extend(s.value for s in Specialist if s in chosen)
            reports = self._specialists(scene_ref, list(chosen), timings)
            return self._decide(hypothesis["scene_id"], hypothesis, reports, timings)

        return self._record(scene_ref, Mode.routed, label, area_km2, run)

    def run(self, scene_ref: str, mode: Mode, label=None, area_km2=None) -> RunRecord:
        fn = self.run_baseline if Mode(mode) is Mode.baseline else self.run_routed
        return fn(scene_ref, label, area_km2)


class RecordWriter:
    """Append-only JSON-lines sink; writes are serialized."""

    def __init__(self, path):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self.path.write_text("")
        self._lock = threading.Lock()

    def append(self, record: RunRecord) -> None:
        line = json.dumps(record.to_dict(), sort_keys=True)
        with self._lock, self.path.open("a") as fh:
            fh.write(line + "\n")


def run_dataset(manifest: DatasetManifest, orchestrator: Orchestrator, modes: Iterable[Mode] = tuple(Mode),
                out_path=None) -> list[RunRecord]:
    """Run every scene under every mode, scene-major, in manifest order."""
    modes = [Mode(m) for m in modes]
    writer = RecordWriter(out_path) if out_path is not None else None
    records = []
    for entry in manifest.entries:
        label = None if entry.label is None else EventType(entry.label.value)
        area, load_error = None, None
        try:
            meta = read_scene_meta(manifest.resolve(entry))
            area = meta["width"] * meta["height"] * float(meta["pixel_size_m"]) ** 2 / 1e6
        except SceneError as exc:
            load_error = {"stage": "load", "code": exc.code, "node_id": "orchestrator", "message": str(exc)}
        for mode in modes:
            if load_error is not None:
                timings = dict.fromkeys(STAGES)
                timings["total"] = 0.0
                rec = RunRecord(entry.scene_id, mode, timings, [], None, label, None, load_error)
            else:
                rec = orchestrator.run(entry.scene_id, mode, label, area)
            records.append(rec)
            if writer is not None:
                writer.append(rec)
    return records


def read_records(path) -> list[RunRecord]:
    with Path(path).open() as fh:
        return [RunRecord.from_dict(json.loads(line)) for line in fh if line.strip()]
