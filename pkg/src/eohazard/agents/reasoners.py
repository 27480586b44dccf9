"""Reasoning backends: deterministic rule/template default and a remote client.

Every backend maps ``(role, evidence)`` to a dict holding the role's label
fields plus a ``reasoning`` string. Labels are checked against
``schemas.ROLE_LABELS``; anything else is a backend failure.
"""

from __future__ import annotations

import concurrent.futures
import time
from typing import Optional, Protocol, runtime_checkable

import jsonschema

from ..spectral.backends import BackendError, post_json
from . import schemas
from .reports import SCHEMA_VERSION

ROLES = tuple(schemas.ROLE_LABELS)

_TOOL_TITLES = {
    "ml_fire": "ML fire segmentation",
    "index_fire": "NHI active-fire index",
    "burned_area": "Burned-area index filter",
    "ml_flood": "SAR flood segmentation",
}


@runtime_checkable
class ReasonerBackend(Protocol):
    backend_id: str
    timeout_ms: Optional[float]

    def reason(self, role: str, evidence: dict) -> dict: ...


def km2(value: float) -> str:
    return f"{round(float(value), 2)} km²"


def tool_line(tool: dict) -> str:
    title = _TOOL_TITLES.get(tool["tool_name"], tool["tool_name"])
    if tool.get("error"):
        return f"- {title}: failed ({tool['error']})"
    m = tool.get("metrics", {})
    if tool["tool_name"] == "burned_area":
        return f"- {title}: {int(m.get('hotspot_count', 0))} hotspots, {km2(m.get('burned_area_km2', 0.0))}"
    if tool["tool_name"] == "ml_flood":
        return f"- {title}: {km2(m.get('flood_area_km2', 0.0))} ({100 * m.get('flood_fraction', 0.0):.1f}% of scene)"
    return f"- {title}: {km2(m.get('active_fire_area_km2', 0.0))}"


class RuleReasoner:
    """Deterministic default for every role.

    Early warning thresholds: a scene is flagged ``wildfire`` when the
    subsampled fraction of NHI_SWIR-positive pixels exceeds ``fire_fraction``,
    else ``flood`` when the MNDWI-positive fraction exceeds the climatological
    ``water_fraction``.
    """

    timeout_ms = None

    def __init__(self, fire_fraction: float = 0.0005, water_fraction: float = 0.02):
        self.fire_fraction = fire_fraction
        self.water_fraction = water_fraction
        self.backend_id = "rule-reasoner"

    def reason(self, role: str, evidence: dict) -> dict:
        if role == "early_warning":
            return self._early_warning(evidence)
        if role in ("wildfire_specialist", "flood_specialist"):
            return self._specialist(role, evidence)
        if role == "decision":
            return self._decision(evidence)
        raise BackendError(self.backend_id, f"unknown role {role!r}", "schema-violation")

    def _early_warning(self, ev: dict) -> dict:
        hot = ev.get("hot_fraction") or 0.0
        water = ev.get("water_fraction") or 0.0
        if hot > self.fire_fraction:
            return {
                "predicted_event": "wildfire",
                "reasoning": f"Hot SWIR signature on {100 * hot:.2f}% of the quicklook grid; possible active fire.",
            }
        if water > self.water_fraction:
            return {
                "predicted_event": "flood",
                "reasoning": (
                    f"Open water on {100 * water:.1f}% of the quicklook grid, above the "
                    f"{100 * self.water_fraction:.1f}% expected; possible flooding."
                ),
            }
        return {
            "predicted_event": "none",
            "reasoning": f"No hazard signature (hot {100 * hot:.2f}%, water {100 * water:.1f}%).",
        }

    def _specialist(self, role: str, ev: dict) -> dict:
        cls = ev["classification"]
        tools = ev.get("tool_results", [])
        if role == "wildfire_specialist":
            head = {
                "event_confirmed": "Active fire detected.",
                "past_event": "Burn scar present but no active fire.",
                "no_event": "No tool reports fire.",
            }[cls]
        else:
            head = {"event_confirmed": "Flooding detected.", "no_event": "No flooding detected."}[cls]
        lines = [head, *(tool_line(t) for t in tools)]
        return {"classification": cls, "reasoning": "\n".join(lines)}

    def _decision(self, ev: dict) -> dict:
        decision, event = ev["decision"], ev["event_type"]
        hyp = ev.get("hypothesis_event")
        metrics = ev.get("metrics", {})
        parts = []
        if decision == "alert" and event == "wildfire":
            text = f"Wildfire confirmed by the specialist tools: active fire {km2(metrics.get('active_fire_area_km2', 0))}"
            if metrics.get("burned_area_km2"):
                text += f", burned area {km2(metrics['burned_area_km2'])}"
            parts.append(text + ".")
        elif decision == "alert" and event == "flood":
            parts.append(f"Flood confirmed by SAR segmentation: {km2(metrics.get('flood_area_km2', 0))} inundated.")
        elif ev.get("past_event"):
            parts.append(
                f"Burned area of {km2(metrics.get('burned_area_km2', 0))} without active fire: "
                "treated as a past event, no alert."
            )
        elif ev.get("refuted"):
            parts.append(f"Specialist tools found no {hyp} evidence; the early-warning hypothesis is rejected.")
        elif ev.get("n_reports", 0):
            parts.append("No specialist confirmed an event; no alert.")
        else:
            parts.append("No hazard hypothesis and no specialist evidence; no alert.")
        if decision == "alert" and hyp is not None:
            parts.append(
                "Consistent with the early-warning hypothesis."
                if hyp == event
                else f"The early-warning hypothesis ({hyp}) disagreed."
            )
        if ev.get("multi_event"):
            parts.append("Both specialists confirmed events; the larger affected area was retained.")
        return {"decision": decision, "event_type": event, "reasoning": " ".join(parts)}


class DelayedReasoner:
    """Adds a fixed latency to an inner backend; stands in for model inference cost."""

    def __init__(self, inner: ReasonerBackend, delay_ms: float, roles: Optional[set[str]] = None):
        self.inner = inner
        self.delay_ms = delay_ms
        self.roles = roles
        self.backend_id = f"{inner.backend_id}+delay({delay_ms:g}ms)"
        self.timeout_ms = inner.timeout_ms

    def reason(self, role, evidence):
        if self.roles is None or role in self.roles:
            time.sleep(self.delay_ms / 1000.0)
        return self.inner.reason(role, evidence)


class RemoteReasoner:
    """Client for an external inference service.

    POSTs ``{"schema_version", "role", "evidence"}`` and expects the role's
    label fields plus ``reasoning`` back.
    """

    enforces_timeout = True

    def __init__(self, endpoint: str, timeout_ms: float = 60_000, backend_id: str = "remote-reasoner"):
        self.endpoint = endpoint
        self.timeout_ms = timeout_ms
        self.backend_id = backend_id

    def reason(self, role: str, evidence: dict) -> dict:
        return remote_reasoner_call(self.endpoint, role, evidence, self.timeout_ms, self.backend_id)


def remote_reasoner_call(endpoint: str, role: str, evidence: dict, timeout_ms: float = 60_000,
                         backend_id: str = "remote-reasoner") -> dict:
    body = {"schema_version": SCHEMA_VERSION, "role": role, "evidence": evidence}
    try:
        schemas.validate("reasoner_request", body)
    except jsonschema.ValidationError as exc:
        raise BackendError(backend_id, f"request: {exc.message}", "schema-violation") from exc
    doc = post_json(endpoint, body, timeout_ms, backend_id)
    return check_output(backend_id, role, doc)


def check_output(backend_id: str, role: str, doc) -> dict:
    if role not in schemas.ROLE_LABELS:
        raise BackendError(backend_id, f"unknown role {role!r}", "schema-violation")
    problems = schemas.errors(f"reasoner_response.{role}", doc)
    if problems:
        raise BackendError(backend_id, "; ".join(problems), "schema-violation")
    return doc


_pool: Optional[concurrent.futures.ThreadPoolExecutor] = None


def call_reasoner(backend: ReasonerBackend, role: str, evidence: dict) -> dict:
    """Invoke ``backend`` under its timeout and validate the reply."""
    global _pool
    timeout = getattr(backend, "timeout_ms", None)
    try:
        if timeout is None or getattr(backend, "enforces_timeout", False):
            out = backend.reason(role, evidence)
        else:
            if _pool is None:
                _pool = concurrent.futures.ThreadPoolExecutor(max_workers=8, thread_name_prefix="reasoner")
            future = _pool.submit(backend.reason, role, evidence)
            try:
                out = future.result(timeout=timeout / 1000.0)
            except concurrent.futures.TimeoutError:
                future.cancel()
                raise BackendError(backend.backend_id, f"no reply within {timeout:g} ms", "timeout") from None
    except BackendError:
        raise
    except Exception as exc:
        raise BackendError(backend.backend_id, f"{type(exc).__name__}: {exc}") from exc
    return check_output(backend.backend_id, role, out)
