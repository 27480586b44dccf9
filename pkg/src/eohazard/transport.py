"""Agent nodes and the transports that connect them.

A node wraps one agent role behind ``POST /analyze`` (early warning and
specialists), ``POST /decide`` (decision) and ``GET /health``. Nodes are
reached either in-process, optionally through a seeded simulated network,
or over real HTTP. Scenes travel by reference and are resolved against a
shared dataset root.
"""

from __future__ import annotations

import json
import logging
import os
import random
import threading
import time
import urllib.error
import urllib.request
from dataclasses import dataclass, field, replace
from enum import Enum
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Callable, Optional

from .agents import (
    SCHEMA_VERSION,
    FusionProfile,
    HypothesisReport,
    ReasonerBackend,
    RuleReasoner,
    Specialist,
    SpecialistBackends,
    SpecialistReport,
    decision_fuse,
    early_warning_assess,
    flood_specialist_analyze,
    wildfire_specialist_analyze,
)
from .agents import schemas
from .scene_store import (
    BandId,
    DatasetManifest,
    SceneBundle,
    SceneError,
    load_scene,
)
from .spectral import ThresholdConfig

log = logging.getLogger(__name__)

DATASET_ROOT_ENV = "EOHAZARD_DATASET_ROOT"


class NodeRole(str, Enum):
    early_warning = "early_warning"
    wildfire_specialist = "wildfire_specialist"
    flood_specialist = "flood_specialist"
    decision = "decision"


ROLE_CAPABILITIES = {
    NodeRole.early_warning: (BandId.B4, BandId.B3, BandId.B2),
    NodeRole.wildfire_specialist: (BandId.B3, BandId.B4, BandId.B8, BandId.B11, BandId.B12),
    NodeRole.flood_specialist: (BandId.VV, BandId.VH),
    NodeRole.decision: (),
}
ROLE_PATH = {
    NodeRole.early_warning: "/analyze",
    NodeRole.wildfire_specialist: "/analyze",
    NodeRole.flood_specialist: "/analyze",
    NodeRole.decision: "/decide",
}
SPECIALIST_ROLE = {Specialist.wildfire: NodeRole.wildfire_specialist, Specialist.flood: NodeRole.flood_specialist}


@dataclass(frozen=True)
class NodeDescriptor:
    node_id: str
    role: NodeRole
    endpoint: Optional[str] = None  # http(s) URL; None means in-process
    capabilities: tuple[BandId, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "role", NodeRole(self.role))
        if not self.capabilities:
            object.__setattr__(self, "capabilities", ROLE_CAPABILITIES[self.role])

    def to_dict(self) -> dict:
        return {
            "node_id": self.node_id,
            "role": self.role.value,
            "endpoint": self.endpoint,
            "capabilities": [b.value for b in self.capabilities],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "NodeDescriptor":
        return cls(
            node_id=doc["node_id"],
            role=NodeRole(doc["role"]),
            endpoint=doc.get("endpoint"),
            capabilities=tuple(BandId(b) for b in doc.get("capabilities", ())),
        )


# --- errors ------------------------------------------------------------------


class TransportError(RuntimeError):
    code = "transport-error"

    def __init__(self, node_id: str, message: str, payload: Optional[dict] = None, status: Optional[int] = None):
        self.node_id = node_id
        self.payload = payload
        self.status = status
        super().__init__(f"{node_id}: {message}")


class NodeTimeout(TransportError):
    code = "timeout"


class NodeConnectionError(TransportError):
    code = "connection-failure"


class RemoteNodeError(TransportError):
    code = "remote-error"


class UnknownSceneError(SceneError):
    code = "unknown-scene"


class RequestError(ValueError):
    """Malformed request body; answered with a 400."""

    code = "schema-violation"


# --- scene references --------------------------------------------------------


class SceneResolver:
    """Maps manifest ids or root-relative paths to loaded scenes.

    Paths that resolve outside ``root`` are refused.
    """

    def __init__(self, root: os.PathLike | str, manifest: Optional[DatasetManifest] = None):
        self.root = Path(root).resolve()
        self.manifest = manifest

    def path_for(self, ref: str) -> Path:
        if self.manifest is not None:
            entry = self.manifest.get(ref)
            if entry is not None:
                return self._confine(self.manifest.resolve(entry), ref)
        candidate = Path(ref)
        if not candidate.is_absolute():
            candidate = self.root / candidate
        path = self._confine(candidate, ref)
        if not (path / "meta.json").is_file():
            raise UnknownSceneError(f"no scene for reference {ref!r}")
        return path

    def _confine(self, path: Path, ref: str) -> Path:
        resolved = path.resolve()
        if not resolved.is_relative_to(self.root):
            raise UnknownSceneError(f"reference {ref!r} escapes the dataset root")
        return resolved

    def resolve(self, ref: str) -> SceneBundle:
        return load_scene(self.path_for(ref))


def scene_reference_resolve(ref: str, root: os.PathLike | str, manifest: Optional[DatasetManifest] = None) -> SceneBundle:
    return SceneResolver(root, manifest).resolve(ref)


# --- nodes -------------------------------------------------------------------


class AgentNode:
    """Stateless request handler for one agent role."""

    def __init__(
        self,
        descriptor: NodeDescriptor,
        resolver: Optional[SceneResolver] = None,
        cfg: ThresholdConfig = ThresholdConfig(),
        backends: Optional[SpecialistBackends] = None,
        reasoner: Optional[ReasonerBackend] = None,
        fusion_profile: FusionProfile = FusionProfile(),
    ):
        if descriptor.role is not NodeRole.decision and resolver is None:
            raise ValueError(f"{descriptor.role.value} node needs a scene resolver")
        self.descriptor = descriptor
        self.resolver = resolver
        self.cfg = cfg
        self.backends = backends or SpecialistBackends()
        self.reasoner = reasoner or self.backends.reasoner or RuleReasoner()
        self.fusion_profile = fusion_profile

    @property
    def node_id(self) -> str:
        return self.descriptor.node_id

    def health(self) -> dict:
        return {"node_id": self.node_id, "role": self.descriptor.role.value, "schema_version": SCHEMA_VERSION}

    def error(self, code: str, message: str) -> dict:
        return {"code": code, "message": message, "node_id": self.node_id}

    def handle(self, method: str, path: str, body: Optional[dict] = None) -> tuple[int, dict]:
        """Dispatch one request; returns (HTTP status, JSON payload)."""
        role = self.descriptor.role
        if method == "GET" and path == "/health":
            return 200, self.health()
        if method != "POST" or path != ROLE_PATH[role]:
            return 404, self.error("not-found", f"{method} {path} not served by a {role.value} node")
        try:
            if not isinstance(body, dict):
                raise RequestError("request body must be a JSON object")
            if role is NodeRole.decision:
                return 200, self._decide(body)
            return 200, self._analyze(body)
        except RequestError as exc:
            return 400, self.error(exc.code, str(exc))
        except UnknownSceneError as exc:
            return 404, self.error(exc.code, str(exc))
        except SceneError as exc:
            return 422, self.error(exc.code, str(exc))
        except Exception as exc:  # keep the node alive; report as a server error
            log.exception("node %s failed", self.node_id)
            return 500, self.error("internal-error", f"{type(exc).__name__}: {exc}")

    def _analyze(self, body: dict) -> dict:
        problems = schemas.errors("analyze_request", body)
        if problems:
            raise RequestError("; ".join(problems))
        scene = self.resolver.resolve(body["scene_ref"])
        role = self.descriptor.role
        if role is NodeRole.early_warning:
            return early_warning_assess(scene, self.reasoner).to_dict()
        if role is NodeRole.wildfire_specialist:
            return wildfire_specialist_analyze(scene, self.cfg, self.backends).to_dict()
        return flood_specialist_analyze(scene, self.cfg, self.backends).to_dict()

    def _decide(self, body: dict) -> dict:
        problems = schemas.errors("decide_request", body)
        if problems:
            raise RequestError("; ".join(problems))
        hypothesis = HypothesisReport.from_dict(body["hypothesis"])
        reports = [SpecialistReport.from_dict(r) for r in body["specialist_reports"]]
        return decision_fuse(hypothesis, reports, self.reasoner, self.fusion_profile).to_dict()


# --- HTTP serving ------------------------------------------------------------


class RunningNode:
    def __init__(self, server: ThreadingHTTPServer, descriptor: NodeDescriptor, thread: threading.Thread):
        self.server = server
        self.descriptor = descriptor
        self.thread = thread

    @property
    def url(self) -> str:
        return self.descriptor.endpoint

    def close(self) -> None:
        self.server.shutdown()
        self.server.server_close()
        self.thread.join(timeout=5)

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


class BindError(OSError):
    code = "bind-failure"


def _make_handler(node: AgentNode):
    class Handler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"

        def log_message(self, fmt, *args):
            log.debug("%s %s", node.node_id, fmt % args)

        def _reply(self, status: int, payload: dict) -> None:
            data = json.dumps(payload, sort_keys=True).encode("utf-8")
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(data)))
            self.end_headers()
            self.wfile.write(data)

        def do_GET(self):
            self._reply(*node.handle("GET", self.path))

        def do_POST(self):
            length = int(self.headers.get("Content-Length") or 0)
            raw = self.rfile.read(length) if length else b""
            try:
                body = json.loads(raw) if raw else None
            except ValueError:
                self._reply(400, node.error("schema-violation", "body is not valid JSON"))
                return
            self._reply(*node.handle("POST", self.path, body))

    return Handler


def serve_node(descriptor: NodeDescriptor, handler: AgentNode, host: str = "127.0.0.1", port: int = 0) -> RunningNode:
    """Start ``handler`` on an HTTP server in a background thread.

    ``port=0`` picks a free port; the returned node's descriptor carries the
    actual endpoint URL.
    """
    if handler.descriptor.role is not descriptor.role:
        raise ValueError(f"handler role {handler.descriptor.role.value} != descriptor role {descriptor.role.value}")
    try:
        server = ThreadingHTTPServer((host, port), _make_handler(handler))
    except OSError as exc:
        raise BindError(f"cannot bind {host}:{port}: {exc}") from exc
    server.daemon_threads = True
    bound_host, bound_port = server.server_address[:2]
    desc = replace(descriptor, endpoint=f"http://{bound_host}:{bound_port}")
    thread = threading.Thread(target=server.serve_forever, name=f"node-{descriptor.node_id}", daemon=True)
    thread.start()
    return RunningNode(server, desc, thread)


# --- simulated network -------------------------------------------------------


@dataclass(frozen=True)
class SimNetConfig:
    latency_ms: float = 0.0
    jitter_ms: float = 0.0
    drop_probability: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.latency_ms < 0 or self.jitter_ms < 0:
            raise ValueError("latency and jitter must be >= 0")
        if not 0.0 <= self.drop_probability <= 1.0:
            raise ValueError("drop_probability must lie in [0, 1]")

    @classmethod
    def from_dict(cls, doc: dict) -> "SimNetConfig":
        return cls(**doc)

    def to_dict(self) -> dict:
        return {
            "latency_ms": self.latency_ms,
            "jitter_ms": self.jitter_ms,
            "drop_probability": self.drop_probability,
            "seed": self.seed,
        }


@dataclass(frozen=True)
class Transmission:
    src: str
    dst: str
    delay_ms: float
    dropped: bool


class SimNet:
    """Seeded per-link latency and loss.

    Each directed link draws from its own RNG seeded by ``(seed, src, dst)``,
    so a link's delay sequence does not depend on traffic elsewhere. Draws on a
    link are serialized.
    """

    def __init__(self, cfg: SimNetConfig = SimNetConfig(), sleep: Callable[[float], None] = time.sleep):
        self.cfg = cfg
        self.sleep = sleep
        self._links: dict[tuple[str, str], tuple[random.Random, threading.Lock]] = {}
        self._guard = threading.Lock()
        self.trace: list[Transmission] = []

    def _link(self, src: str, dst: str):
        with self._guard:
            if (src, dst) not in self._links:
                rng = random.Random(f"{self.cfg.seed}:{src}->{dst}")
                self._links[(src, dst)] = (rng, threading.Lock())
            return self._links[(src, dst)]

    def sample(self, src: str, dst: str) -> Transmission:
        rng, lock = self._link(src, dst)
        with lock:
            jitter = rng.uniform(0.0, self.cfg.jitter_ms) if self.cfg.jitter_ms else 0.0
            dropped = rng.random() < self.cfg.drop_probability
        t = Transmission(src, dst, self.cfg.latency_ms + jitter, dropped)
        with self._guard:
            self.trace.append(t)
        return t

    def deliver(self, src: str, dst: str, timeout_ms: Optional[float], waited_ms: float = 0.0) -> float:
        """Delay one message; returns the delay or raises NodeTimeout."""
        t = self.sample(src, dst)
        budget = None if timeout_ms is None else max(timeout_ms - waited_ms, 0.0)
        if t.dropped:
            if budget:
                self.sleep(budget / 1000.0)
            raise NodeTimeout(dst if src == "orchestrator" else src, f"message {src}->{dst} lost")
        if budget is not None and t.delay_ms > budget:
            self.sleep(budget / 1000.0)
            raise NodeTimeout(dst, f"link {src}->{dst} delay {t.delay_ms:.1f} ms exceeds timeout")
        if t.delay_ms:
            self.sleep(t.delay_ms / 1000.0)
        return t.delay_ms


# --- transports --------------------------------------------------------------


class InProcessTransport:
    """Calls node handlers directly; bodies still round-trip through JSON."""

    def __init__(self, nodes: dict[str, AgentNode], simnet: Optional[SimNet] = None, source: str = "orchestrator"):
        self.nodes = nodes
        self.simnet = simnet
        self.source = source

    def request(self, descriptor: NodeDescriptor, method: str, path: str, body: Optional[dict] = None,
                timeout_ms: Optional[float] = None) -> dict:
        node = self.nodes.get(descriptor.node_id)
        if node is None:
            raise NodeConnectionError(descriptor.node_id, "no such node")
        wire = None if body is None else json.loads(json.dumps(body))
        waited = 0.0
        if self.simnet is not None:
            waited += self.simnet.deliver(self.source, descriptor.node_id, timeout_ms)
        t0 = time.perf_counter()
        status, payload = node.handle(method, path, wire)
        handled_ms = (time.perf_counter() - t0) * 1000.0
        if timeout_ms is not None and waited + handled_ms > timeout_ms:
            raise NodeTimeout(descriptor.node_id, f"no reply within {timeout_ms:g} ms")
        if self.simnet is not None:
            self.simnet.deliver(descriptor.node_id, self.source, timeout_ms, waited + handled_ms)
        payload = json.loads(json.dumps(payload))
        return _check_status(descriptor, status, payload)


class HttpTransport:
    def request(self, descriptor: NodeDescriptor, method: str, path: str, body: Optional[dict] = None,
                timeout_ms: Optional[float] = None) -> dict:
        if not descriptor.endpoint:
            raise NodeConnectionError(descriptor.node_id, "descriptor has no endpoint")
        data = None if body is None else json.dumps(body).encode("utf-8")
        req = urllib.request.Request(descriptor.endpoint.rstrip("/") + path, data=data, method=method,
                                     headers={"Content-Type": "application/json"})
        timeout = None if timeout_ms is None else timeout_ms / 1000.0
        try:
            with urllib.request.urlopen(req, timeout=timeout) as resp:
                status, raw = resp.status, resp.read()
        except urllib.error.HTTPError as exc:
            status, raw = exc.code, exc.read()
        except TimeoutError as exc:
            raise NodeTimeout(descriptor.node_id, f"no reply within {timeout_ms:g} ms") from exc
        except urllib.error.URLError as exc:
            if isinstance(exc.reason, TimeoutError):
                raise NodeTimeout(descriptor.node_id, f"no reply within {timeout_ms:g} ms") from exc
            raise NodeConnectionError(descriptor.node_id, str(exc.reason)) from exc
        except OSError as exc:
            raise NodeConnectionError(descriptor.node_id, str(exc)) from exc
        try:
            payload = json.loads(raw)
        except ValueError as exc:
            raise RemoteNodeError(descriptor.node_id, "reply is not JSON", status=status) from exc
        return _check_status(descriptor, status, payload)


def _check_status(descriptor: NodeDescriptor, status: int, payload: dict) -> dict:
    if status >= 400:
        msg = payload.get("message", "") if isinstance(payload, dict) else ""
        code = payload.get("code", "error") if isinstance(payload, dict) else "error"
        raise RemoteNodeError(descriptor.node_id, f"HTTP {status} {code}: {msg}", payload, status)
    return payload


def call_node(transport, descriptor: NodeDescriptor, request: Optional[dict] = None,
              timeout_ms: Optional[float] = None, path: Optional[str] = None) -> dict:
    """Synchronous call to the node's role endpoint (or ``path`` if given)."""
    path = path or ROLE_PATH[descriptor.role]
    method = "GET" if path == "/health" else "POST"
    return transport.request(descriptor, method, path, request, timeout_ms)


# --- local deployments -------------------------------------------------------


@dataclass
class Deployment:
    """A set of nodes plus the transport that reaches them."""

    descriptors: dict[NodeRole, NodeDescriptor]
    transport: object
    running: list[RunningNode] = field(default_factory=list)

    def close(self) -> None:
        for node in self.running:
            node.close()
        self.running.clear()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def build_nodes(resolver: SceneResolver, cfg: ThresholdConfig = ThresholdConfig(),
                backends: Optional[SpecialistBackends] = None,
                early_warning_reasoner: Optional[ReasonerBackend] = None,
                decision_reasoner: Optional[ReasonerBackend] = None,
                fusion_profile: FusionProfile = FusionProfile()) -> dict[NodeRole, AgentNode]:
    backends = backends or SpecialistBackends()
    nodes = {}
    for role in NodeRole:
        desc = NodeDescriptor(f"{role.value}-0", role)
        reasoner = {
            NodeRole.early_warning: early_warning_reasoner,
            NodeRole.decision: decision_reasoner,
        }.get(role) or backends.reasoner
        nodes[role] = AgentNode(desc, None if role is NodeRole.decision else resolver, cfg, backends,
                                reasoner, fusion_profile)
    return nodes


def local_deployment(nodes: dict[NodeRole, AgentNode], simnet: Optional[SimNet] = None) -> Deployment:
    transport = InProcessTransport({n.node_id: n for n in nodes.values()}, simnet)
    return Deployment({role: n.descriptor for role, n in nodes.items()}, transport)


def http_deployment(nodes: dict[NodeRole, AgentNode], host: str = "127.0.0.1") -> Deployment:
    running = [serve_node(n.descriptor, n, host, 0) for n in nodes.values()]
    return Deployment({r.descriptor.role: r.descriptor for r in running}, HttpTransport(), running)
