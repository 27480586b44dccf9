import base64
import json
import socket
import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import numpy as np
import pytest

from eohazard.agents import RemoteReasoner, early_warning_assess, remote_reasoner_call
from eohazard.scene_store import Region, SyntheticSpec, make_synthetic_scene
from eohazard.spectral import BackendError, RemoteSegmenter, ThresholdFireSegmenter, tool_ml_fire


class Mock:
    """Tiny JSON server whose reply is set per test."""

    def __init__(self, reply=None, delay=0.0, status=200, raw=None):
        self.reply, self.delay, self.status, self.raw = reply, delay, status, raw
        self.requests = []
        mock = self

        class Handler(BaseHTTPRequestHandler):
            def log_message(self, *args):
                pass

            def do_POST(self):
                body = json.loads(self.rfile.read(int(self.headers["Content-Length"])))
                mock.requests.append(body)
                time.sleep(mock.delay)
                payload = mock.raw if mock.raw is not None else json.dumps(mock.reply(body)).encode()
                self.send_response(mock.status)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(payload)))
                self.end_headers()
                self.wfile.write(payload)

        self.server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self.server.daemon_threads = True
        self.url = f"http://127.0.0.1:{self.server.server_address[1]}/"
        threading.Thread(target=self.server.serve_forever, daemon=True).start()

    def close(self):
        self.server.shutdown()
        self.server.server_close()


@pytest.fixture
def mock():
    servers = []

    def make(**kw):
        servers.append(Mock(**kw))
        return servers[-1]

    yield make
    for s in servers:
        s.close()


def free_port():
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        return s.getsockname()[1]


def test_valid_label_is_parsed(mock):
    srv = mock(reply=lambda body: {"predicted_event": "flood", "reasoning": "echo"})
    out = remote_reasoner_call(srv.url, "early_warning", {"scene_id": "a"}, timeout_ms=2000)
    assert out == {"predicted_event": "flood", "reasoning": "echo"}
    assert srv.requests[0]["role"] == "early_warning"
    assert srv.requests[0]["schema_version"] == "1.0"


def test_out_of_enum_label(mock):
    srv = mock(reply=lambda body: {"predicted_event": "volcano", "reasoning": "?"})
    with pytest.raises(BackendError) as exc:
        remote_reasoner_call(srv.url, "early_warning", {}, timeout_ms=2000)
    assert exc.value.kind == "schema-violation"


def test_non_json_reply(mock):
    srv = mock(raw=b"<html>oops</html>")
    with pytest.raises(BackendError) as exc:
        remote_reasoner_call(srv.url, "decision", {}, timeout_ms=2000)
    assert exc.value.kind == "schema-violation"


def test_http_error_status(mock):
    srv = mock(reply=lambda body: {"error": "boom"}, status=500)
    with pytest.raises(BackendError) as exc:
        remote_reasoner_call(srv.url, "decision", {}, timeout_ms=2000)
    assert exc.value.kind == "backend-failure"


def test_unreachable_endpoint_fails_within_timeout():
    t0 = time.perf_counter()
    with pytest.raises(BackendError) as exc:
        remote_reasoner_call(f"http://127.0.0.1:{free_port()}/", "early_warning", {}, timeout_ms=500)
    assert exc.value.kind == "connection-failure"
    assert time.perf_counter() - t0 < 0.5


def test_slow_endpoint_times_out(mock):
    srv = mock(reply=lambda body: {"predicted_event": "none", "reasoning": ""}, delay=1.0)
    t0 = time.perf_counter()
    with pytest.raises(BackendError) as exc:
        remote_reasoner_call(srv.url, "early_warning", {}, timeout_ms=150)
    assert exc.value.kind == "timeout"
    assert time.perf_counter() - t0 < 0.9


def test_unknown_role_rejected_before_sending(mock):
    srv = mock(reply=lambda body: {})
    with pytest.raises(BackendError):
        remote_reasoner_call(srv.url, "oracle", {}, timeout_ms=500)
    assert srv.requests == []


def test_remote_reasoner_drives_early_warning(mock):
    srv = mock(reply=lambda body: {"predicted_event": "wildfire", "reasoning": "remote says fire"})
    scene = make_synthetic_scene(SyntheticSpec(width=32, height=32))
    h = early_warning_assess(scene, RemoteReasoner(srv.url, timeout_ms=2000))
    assert h.predicted_event.value == "wildfire" and h.reasoning == "remote says fire"
    assert srv.requests[0]["evidence"]["scene_id"] == "synthetic"


def test_remote_segmenter_matches_local(mock):
    local = ThresholdFireSegmenter()

    def segment(body):
        feats = np.frombuffer(base64.b64decode(body["features"]), dtype="<f4").reshape(body["shape"])
        labels = local.predict(feats, None).astype(np.uint8)
        return {"shape": list(labels.shape), "labels": base64.b64encode(labels.tobytes()).decode()}

    srv = mock(reply=segment)
    scene = make_synthetic_scene(SyntheticSpec(width=300, height=260, regions=[Region("fire", 40, 200, 30, 30)]))
    _, remote_mask = tool_ml_fire(scene, RemoteSegmenter(srv.url, timeout_ms=5000))
    _, local_mask = tool_ml_fire(scene, local)
    assert np.array_equal(remote_mask, local_mask)
    assert len(srv.requests) == 4  # 2x2 windows


def test_remote_segmenter_bad_payload(mock):
    srv = mock(reply=lambda body: {"shape": [1, 1], "labels": base64.b64encode(b"\x01").decode()})
    scene = make_synthetic_scene(SyntheticSpec(width=16, height=16))
    with pytest.raises(BackendError) as exc:
        tool_ml_fire(scene, RemoteSegmenter(srv.url, timeout_ms=2000))
    assert exc.value.kind == "schema-violation"
