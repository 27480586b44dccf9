"""Segmentation backends plugged into the ML tools.

The shipped backends are threshold stand-ins for the neural segmenters so
the pipeline runs without model weights. A backend sees one tile of stacked
features at a time and returns a tile-shaped prediction.
"""

from __future__ import annotations

import base64
import json
import time
import urllib.error
import urllib.request
from typing import Mapping, Optional, Protocol, runtime_checkable

import numpy as np

from .indices import DEFAULT_EPS, normalized_difference
from .masks import above
from .tiling import TileWindow

# flood segmenter classes
DRY = 0
FLOOD = 1
PERMANENT_WATER = 2
FLOOD_CLASSES = (DRY, FLOOD, PERMANENT_WATER)


class BackendError(RuntimeError):
    """A pluggable backend failed; ``kind`` is timeout, connection-failure,
    schema-violation or backend-failure."""

    def __init__(self, backend_id: str, message: str, kind: str = "backend-failure"):
        self.backend_id = backend_id
        self.kind = kind
        super().__init__(f"[{backend_id}] {kind}: {message}")


@runtime_checkable
class SegmenterBackend(Protocol):
    backend_id: str
    concurrent_safe: bool

    def predict(
        self, features: np.ndarray, window: TileWindow, aux: Optional[Mapping[str, np.ndarray]] = None
    ) -> np.ndarray:
        """features: (C, h, w) float array for ``window``; returns an (h, w) array."""
        ...


class ThresholdFireSegmenter:
    """Stand-in for the active-fire network: NHI_SWIR above a threshold.

    Expects features ordered (B8, B11, B12).
    """

    concurrent_safe = True

    def __init__(self, threshold: float = 0.0, eps: float = DEFAULT_EPS):
        self.threshold = threshold
        self.eps = eps
        self.backend_id = f"threshold-nhi-swir(>{threshold:g})"

    @classmethod
    def from_config(cls, cfg) -> "ThresholdFireSegmenter":
        return cls(cfg.nhi_swir_hot, cfg.eps_denominator)

    def predict(self, features, window, aux=None):
        _, swir1, swir2 = features
        return above(normalized_difference(swir2, swir1, self.eps), self.threshold)


class ThresholdFloodSegmenter:
    """Stand-in for the 3-class SAR flood network.

    Low VV backscatter is water; water inside the permanent-water reference
    (``aux["permanent_water"]``) is labelled PERMANENT_WATER, the rest FLOOD.
    Expects features ordered (VV, VH, VV/VH).
    """

    concurrent_safe = True

    def __init__(self, vv_water_max: float = 0.03):
        self.vv_water_max = vv_water_max
        self.backend_id = f"threshold-vv(<{vv_water_max:g})"

    def predict(self, features, window, aux=None):
        vv = features[0]
        with np.errstate(invalid="ignore"):
            water = np.isfinite(vv) & (vv < self.vv_water_max)
        labels = np.full(vv.shape, DRY, dtype=np.uint8)
        labels[water] = FLOOD
        if aux is not None and aux.get("permanent_water") is not None:
            labels[water & aux["permanent_water"]] = PERMANENT_WATER
        return labels


class DelayedSegmenter:
    """Wraps a backend and sleeps a fixed time per tile; models inference cost."""

    def __init__(self, inner: SegmenterBackend, per_tile_ms: float):
        self.inner = inner
        self.per_tile_ms = per_tile_ms
        self.backend_id = f"{inner.backend_id}+delay({per_tile_ms:g}ms/tile)"
        self.concurrent_safe = inner.concurrent_safe

    def predict(self, features, window, aux=None):
        time.sleep(self.per_tile_ms / 1000.0)
        return self.inner.predict(features, window, aux)


class RemoteSegmenter:
    """Posts each tile to an inference service.

    Request: ``{"backend": ..., "window": [row, col, h, w], "dtype": "float32",
    "shape": [C, h, w], "features": <base64 little-endian>}``.
    Response: ``{"shape": [h, w], "labels": <base64 uint8>}``.
    """

    concurrent_safe = True

    def __init__(self, endpoint: str, timeout_ms: float = 30_000, backend_id: str = "remote-segmenter"):
        self.endpoint = endpoint
        self.timeout_ms = timeout_ms
        self.backend_id = backend_id

    def predict(self, features, window, aux=None):
        feats = np.ascontiguousarray(features, dtype="<f4")
        body = {
            "backend": self.backend_id,
            "window": [window.row, window.col, window.height, window.width],
            "dtype": "float32",
            "shape": list(feats.shape),
            "features": base64.b64encode(feats.tobytes()).decode("ascii"),
        }
        if aux and aux.get("permanent_water") is not None:
            pw = np.ascontiguousarray(aux["permanent_water"], dtype=np.uint8)
            body["permanent_water"] = base64.b64encode(pw.tobytes()).decode("ascii")
        doc = post_json(self.endpoint, body, self.timeout_ms, self.backend_id)
        try:
            shape = tuple(doc["shape"])
            labels = np.frombuffer(base64.b64decode(doc["labels"]), dtype=np.uint8).reshape(shape)
        except (KeyError, TypeError, ValueError) as exc:
            raise BackendError(self.backend_id, f"bad segmentation payload: {exc}", "schema-violation") from exc
        if shape != (window.height, window.width):
            raise BackendError(self.backend_id, f"tile shape {shape} != window", "schema-violation")
        return labels


def post_json(url: str, body: dict, timeout_ms: float, backend_id: str) -> dict:
    """POST a JSON body and decode the JSON reply, mapping failures to BackendError."""
    data = json.dumps(body).encode("utf-8")
    req = urllib.request.Request(url, data=data, method="POST", headers={"Content-Type": "application/json"})
    try:
        with urllib.request.urlopen(req, timeout=timeout_ms / 1000.0) as resp:
            payload = resp.read()
    except urllib.error.HTTPError as exc:
        raise BackendError(backend_id, f"HTTP {exc.code}", "backend-failure") from exc
    except TimeoutError as exc:
        raise BackendError(backend_id, f"no reply within {timeout_ms:g} ms", "timeout") from exc
    except urllib.error.URLError as exc:
        if isinstance(exc.reason, TimeoutError):
            raise BackendError(backend_id, f"no reply within {timeout_ms:g} ms", "timeout") from exc
        raise BackendError(backend_id, str(exc.reason), "connection-failure") from exc
    except OSError as exc:
        raise BackendError(backend_id, str(exc), "connection-failure") from exc
    try:
        doc = json.loads(payload)
    except ValueError as exc:
        raise BackendError(backend_id, "reply is not JSON", "schema-violation") from exc
    if not isinstance(doc, dict):
        raise BackendError(backend_id, "reply is not a JSON object", "schema-violation")
    return doc
