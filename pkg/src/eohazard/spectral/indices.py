"""Spectral indices over surface-reflectance bands.

All functions return float64 grids with NaN wherever an input is NaN or the
denominator magnitude falls below ``eps``.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from ..scene_store import BandId, SceneBundle

DEFAULT_EPS = 1e-6

# charcoal reflectance point in (red, nir) space
BAI_RED_REF = 0.1
BAI_NIR_REF = 0.06


class IndexKind(str, Enum):
    NHI_SWIR = "NHI_SWIR"
    NHI_SWNIR = "NHI_SWNIR"
    MNDWI = "MNDWI"
    BAI = "BAI"


@dataclass(frozen=True, eq=False)
class IndexRaster:
    kind: IndexKind
    values: np.ndarray

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]


def normalized_difference(a, b, eps: float = DEFAULT_EPS) -> np.ndarray:
    """(a - b) / (a + b), NaN where |a + b| < eps."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    den = a + b
    out = np.full(np.broadcast(a, b).shape, np.nan)
    ok = np.abs(den) >= eps  # NaN compares False, so NaN inputs stay NaN
    np.divide(a - b, den, out=out, where=ok)
    return out


def bai(red, nir, eps: float = DEFAULT_EPS) -> np.ndarray:
    red = np.asarray(red, dtype=np.float64)
    nir = np.asarray(nir, dtype=np.float64)
    den = (BAI_RED_REF - red) ** 2 + (BAI_NIR_REF - nir) ** 2
    out = np.full(den.shape, np.nan)
    np.divide(1.0, den, out=out, where=den >= eps)
    return out


def compute_nhi_swir(scene: SceneBundle, eps: float = DEFAULT_EPS) -> IndexRaster:
    swir2, swir1 = scene.band(BandId.B12), scene.band(BandId.B11)
    return IndexRaster(IndexKind.NHI_SWIR, normalized_difference(swir2, swir1, eps))


def compute_nhi_swnir(scene: SceneBundle, eps: float = DEFAULT_EPS) -> IndexRaster:
    swir1, nir = scene.band(BandId.B11), scene.band(BandId.B8)
    return IndexRaster(IndexKind.NHI_SWNIR, normalized_difference(swir1, nir, eps))


def compute_mndwi(scene: SceneBundle, eps: float = DEFAULT_EPS) -> IndexRaster:
    green, swir1 = scene.band(BandId.B3), scene.band(BandId.B11)
    return IndexRaster(IndexKind.MNDWI, normalized_difference(green, swir1, eps))


def compute_bai(scene: SceneBundle, eps: float = DEFAULT_EPS) -> IndexRaster:
    red, nir = scene.band(BandId.B4), scene.band(BandId.B8)
    return IndexRaster(IndexKind.BAI, bai(red, nir, eps))
