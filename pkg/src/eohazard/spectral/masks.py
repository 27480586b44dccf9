from __future__ import annotations

import numpy as np
from scipy import ndimage

from ..scene_store import SceneBundle
from .config import ThresholdConfig
from .indices import compute_mndwi

_EIGHT_CONNECTED = np.ones((3, 3), dtype=bool)


def above(values: np.ndarray, threshold: float) -> np.ndarray:
    """values > threshold, with NaN mapped to False."""
    with np.errstate(invalid="ignore"):
        return np.asarray(values > threshold) & np.isfinite(values)


def water_mask(scene: SceneBundle, cfg: ThresholdConfig = ThresholdConfig()) -> np.ndarray:
    return above(compute_mndwi(scene, cfg.eps_denominator).values, cfg.mndwi_water)


def mask_area_km2(mask: np.ndarray, pixel_size_m: float) -> float:
    return int(np.count_nonzero(mask)) * pixel_size_m**2 / 1e6


def connected_components(mask: np.ndarray) -> int:
    """Number of 8-connected groups of True pixels."""
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        return 0
    _, n = ndimage.label(mask, structure=_EIGHT_CONNECTED)
    return int(n)
