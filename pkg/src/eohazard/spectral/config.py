"""Detection thresholds shared by the wildfire and flood tools."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields
from pathlib import Path


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ThresholdConfig:
    """Thresholds for the index and segmentation tools.

    Strict NHI thresholds drive the active-fire mask; the relaxed pair drives
    the burned-area candidate mask and must not exceed the strict ones.
    ``tile_size``/``tile_stride`` set the sliding window used by the
    segmentation tools.
    """

    nhi_swir_hot: float = 0.0
    nhi_swnir_hot: float = 0.0
    nhi_swir_relaxed: float = -0.05
    nhi_swnir_relaxed: float = -0.05
    mndwi_water: float = 0.0
    bai_burn: float = 100.0
    flood_fraction_min: float = 0.005
    fire_area_min_km2: float = 0.01
    eps_denominator: float = 1e-6
    tile_size: int = 256
    tile_stride: int = 128

    def __post_init__(self):
        if self.nhi_swir_relaxed > self.nhi_swir_hot:
            raise ConfigError("nhi_swir_relaxed must be <= nhi_swir_hot")
        if self.nhi_swnir_relaxed > self.nhi_swnir_hot:
            raise ConfigError("nhi_swnir_relaxed must be <= nhi_swnir_hot")
        if not 0.0 <= self.flood_fraction_min <= 1.0:
            raise ConfigError("flood_fraction_min must be a fraction")
        if self.fire_area_min_km2 < 0:
            raise ConfigError("fire_area_min_km2 must be >= 0")
        if not self.eps_denominator > 0:
            raise ConfigError("eps_denominator must be > 0")
        if self.tile_size < 1 or not 1 <= self.tile_stride <= self.tile_size:
            raise ConfigError("need tile_size >= 1 and 1 <= tile_stride <= tile_size")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, doc: dict) -> "ThresholdConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"unknown threshold keys: {sorted(unknown)}")
        return cls(**doc)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ThresholdConfig":
        return cls.from_dict(json.loads(text))

    @classmethod
    def load(cls, path) -> "ThresholdConfig":
        return cls.from_json(Path(path).read_text())
