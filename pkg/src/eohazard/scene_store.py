"""On-disk scene bundles, dataset manifests and synthetic scene generation.

A scene bundle is a directory holding ``meta.json`` and one ``<BandId>.bin``
file per band (little-endian float32, row-major). An optional
``permanent_water.bin`` (one byte per pixel, 0/1) carries the permanent-water
reference mask used by the flood segmenter.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

META_FILE = "meta.json"
MANIFEST_FILE = "manifest.json"
PERMANENT_WATER_FILE = "permanent_water.bin"
BUNDLE_FORMAT_VERSION = 1

_F32_LE = np.dtype("<f4")


class BandId(str, Enum):
    B2 = "B2"
    B3 = "B3"
    B4 = "B4"
    B8 = "B8"
    B11 = "B11"
    B12 = "B12"
    VV = "VV"
    VH = "VH"

    @property
    def is_optical(self) -> bool:
        return self not in (BandId.VV, BandId.VH)

    @property
    def meaning(self) -> str:
        return BAND_MEANINGS[self]


BAND_MEANINGS: Mapping[BandId, str] = {
    BandId.B2: "blue",
    BandId.B3: "green",
    BandId.B4: "red",
    BandId.B8: "nir",
    BandId.B11: "swir1",
    BandId.B12: "swir2",
    BandId.VV: "sar_vv",
    BandId.VH: "sar_vh",
}

OPTICAL_BANDS = (BandId.B2, BandId.B3, BandId.B4, BandId.B8, BandId.B11, BandId.B12)
SAR_BANDS = (BandId.VV, BandId.VH)
REFLECTANCE_MAX = 1.5


class SceneLabel(str, Enum):
    wildfire = "wildfire"
    flood = "flood"
    none = "none"


class SceneError(Exception):
    """Base class for scene loading and validation failures."""

    code = "scene-error"

    def __init__(self, message: str, path: Optional[os.PathLike | str] = None):
        self.path = None if path is None else str(path)
        super().__init__(f"{message} ({self.path})" if self.path else message)


class MissingMetadataError(SceneError):
    code = "missing-metadata"


class BandSizeMismatchError(SceneError):
    code = "band-size-mismatch"


class TruncatedBandFileError(SceneError):
    code = "truncated-band-file"


class UnknownBandIdError(SceneError):
    code = "unknown-band-id"


class InvalidSceneError(SceneError):
    code = "invalid-scene"


class SceneIOError(SceneError):
    code = "io-failure"


class MissingBandError(SceneError):
    code = "missing-band"

    def __init__(self, band: "BandId", scene_id: str = ""):
        self.band = band
        self.scene_id = scene_id
        super().__init__(f"scene {scene_id!r} lacks band {band.value}")


class InvalidSpecError(SceneError):
    code = "invalid-spec"


class ManifestError(SceneError):
    code = "invalid-manifest"


def parse_band_id(name: str, path=None) -> BandId:
    try:
        return BandId(name)
    except ValueError:
        raise UnknownBandIdError(f"unknown band id {name!r}", path) from None


def _frozen(values: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(values, dtype=np.float32)
    if arr is values:
        arr = arr.copy()
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class BandRaster:
    band: BandId
    values: np.ndarray

    def __post_init__(self):
        if self.values.ndim != 2:
            raise InvalidSceneError(f"band {self.band.value} must be 2-D, got {self.values.ndim}-D")
        object.__setattr__(self, "values", _frozen(self.values))
        finite = self.values[np.isfinite(self.values)]
        if self.band.is_optical:
            if finite.size and (finite.min() < 0.0 or finite.max() > REFLECTANCE_MAX):
                raise InvalidSceneError(f"band {self.band.value} reflectance outside [0, {REFLECTANCE_MAX}]")
        elif finite.size and finite.min() < 0.0:
            raise InvalidSceneError(f"band {self.band.value} backscatter must be >= 0")
        if np.isinf(self.values).any():
            raise InvalidSceneError(f"band {self.band.value} contains inf; use NaN for nodata")

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True, eq=False)
class SceneBundle:
    scene_id: str
    bands: Mapping[BandId, BandRaster]
    pixel_size_m: float
    label: Optional[SceneLabel] = None
    acquisition_note: str = ""
    permanent_water: Optional[np.ndarray] = None

    def __post_init__(self):
        if not self.scene_id:
            raise InvalidSceneError("scene_id must be non-empty")
        if not self.bands:
            raise InvalidSceneError(f"scene {self.scene_id} has no bands")
        if not (self.pixel_size_m > 0 and np.isfinite(self.pixel_size_m)):
            raise InvalidSceneError(f"pixel_size_m must be > 0, got {self.pixel_size_m}")
        shapes = {r.values.shape for r in self.bands.values()}
        if len(shapes) != 1:
            raise BandSizeMismatchError(f"scene {self.scene_id} bands differ in size: {sorted(shapes)}")
        (shape,) = shapes
        if 0 in shape:
            raise InvalidSceneError(f"scene {self.scene_id} has zero extent {shape}")
        for band, raster in self.bands.items():
            if raster.band is not band:
                raise InvalidSceneError(f"band key {band} holds raster for {raster.band}")
        # canonical band order keeps iteration (and serialization) deterministic
        ordered = {b: self.bands[b] for b in BandId if b in self.bands}
        object.__setattr__(self, "bands", ordered)
        if self.label is not None:
            object.__setattr__(self, "label", SceneLabel(self.label))
        if self.permanent_water is not None:
            pw = np.array(self.permanent_water, dtype=bool)
            if pw.shape != shape:
                raise BandSizeMismatchError(f"permanent-water mask {pw.shape} != scene {shape}")
            pw.setflags(write=False)
            object.__setattr__(self, "permanent_water", pw)

    @property
    def shape(self) -> tuple[int, int]:
        return next(iter(self.bands.values())).values.shape

    @property
    def height(self) -> int:
        return self.shape[0]

    @property
    def width(self) -> int:
        return self.shape[1]

    def has(self, *bands: BandId) -> bool:
        return all(b in self.bands for b in bands)

    def band(self, band: BandId) -> np.ndarray:
        try:
            return self.bands[band].values
        except KeyError:
            raise MissingBandError(band, self.scene_id) from None

    def equals(self, other: "SceneBundle") -> bool:
        """Bit-exact comparison (NaN payloads included)."""
        if (self.scene_id, self.pixel_size_m, self.label, self.acquisition_note) != (
            other.scene_id,
            other.pixel_size_m,
            other.label,
            other.acquisition_note,
        ):
            return False
        if list(self.bands) != list(other.bands):
            return False
        for b in self.bands:
            if self.bands[b].values.tobytes() != other.bands[b].values.tobytes():
                return False
        if (self.permanent_water is None) != (other.permanent_water is None):
            return False
        if self.permanent_water is not None and not np.array_equal(self.permanent_water, other.permanent_water):
            return False
        return True


def scene_area_km2(scene: SceneBundle) -> float:
    return scene.width * scene.height * scene.pixel_size_m**2 / 1e6


# --- serialization -----------------------------------------------------------


def _scene_meta(scene: SceneBundle) -> dict:
    return {
        "format_version": BUNDLE_FORMAT_VERSION,
        "scene_id": scene.scene_id,
        "width": scene.width,
        "height": scene.height,
        "pixel_size_m": scene.pixel_size_m,
        "label": None if scene.label is None else scene.label.value,
        "bands": [b.value for b in scene.bands],
        "acquisition_note": scene.acquisition_note,
        "permanent_water": scene.permanent_water is not None,
    }


def save_scene(scene: SceneBundle, path: os.PathLike | str) -> None:
    path = Path(path)
    try:
        path.mkdir(parents=True, exist_ok=True)
        for band, raster in scene.bands.items():
            (path / f"{band.value}.bin").write_bytes(raster.values.astype(_F32_LE, copy=False).tobytes())
        if scene.permanent_water is not None:
            (path / PERMANENT_WATER_FILE).write_bytes(scene.permanent_water.astype(np.uint8).tobytes())
        (path / META_FILE).write_text(json.dumps(_scene_meta(scene), indent=2, sort_keys=True) + "\n")
    except OSError as exc:
        raise SceneIOError(f"cannot write scene: {exc}", path) from exc


def read_scene_meta(path: os.PathLike | str) -> dict:
    """Parse and check ``meta.json`` without touching band files."""
    meta_path = Path(path) / META_FILE
    try:
        meta = json.loads(meta_path.read_text())
    except FileNotFoundError:
        raise MissingMetadataError("meta.json not found", meta_path) from None
    except (OSError, json.JSONDecodeError) as exc:
        raise MissingMetadataError(f"unreadable meta.json: {exc}", meta_path) from exc
    required = ("scene_id", "width", "height", "pixel_size_m", "bands")
    missing = [k for k in required if k not in meta]
    if missing:
        raise MissingMetadataError(f"meta.json lacks {', '.join(missing)}", meta_path)
    for key in ("width", "height"):
        if not isinstance(meta[key], int) or meta[key] <= 0:
            raise InvalidSceneError(f"{key} must be a positive integer", meta_path)
    if not isinstance(meta["bands"], list) or not meta["bands"]:
        raise MissingMetadataError("band list is empty", meta_path)
    return meta


def _read_band(file: Path, width: int, height: int) -> np.ndarray:
    expected = width * height
    try:
        raw = file.read_bytes()
    except FileNotFoundError:
        raise TruncatedBandFileError("band file missing", file) from None
    n_floats, rem = divmod(len(raw), _F32_LE.itemsize)
    if n_floats < expected or rem:
        raise TruncatedBandFileError(f"holds {len(raw)} bytes, expected {expected * 4}", file)
    if n_floats > expected:
        raise BandSizeMismatchError(f"holds {n_floats} floats, header declares {width}x{height}", file)
    return np.frombuffer(raw, dtype=_F32_LE).astype(np.float32).reshape(height, width)


def load_scene(path: os.PathLike | str) -> SceneBundle:
    path = Path(path)
    meta = read_scene_meta(path)
    width, height = meta["width"], meta["height"]
    bands = {}
    for name in meta["bands"]:
        band = parse_band_id(name, path / META_FILE)
        file = path / f"{band.value}.bin"
        try:
            bands[band] = BandRaster(band, _read_band(file, width, height))
        except InvalidSceneError as exc:
            raise InvalidSceneError(str(exc), file) from exc
    pw = None
    if meta.get("permanent_water"):
        file = path / PERMANENT_WATER_FILE
        pw = load_bool_raster(file, width, height)
    label = meta.get("label")
    try:
        return SceneBundle(
            scene_id=meta["scene_id"],
            bands=bands,
            pixel_size_m=float(meta["pixel_size_m"]),
            label=None if label is None else SceneLabel(label),
            acquisition_note=meta.get("acquisition_note", ""),
            permanent_water=pw,
        )
    except ValueError as exc:
        raise InvalidSceneError(str(exc), path / META_FILE) from exc


def load_bool_raster(file: os.PathLike | str, width: int, height: int) -> np.ndarray:
    file = Path(file)
    try:
        raw = file.read_bytes()
    except FileNotFoundError:
        raise TruncatedBandFileError("mask file missing", file) from None
    if len(raw) != width * height:
        raise TruncatedBandFileError(f"holds {len(raw)} bytes, expected {width * height}", file)
    return np.frombuffer(raw, dtype=np.uint8).reshape(height, width) != 0


def save_bool_raster(mask: np.ndarray, file: os.PathLike | str) -> None:
    Path(file).write_bytes(np.asarray(mask, dtype=bool).astype(np.uint8).tobytes())


# --- manifest ----------------------------------------------------------------


@dataclass(frozen=True)
class ManifestEntry:
    scene_id: str
    path: str
    label: Optional[SceneLabel] = None


@dataclass(frozen=True)
class DatasetManifest:
    entries: tuple[ManifestEntry, ...] = ()
    version: int = 1
    root: Optional[Path] = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(self.entries))
        seen = set()
        for e in self.entries:
            if e.scene_id in seen:
                raise ManifestError(f"duplicate scene_id {e.scene_id!r}")
            seen.add(e.scene_id)

    def __len__(self):
        return len(self.entries)

    def get(self, scene_id: str) -> Optional[ManifestEntry]:
        for e in self.entries:
            if e.scene_id == scene_id:
                return e
        return None

    def resolve(self, entry: ManifestEntry) -> Path:
        p = Path(entry.path)
        if not p.is_absolute() and self.root is not None:
            p = self.root / p
        return p

    def to_dict(self) -> dict:
        return {
            "version": self.version,
            "entries": [
                {"scene_id": e.scene_id, "path": e.path, "label": None if e.label is None else e.label.value}
                for e in self.entries
            ],
        }


def load_manifest(path: os.PathLike | str) -> DatasetManifest:
    path = Path(path)
    if path.is_dir():
        path = path / MANIFEST_FILE
    try:
        doc = json.loads(path.read_text())
        entries = [
            ManifestEntry(
                scene_id=e["scene_id"],
                path=e["path"],
                label=None if e.get("label") is None else SceneLabel(e["label"]),
            )
            for e in doc["entries"]
        ]
        return DatasetManifest(tuple(entries), int(doc.get("version", 1)), root=path.parent)
    except FileNotFoundError:
        raise ManifestError("manifest not found", path) from None
    except (KeyError, TypeError, ValueError) as exc:
        raise ManifestError(f"malformed manifest: {exc}", path) from exc


def save_manifest(manifest: DatasetManifest, path: os.PathLike | str) -> Path:
    path = Path(path)
    if path.is_dir() or not path.suffix:
        path = path / MANIFEST_FILE
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(manifest.to_dict(), indent=2, sort_keys=True) + "\n")
    return path


def write_dataset(scenes: Iterable[SceneBundle], root: os.PathLike | str) -> DatasetManifest:
    """Save scenes under ``root/<scene_id>/`` and write the manifest."""
    root = Path(root)
    entries = []
    for scene in scenes:
        save_scene(scene, root / scene.scene_id)
        entries.append(ManifestEntry(scene.scene_id, scene.scene_id, scene.label))
    manifest = DatasetManifest(tuple(entries), root=root)
    save_manifest(manifest, root)
    return manifest


# --- synthetic scenes --------------------------------------------------------

# Reflectance / backscatter signatures per surface. Chosen with margin against
# the default thresholds:
#   land:      every index below the relaxed thresholds, BAI ~ 11
#   fire:      NHI_SWIR = 0.2, NHI_SWNIR = 0.33, BAI ~ 118
#   burn_scar: NHI_SWIR ~ -0.021 (relaxed only), NHI_SWNIR ~ -0.04, BAI = 200
#   water:     MNDWI = 0.6, both NHI negative
SIGNATURES: Mapping[str, Mapping[BandId, float]] = {
    "land": {
        BandId.B2: 0.04, BandId.B3: 0.07, BandId.B4: 0.05, BandId.B8: 0.35,
        BandId.B11: 0.20, BandId.B12: 0.10, BandId.VV: 0.15, BandId.VH: 0.04,
    },
    "fire": {
        BandId.B2: 0.06, BandId.B3: 0.08, BandId.B4: 0.12, BandId.B8: 0.15,
        BandId.B11: 0.30, BandId.B12: 0.45, BandId.VV: 0.12, BandId.VH: 0.03,
    },
    "burn_scar": {
        BandId.B2: 0.05, BandId.B3: 0.06, BandId.B4: 0.09, BandId.B8: 0.13,
        BandId.B11: 0.12, BandId.B12: 0.115, BandId.VV: 0.11, BandId.VH: 0.03,
    },
    "water": {
        BandId.B2: 0.06, BandId.B3: 0.08, BandId.B4: 0.04, BandId.B8: 0.03,
        BandId.B11: 0.02, BandId.B12: 0.01, BandId.VV: 0.01, BandId.VH: 0.003,
    },
}
REGION_SURFACE = {"fire": "fire", "burn_scar": "burn_scar", "flood": "water", "permanent_water": "water"}


@dataclass(frozen=True)
class Region:
    kind: str  # fire | burn_scar | flood | permanent_water
    row: int
    col: int
    height: int
    width: int

    def slices(self) -> tuple[slice, slice]:
        return slice(self.row, self.row + self.height), slice(self.col, self.col + self.width)


@dataclass(frozen=True)
class SyntheticSpec:
    scene_id: str = "synthetic"
    width: int = 256
    height: int = 256
    pixel_size_m: float = 20.0
    regions: Sequence[Region] = ()
    seed: int = 0
    noise: float = 0.005
    bands: Sequence[BandId] = tuple(BandId)
    label: Optional[SceneLabel] = None
    acquisition_note: str = "synthetic"


def make_synthetic_scene(spec: SyntheticSpec) -> SceneBundle:
    """Paint rectangular surfaces over a noisy vegetated background.

    Noise is applied to the background only; painted regions carry their exact
    signature so that masks match the rectangles pixel-for-pixel. Later regions
    overwrite earlier ones.
    """
    if spec.width <= 0 or spec.height <= 0 or not spec.pixel_size_m > 0:
        raise InvalidSpecError(f"invalid dimensions {spec.width}x{spec.height} @ {spec.pixel_size_m} m")
    if not 0 <= spec.noise <= 0.02:
        raise InvalidSpecError(f"noise {spec.noise} outside [0, 0.02]")
    for r in spec.regions:
        if r.kind not in REGION_SURFACE:
            raise InvalidSpecError(f"unknown region kind {r.kind!r}")
        if r.height <= 0 or r.width <= 0 or r.row < 0 or r.col < 0:
            raise InvalidSpecError(f"bad region geometry {r}")
        if r.row + r.height > spec.height or r.col + r.width > spec.width:
            raise InvalidSpecError(f"region {r} exceeds scene bounds")

    rng = np.random.default_rng(spec.seed)
    shape = (spec.height, spec.width)
    land = SIGNATURES["land"]
    bands = {}
    for band in BandId:
        base = land[band]
        # draw for every band, even unused ones, so the band subset never shifts the stream
        jitter = rng.uniform(-spec.noise, spec.noise, size=shape) * (base if not band.is_optical else 1.0)
        values = (base + jitter).astype(np.float32)
        for r in spec.regions:
            values[r.slices()] = SIGNATURES[REGION_SURFACE[r.kind]][band]
        if band in spec.bands:
            bands[band] = BandRaster(band, values)

    pw = None
    if any(r.kind == "permanent_water" for r in spec.regions):
        pw = np.zeros(shape, dtype=bool)
        for r in spec.regions:
            if r.kind == "permanent_water":
                pw[r.slices()] = True
            else:
                pw[r.slices()] = False
    return SceneBundle(
        scene_id=spec.scene_id,
        bands=bands,
        pixel_size_m=float(spec.pixel_size_m),
        label=spec.label,
        acquisition_note=spec.acquisition_note,
        permanent_water=pw,
    )


def uniform_scene(values: Mapping[BandId, float], width: int = 8, height: int = 8,
                  pixel_size_m: float = 20.0, scene_id: str = "uniform") -> SceneBundle:
    """Scene where each band holds one constant value; handy in tests and fixtures."""
    bands = {b: BandRaster(b, np.full((height, width), v, dtype=np.float32)) for b, v in values.items()}
    return SceneBundle(scene_id=scene_id, bands=bands, pixel_size_m=pixel_size_m)
