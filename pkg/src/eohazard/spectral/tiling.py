"""Sliding-window tiling and overlap merging for the segmentation tools."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np


class TilingError(ValueError):
    code = "invalid-stride"


class MergeError(ValueError):
    code = "dimension-mismatch"


@dataclass(frozen=True, order=True)
class TileWindow:
    row: int
    col: int
    height: int
    width: int

    def slices(self) -> tuple[slice, slice]:
        return slice(self.row, self.row + self.height), slice(self.col, self.col + self.width)


def _origins(extent: int, tile: int, stride: int) -> list[int]:
    if extent <= tile:
        return [0]
    origins = [0]
    while origins[-1] + tile < extent:
        # last window is shifted back so it ends exactly on the scene edge
        origins.append(min(origins[-1] + stride, extent - tile))
    return origins


def tile_segment(height: int, width: int, tile: int = 256, stride: int = 128) -> list[TileWindow]:
    """Row-major list of windows covering a ``height`` x ``width`` scene.

    Windows are ``tile`` square unless the scene is smaller along an axis, in
    which case they span that whole axis.
    """
    if height < 1 or width < 1:
        raise TilingError(f"scene dims must be >= 1, got {height}x{width}")
    if tile < 1 or not 1 <= stride <= tile:
        raise TilingError(f"stride {stride} outside [1, {tile}]")
    th, tw = min(tile, height), min(tile, width)
    return [
        TileWindow(r, c, th, tw)
        for r in _origins(height, tile, stride)
        for c in _origins(width, tile, stride)
    ]


def merge_tile_masks(tiles: Iterable[tuple[TileWindow, np.ndarray]], height: int, width: int) -> np.ndarray:
    """OR-merge per-tile boolean predictions into a full-scene mask."""
    out = np.zeros((height, width), dtype=bool)
    for window, mask in tiles:
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != (window.height, window.width):
            raise MergeError(f"tile mask {mask.shape} does not match window {window}")
        if window.row < 0 or window.col < 0 or window.row + window.height > height or window.col + window.width > width:
            raise MergeError(f"window {window} outside {height}x{width} scene")
        out[window.slices()] |= mask
    return out
