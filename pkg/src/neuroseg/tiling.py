"""Overlapping patch layout and weighted reassembly of per-patch probability maps."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import CoverageGap, PatchLargerThanImage
from .postprocess import normalize_probabilities


@dataclass(frozen=True)
class Tile:
    x0: int
    y0: int
    w: int
    h: int

    @property
    def slices(self):
        return slice(self.y0, self.y0 + self.h), slice(self.x0, self.x0 + self.w)


@dataclass(frozen=True)
class TileGrid:
    width: int
    height: int
    patch_size: int
    overlap: int
    tiles: tuple[Tile, ...]

    @property
    def stride(self) -> int:
        return self.patch_size - self.overlap

    def __len__(self):
        return len(self.tiles)

    def __iter__(self):
        return iter(self.tiles)


def _axis_starts(length: int, patch: int, stride: int) -> list[int]:
    if length <= patch:
        return [0]
    n = math.ceil((length - patch) / stride) + 1
    return [min(i * stride, length - patch) for i in range(n)]


def plan_tiles(width: int, height: int, patch_size: int = 1344, overlap: int = 120) -> TileGrid:
    """Tile a ``width`` x ``height`` canvas with overlapping square patches.

    Tiles start every ``patch_size - overlap`` pixels; the last tile on each
    axis is pulled back flush with the image edge. A patch larger than the
    image is shrunk to the image along that axis.
    """
    if width < 1 or height < 1:
        raise ValueError("image must be at least 1x1")
    if not 0 <= overlap < patch_size:
        raise ValueError("need 0 <= overlap < patch_size")
    if patch_size > min(width, height):
        warnings.warn(
            PatchLargerThanImage(f"patch {patch_size} exceeds image {width}x{height}; shrinking"),
            stacklevel=2,
        )
    stride = patch_size - overlap
    pw, ph = min(patch_size, width), min(patch_size, height)
    xs = _axis_starts(width, pw, stride)
    ys = _axis_starts(height, ph, stride)
    tiles = tuple(Tile(x, y, pw, ph) for y in ys for x in xs)
    return TileGrid(width, height, patch_size, overlap, tiles)


def _ramp(n: int, overlap: int) -> np.ndarray:
    d = np.minimum(np.arange(n), np.arange(n)[::-1])
    return np.minimum(1.0, (d + 1) / (overlap + 1))


def weight_map(patch_size, overlap: int) -> np.ndarray:
    """Separable border down-weighting for one patch.

    Each axis ramps linearly from ``1/(overlap+1)`` at the edge to 1 at
    ``overlap`` pixels in. ``patch_size`` is an int or ``(height, width)``.
    """
    if isinstance(patch_size, (tuple, list)):
        h, w = patch_size
    else:
        h = w = patch_size
    if overlap < 0 or 2 * overlap >= min(h, w):
        raise ValueError("need 0 <= overlap < patch_size / 2")
    return np.outer(_ramp(h, overlap), _ramp(w, overlap))


def stitch(tiles, weights, width: int, height: int) -> np.ndarray:
    """Blend per-tile probability maps into one canvas.

    ``tiles`` is a sequence of ``(Tile, probability map)``; ``weights`` is a
    full-patch weight array, cropped to smaller tiles, or a callable
    ``(h, w) -> array``. Each pixel becomes the weighted mean of the tiles
    covering it, accumulated in tile order, then channels are renormalised.
    """
    acc = np.zeros((height, width, 3), dtype=np.float64)
    wsum = np.zeros((height, width), dtype=np.float64)
    for tile, pm in tiles:
        pm = np.asarray(pm)
        if pm.shape[:2] != (tile.h, tile.w):
            raise ValueError(f"tile at ({tile.x0}, {tile.y0}) expects {tile.h}x{tile.w}, got {pm.shape[:2]}")
        wt = weights(tile.h, tile.w) if callable(weights) else np.asarray(weights)[: tile.h, : tile.w]
        ys, xs = tile.slices
        acc[ys, xs] += wt[..., None] * pm
        wsum[ys, xs] += wt
    gaps = int((wsum == 0).sum())
    if gaps:
        raise CoverageGap(gaps)
    blended = (acc / wsum[..., None]).astype(np.float32)
    return normalize_probabilities(blended)


def predict_tiled(image, predictor, patch_size: int = 1344, overlap: int = 120) -> np.ndarray:
    """Run ``predictor`` patch by patch over ``image`` and stitch the results."""
    h, w = image.shape[:2]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", PatchLargerThanImage)
        grid = plan_tiles(w, h, patch_size, overlap)

    def weights(th, tw):
        return weight_map((th, tw), min(overlap, (min(th, tw) - 1) // 2))

    outputs = [(t, predictor(image[t.slices])) for t in grid]
    return stitch(outputs, weights, w, h)
