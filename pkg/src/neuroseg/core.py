"""Raster conventions and primitives shared by the other modules.

Rasters are plain numpy arrays indexed ``[y, x]`` (row-major, origin at the
top-left corner, x to the right, y downward):

* binary masks are ``bool`` arrays of shape ``(H, W)``;
* label maps are integer arrays of shape ``(H, W)`` where 0 is background;
* probability maps are ``float32`` arrays of shape ``(H, W, 3)`` holding the
  background, contour and neuron probabilities in that channel order.

Points are always given as ``(x, y)`` pairs.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import ndimage as ndi

LABEL_DTYPE = np.int32


class Connectivity(enum.Enum):
    FOUR = "four"
    EIGHT = "eight"

    @classmethod
    def parse(cls, value) -> "Connectivity":
        if isinstance(value, cls):
            return value
        if value in (4, "4"):
            return cls.FOUR
        if value in (8, "8"):
            return cls.EIGHT
        return cls(str(value).lower())

    @property
    def structure(self) -> np.ndarray:
        """3x3 neighbourhood array understood by ``scipy.ndimage``."""
        if self is Connectivity.FOUR:
            return ndi.generate_binary_structure(2, 1)
        return ndi.generate_binary_structure(2, 2)

    @property
    def offsets(self) -> tuple[tuple[int, int], ...]:
        """Neighbour offsets as ``(dy, dx)``, in raster order."""
        st = self.structure
        return tuple(
            (dy - 1, dx - 1)
            for dy in range(3)
            for dx in range(3)
            if st[dy, dx] and (dy, dx) != (1, 1)
        )


DEFAULT_CONNECTIVITY = Connectivity.EIGHT


class PixelClass(enum.IntEnum):
    """Semantic pixel classes; the value doubles as the probability channel."""

    BACKGROUND = 0  # "tissue" in ground-truth masks
    CONTOUR = 1
    NEURON = 2


@dataclass(frozen=True)
class StructuringElement:
    """A discrete disk: every integer offset with ``dx**2 + dy**2 <= radius**2``."""

    radius: int
    offsets: tuple[tuple[int, int], ...] = field(repr=False)

    @cached_property
    def footprint(self) -> np.ndarray:
        r = self.radius
        fp = np.zeros((2 * r + 1, 2 * r + 1), dtype=bool)
        for dx, dy in self.offsets:
            fp[dy + r, dx + r] = True
        return fp

    def __len__(self) -> int:
        return len(self.offsets)


def disk_structuring_element(radius: int) -> StructuringElement:
    radius = int(radius)
    if radius < 0:
        raise ValueError(f"radius must be >= 0, got {radius}")
    r2 = radius * radius
    offsets = tuple(
        (dx, dy)
        for dy in range(-radius, radius + 1)
        for dx in range(-radius, radius + 1)
        if dx * dx + dy * dy <= r2
    )
    return StructuringElement(radius, offsets)


def as_mask(mask) -> np.ndarray:
    mask = np.asarray(mask)
    if mask.ndim != 2:
        raise ValueError(f"expected a 2-D raster, got shape {mask.shape}")
    return mask.astype(bool, copy=False)


def relabel_raster_order(labels: np.ndarray) -> np.ndarray:
    """Renumber labels 1..n by the raster position of each label's first pixel."""
    flat = labels.ravel()
    ids, first = np.unique(flat, return_index=True)
    keep = ids != 0
    ids, first = ids[keep], first[keep]
    if ids.size == 0:
        return np.zeros(labels.shape, dtype=LABEL_DTYPE)
    ordered = ids[np.argsort(first, kind="stable")]
    lut = np.zeros(int(ids.max()) + 1, dtype=LABEL_DTYPE)
    lut[ordered] = np.arange(1, ordered.size + 1, dtype=LABEL_DTYPE)
    return lut[labels]


def connected_components(mask, conn=DEFAULT_CONNECTIVITY) -> np.ndarray:
    """Label the connected foreground regions of ``mask``.

    Labels are 1..n, numbered in raster-scan order of each region's first
    pixel, so the output is fully determined by the input.
    """
    mask = as_mask(mask)
    conn = Connectivity.parse(conn)
    labels, n = ndi.label(mask, structure=conn.structure)
    if n == 0:
        return labels.astype(LABEL_DTYPE, copy=False)
    return relabel_raster_order(labels)


def component_sizes(labels) -> dict[int, int]:
    """Pixel count of every nonzero label."""
    labels = np.asarray(labels)
    ids, counts = np.unique(labels[labels != 0], return_counts=True)
    return {int(i): int(c) for i, c in zip(ids, counts)}
