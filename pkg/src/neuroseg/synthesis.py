"""Pixel-level three-class masks from point annotations and a binary mask."""

from __future__ import annotations

import warnings

import numpy as np
from scipy import ndimage as ndi

from .core import DEFAULT_CONNECTIVITY, LABEL_DTYPE, Connectivity, PixelClass, as_mask
from .errors import SeedOnBackground

_BIG = np.iinfo(LABEL_DTYPE).max


def region_growing(binary, seeds, conn=DEFAULT_CONNECTIVITY) -> np.ndarray:
    """Competitive breadth-first growth from ``seeds`` inside ``binary``.

    Seed ``i`` (an ``(x, y)`` pair) gets label ``i + 1``. All fronts advance
    one pixel per step; a pixel reached by several fronts in the same step
    takes the lowest label. Foreground components without a seed stay 0.
    Seeds on background are skipped with a :class:`SeedOnBackground` warning.
    """
    binary = as_mask(binary)
    conn = Connectivity.parse(conn)
    labels = np.zeros(binary.shape, dtype=LABEL_DTYPE)
    for i, (x, y) in enumerate(seeds):
        if not binary[y, x]:
            warnings.warn(SeedOnBackground(int(x), int(y)), stacklevel=2)
            continue
        labels[y, x] = i + 1

    footprint = conn.structure
    # unlabelled pixels carry a sentinel that never wins the minimum
    while True:
        free = binary & (labels == 0)
        keyed = np.where(labels > 0, labels, _BIG)
        nearest = ndi.minimum_filter(keyed, footprint=footprint, mode="constant", cval=_BIG)
        claim = free & (nearest < _BIG)
        if not claim.any():
            break
        labels[claim] = nearest[claim]
    return labels


def contour_class(labels, thickness: int = 4) -> np.ndarray:
    """Three-class mask with a contour band between touching instances.

    A labelled pixel becomes contour when a pixel of another label lies
    within Chebyshev distance ``thickness // 2``; other labelled pixels are
    neuron and unlabelled pixels are background (tissue).
    """
    if thickness < 2 or thickness % 2:
        raise ValueError("thickness must be an even number >= 2")
    labels = np.asarray(labels)
    size = thickness + 1
    fg = labels > 0
    hi = ndi.maximum_filter(labels, size=size, mode="constant", cval=0)
    lo = ndi.minimum_filter(np.where(fg, labels, _BIG), size=size, mode="constant", cval=_BIG)
    band = fg & ((hi != labels) | (lo != labels))
    out = np.full(labels.shape, PixelClass.BACKGROUND, dtype=np.uint8)
    out[fg] = PixelClass.NEURON
    out[band] = PixelClass.CONTOUR
    return out


def synthesize(binary, seeds, thickness: int = 4, conn=DEFAULT_CONNECTIVITY):
    """Return ``(instance labels, three-class mask)``."""
    labels = region_growing(binary, seeds, conn)
    return labels, contour_class(labels, thickness)
