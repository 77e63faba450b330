"""Synthetic cell scenes standing in for network predictions.

A scene is a ground-truth instance map of disk-shaped cells, their centres,
the matching three-class mask, and a probability map derived from that mask.
Touching cells get an inter-cell contour ridge; ``ridge_dropout`` breaks the
middle of some ridges to mimic a network that only partly separates cells.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage as ndi

from .core import LABEL_DTYPE, PixelClass
from .postprocess import normalize_probabilities
from .synthesis import _BIG, contour_class


@dataclass
class Scene:
    labels: np.ndarray
    centroids: list[tuple[int, int]]
    classes: np.ndarray
    probmap: np.ndarray


def disk(shape, center, radius) -> np.ndarray:
    """Closed disk ``(x-cx)**2 + (y-cy)**2 <= radius**2`` on a ``(H, W)`` grid."""
    yy, xx = np.ogrid[: shape[0], : shape[1]]
    cx, cy = center
    return (xx - cx) ** 2 + (yy - cy) ** 2 <= radius * radius


def paint_cells(shape, centers, radii) -> np.ndarray:
    """Instance map of overlapping disks; a pixel inside several disks goes to
    the one minimising ``distance - radius`` (lower index on ties), which keeps
    every cell star-shaped around its centre."""
    yy, xx = np.mgrid[: shape[0], : shape[1]]
    best = np.full(shape, np.inf)
    labels = np.zeros(shape, dtype=LABEL_DTYPE)
    for i, ((cx, cy), r) in enumerate(zip(centers, radii), start=1):
        d = np.hypot(xx - cx, yy - cy)
        score = d - r
        take = (d <= r) & (score < best)
        best[take] = score[take]
        labels[take] = i
    return labels


def probability_from_classes(classes, blur: float = 1.0) -> np.ndarray:
    """One-hot encode a class raster and optionally Gaussian-smooth it."""
    onehot = np.stack([classes == c for c in PixelClass], axis=-1).astype(np.float64)
    if blur > 0:
        onehot = ndi.gaussian_filter(onehot, sigma=(blur, blur, 0), mode="nearest")
    return normalize_probabilities(np.clip(onehot, 0.0, 1.0))


def _ridge_pairs(labels, classes, thickness):
    """For each contour pixel, the (low, high) label pair it separates."""
    size = thickness + 1
    fg = labels > 0
    hi = ndi.maximum_filter(labels, size=size, mode="constant", cval=0)
    lo = ndi.minimum_filter(np.where(fg, labels, _BIG), size=size, mode="constant", cval=_BIG)
    other = np.where(hi != labels, hi, lo)
    band = classes == PixelClass.CONTOUR
    a = np.minimum(labels, other)[band]
    b = np.maximum(labels, other)[band]
    ys, xs = np.nonzero(band)
    return a, b, ys, xs


def break_ridges(labels, classes, rng, dropout: float, gap: float = 0.5, thickness: int = 4):
    """Turn the central part of randomly chosen contour ridges into neuron.

    ``gap`` is the fraction of each ridge's half-length that is removed on
    either side of its midpoint.
    """
    classes = classes.copy()
    if dropout <= 0 or not (classes == PixelClass.CONTOUR).any():
        return classes
    a, b, ys, xs = _ridge_pairs(labels, classes, thickness)
    pairs = sorted(set(zip(a.tolist(), b.tolist())))
    chosen = [p for p, u in zip(pairs, rng.random(len(pairs))) if u < dropout]
    for pa, pb in chosen:
        sel = (a == pa) & (b == pb)
        py, px = ys[sel], xs[sel]
        my, mx = py.mean(), px.mean()
        dist = np.hypot(py - my, px - mx)
        cut = dist <= gap * dist.max()
        classes[py[cut], px[cut]] = PixelClass.NEURON
    return classes


def touching_pair(radius: int = 18, distance: int = 26, thickness: int = 4, gap=None,
                  blur: float = 0.0, margin: int = 6) -> Scene:
    """Two equal disks side by side with a contour ridge between them.

    ``gap`` (pixels) opens the ridge within that distance of its midpoint;
    ``None`` keeps the ridge complete.
    """
    h = 2 * radius + 2 * margin + 1
    w = distance + 2 * radius + 2 * margin + 1
    cy = h // 2
    c1 = (margin + radius, cy)
    c2 = (margin + radius + distance, cy)
    labels = paint_cells((h, w), [c1, c2], [radius, radius])
    classes = contour_class(labels, thickness)
    if gap is not None:
        ys, xs = np.nonzero(classes == PixelClass.CONTOUR)
        if ys.size:
            my, mx = ys.mean(), xs.mean()
            cut = np.hypot(ys - my, xs - mx) <= gap
            classes[ys[cut], xs[cut]] = PixelClass.NEURON
    return Scene(labels, [c1, c2], classes, probability_from_classes(classes, blur))


def generate_scene(rng, width=256, height=256, n_cells=40, radius_range=(12, 18),
                   layout="dense", thickness=4, ridge_dropout=0.5, blur=1.0,
                   max_attempts=20000) -> Scene:
    """Random scene of up to ``n_cells`` disk cells.

    ``layout="sparse"`` keeps cells apart (at least 3 px between disks);
    ``layout="dense"`` lets neighbours overlap down to 0.75 of the summed
    radii, producing touching clusters.
    """
    if layout not in ("sparse", "dense"):
        raise ValueError("layout must be 'sparse' or 'dense'")
    rmin, rmax = radius_range
    centers: list[tuple[int, int]] = []
    radii: list[int] = []
    for _ in range(max_attempts):
        if len(centers) >= n_cells:
            break
        r = int(rng.integers(rmin, rmax + 1))
        cx = int(rng.integers(r + 1, width - r - 1))
        cy = int(rng.integers(r + 1, height - r - 1))
        ok = True
        for (ox, oy), orr in zip(centers, radii):
            d = np.hypot(cx - ox, cy - oy)
            limit = orr + r + 3 if layout == "sparse" else 0.75 * (orr + r)
            if d < limit:
                ok = False
                break
        if ok:
            centers.append((cx, cy))
            radii.append(r)
    labels = paint_cells((height, width), centers, radii)
    classes = contour_class(labels, thickness)
    classes = break_ridges(labels, classes, rng, ridge_dropout, thickness=thickness)
    return Scene(labels, centers, classes, probability_from_classes(classes, blur))
