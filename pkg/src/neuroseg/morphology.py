"""Binary morphology kernels: erosion, dilation, ultimate erosion, residue
reconstruction, distance transform, peak detection and seeded watershed."""

from __future__ import annotations

import heapq
from dataclasses import dataclass

import numpy as np
from scipy import ndimage as ndi

from .core import (
    DEFAULT_CONNECTIVITY,
    LABEL_DTYPE,
    Connectivity,
    StructuringElement,
    as_mask,
    connected_components,
)
from .errors import MarkerOutsideMask


def _squared_edt(features: np.ndarray) -> np.ndarray:
    """Exact squared distance from every pixel to the nearest False pixel.

    ``scipy.ndimage.distance_transform_edt`` is exact; squaring and rounding
    recovers the integer squared distance without float ambiguity.
    """
    d = ndi.distance_transform_edt(features)
    return np.rint(d * d).astype(np.int64)


def erode(mask, se: StructuringElement) -> np.ndarray:
    """Binary erosion by a disk; pixels outside the image count as background.

    A pixel survives iff every pixel within ``se.radius`` is foreground, i.e.
    its nearest background pixel is strictly farther than the radius.
    """
    mask = as_mask(mask)
    if se.radius == 0 or not mask.any():
        return mask.copy()
    padded = np.pad(mask, 1, constant_values=False)
    d2 = _squared_edt(padded)[1:-1, 1:-1]
    return d2 > se.radius * se.radius


def dilate(mask, se: StructuringElement) -> np.ndarray:
    """Binary dilation by a disk."""
    mask = as_mask(mask)
    if se.radius == 0 or not mask.any():
        return mask.copy()
    d2 = _squared_edt(~mask)
    return d2 <= se.radius * se.radius


def distance_transform(mask) -> np.ndarray:
    """Exact Euclidean distance from each foreground pixel to the nearest
    background pixel, with the image border counted as background."""
    mask = as_mask(mask)
    if not mask.any():
        return np.zeros(mask.shape, dtype=np.float64)
    padded = np.pad(mask, 1, constant_values=False)
    return ndi.distance_transform_edt(padded)[1:-1, 1:-1]


@dataclass(frozen=True)
class UltimateResidue:
    """Last non-empty stage of one erosion lineage.

    ``coords`` holds ``(row, col)`` pairs. ``erosion_count`` is the number
    of erosions that were applied to reach this stage, which is also the
    number of dilations that restores the object's original scale.
    """

    label: int
    erosion_count: int
    coords: np.ndarray

    @property
    def points(self) -> set[tuple[int, int]]:
        return {(int(c), int(r)) for r, c in self.coords}

    def __len__(self) -> int:
        return len(self.coords)


def ultimate_erosion(mask, se: StructuringElement, conn=DEFAULT_CONNECTIVITY) -> list[UltimateResidue]:
    """Erode repeatedly and collect the ultimate residues of every lineage.

    A component at depth ``t`` whose pixels contain no foreground after the
    next erosion is a residue with ``erosion_count == t``. When a component
    splits, each child continues on its own. Residues are labelled 1..n in
    raster order of their first pixel.
    """
    if se.radius < 1:
        raise ValueError("ultimate erosion needs a structuring element of radius >= 1")
    current = as_mask(mask)
    found: list[tuple[int, int, np.ndarray]] = []
    depth = 0
    labels = connected_components(current, conn)
    while labels.max() > 0:
        nxt = erode(current, se)
        n = int(labels.max())
        has_child = np.zeros(n + 1, dtype=bool)
        has_child[np.unique(labels[nxt])] = True
        for lab, sl in enumerate(ndi.find_objects(labels), start=1):
            if sl is None or has_child[lab]:
                continue
            rows, cols = np.nonzero(labels[sl] == lab)
            rows = rows + sl[0].start
            cols = cols + sl[1].start
            first = int(rows[0]) * current.shape[1] + int(cols[0])
            found.append((first, depth, np.stack([rows, cols], axis=1)))
        current = nxt
        labels = connected_components(current, conn)
        depth += 1
    found.sort(key=lambda item: item[0])
    return [UltimateResidue(i, d, coords) for i, (_, d, coords) in enumerate(found, start=1)]


def residue_label_map(residues, shape) -> np.ndarray:
    out = np.zeros(shape, dtype=LABEL_DTYPE)
    for res in residues:
        out[res.coords[:, 0], res.coords[:, 1]] = res.label
    return out


def _sorted_offsets(se: StructuringElement):
    """Non-zero disk offsets as ``(d2, dy, dx)``, nearest first."""
    return sorted((dx * dx + dy * dy, dy, dx) for dx, dy in se.offsets if (dx, dy) != (0, 0))


def grow_labels(labels, steps, se: StructuringElement, within=None) -> np.ndarray:
    """Competitive step-wise dilation of every label in ``labels``.

    ``steps[k]`` is how many dilation steps label ``k`` takes (an array
    indexed by label id). At each step every still-growing region claims the
    unlabelled pixels within ``se.radius`` of it; a pixel reachable by several
    regions goes to the nearest one, and equal distances go to the lower
    label. Claimed pixels are never reassigned. ``within`` optionally limits
    the pixels that can be claimed.
    """
    out = np.array(labels, dtype=LABEL_DTYPE, copy=True)
    steps = np.asarray(steps)
    if out.max() <= 0 or steps.size == 0 or steps.max() <= 0 or se.radius == 0:
        return out
    r = se.radius
    h, w = out.shape
    offsets = _sorted_offsets(se)
    allowed = np.ones(out.shape, dtype=bool) if within is None else as_mask(within)
    for step in range(1, int(steps.max()) + 1):
        active = steps >= step
        active[0] = False
        src = np.where(active[out], out, 0)
        nz_rows = np.flatnonzero(src.any(axis=1))
        if nz_rows.size == 0:
            break
        nz_cols = np.flatnonzero(src.any(axis=0))
        y0, y1 = max(nz_rows[0] - r, 0), min(nz_rows[-1] + r + 1, h)
        x0, x1 = max(nz_cols[0] - r, 0), min(nz_cols[-1] + r + 1, w)
        sub_out = out[y0:y1, x0:x1]
        padded = np.pad(src[y0:y1, x0:x1], r)
        sh, sw = sub_out.shape
        free = (sub_out == 0) & allowed[y0:y1, x0:x1]
        best_d = np.zeros((sh, sw), dtype=np.int64)
        best_l = np.zeros((sh, sw), dtype=LABEL_DTYPE)
        for d2, dy, dx in offsets:
            shifted = padded[r - dy:r - dy + sh, r - dx:r - dx + sw]
            hit = free & (shifted > 0) & ((best_l == 0) | ((best_d == d2) & (shifted < best_l)))
            best_l[hit] = shifted[hit]
            best_d[hit] = d2
        claimed = best_l > 0
        sub_out[claimed] = best_l[claimed]
    return out


def dynamic_reconstruction(residues, se: StructuringElement, shape) -> np.ndarray:
    """Re-dilate each residue as many times as it was eroded.

    Residues expand simultaneously, one dilation step at a time, using the
    collision rule of :func:`grow_labels`.
    """
    seeds = residue_label_map(residues, shape)
    if not residues:
        return seeds
    steps = np.zeros(max(r.label for r in residues) + 1, dtype=np.int64)
    for res in residues:
        steps[res.label] = res.erosion_count
    return grow_labels(seeds, steps, se)


def local_maxima(dm, min_distance: int) -> list[tuple[int, int]]:
    """Peaks of a distance map, returned as ``(x, y)`` in raster order.

    A candidate is a positive pixel that is >= every value within
    ``min_distance`` (Euclidean). Candidates are then accepted greedily by
    decreasing value (ties in raster order), dropping any closer than
    ``min_distance`` to an already accepted peak.
    """
    if min_distance < 1:
        raise ValueError("min_distance must be >= 1")
    dm = np.asarray(dm, dtype=np.float64)
    h, w = dm.shape
    md = int(min_distance)
    # cheap 3x3 screen first; radius 1 only reaches the 4-neighbours
    near = ndi.generate_binary_structure(2, 2 if md >= 2 else 1)
    prefilter = (dm > 0) & (dm == ndi.maximum_filter(dm, footprint=near, mode="constant", cval=0.0))
    ys, xs = np.nonzero(prefilter)
    if ys.size == 0:
        return []
    padded = np.pad(dm, md, constant_values=-np.inf)
    vals = dm[ys, xs]
    ok = np.ones(ys.size, dtype=bool)
    for dy in range(-md, md + 1):
        for dx in range(-md, md + 1):
            if dx * dx + dy * dy <= md * md and (dx, dy) != (0, 0):
                ok &= padded[ys + md + dy, xs + md + dx] <= vals
    ys, xs, vals = ys[ok], xs[ok], vals[ok]
    order = np.lexsort((ys * w + xs, -vals))
    accepted: list[tuple[int, int]] = []
    acc = np.empty((0, 2), dtype=np.int64)
    for i in order:
        p = np.array([ys[i], xs[i]])
        if acc.size and (((acc - p) ** 2).sum(axis=1) < md * md).any():
            continue
        acc = np.vstack([acc, p])
        accepted.append((int(xs[i]), int(ys[i])))
    return sorted(accepted, key=lambda q: (q[1], q[0]))


def seeded_watershed(topo, markers, mask, conn=DEFAULT_CONNECTIVITY) -> np.ndarray:
    """Marker-controlled watershed by priority flooding.

    Pixels are flooded in increasing ``topo`` order, FIFO among equal
    elevations. A pixel takes the label of the first basin that reaches it;
    markers are queued by (label, raster position) so simultaneous arrivals
    favour the lower label. Mask pixels unreachable from any marker stay 0.
    """
    mask = as_mask(mask)
    markers = np.asarray(markers)
    topo = np.asarray(topo, dtype=np.float64)
    if not (mask.shape == markers.shape == topo.shape):
        raise ValueError("topography, markers and mask must share one shape")
    if not np.isfinite(topo[mask]).all():
        raise ValueError("topography must be finite inside the mask")
    outside = (markers > 0) & ~mask
    if outside.any():
        y, x = np.argwhere(outside)[0]
        raise MarkerOutsideMask(int(x), int(y))

    h, w = mask.shape
    pw = w + 2
    lab = np.pad(np.where(mask, markers, 0).astype(np.int64), 1).ravel().tolist()
    inside = np.pad(mask, 1).ravel().tolist()
    elev = np.pad(topo, 1).ravel().tolist()
    nbrs = [dy * pw + dx for dy, dx in Connectivity.parse(conn).offsets]

    ys, xs = np.nonzero(markers > 0)
    seed_labels = markers[ys, xs]
    order = np.lexsort((ys * w + xs, seed_labels))
    heap = []
    seq = 0
    for i in order:
        p = (int(ys[i]) + 1) * pw + int(xs[i]) + 1
        heap.append((elev[p], seq, p))
        seq += 1
    heapq.heapify(heap)
    push, pop = heapq.heappush, heapq.heappop
    while heap:
        _, _, p = pop(heap)
        current = lab[p]
        for d in nbrs:
            q = p + d
            if inside[q] and not lab[q]:
                lab[q] = current
                push(heap, (elev[q], seq, q))
                seq += 1
    out = np.array(lab, dtype=LABEL_DTYPE).reshape(h + 2, pw)
    return out[1:-1, 1:-1].copy()
