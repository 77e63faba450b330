"""Post-processing pipelines turning a 3-channel probability map into instances.

``run_proposed`` is the ultimate-erosion scheme; ``run_baseline``,
``run_distance_ws`` and ``run_contour_strip`` are the comparators.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage as ndi

from .core import (
    DEFAULT_CONNECTIVITY,
    LABEL_DTYPE,
    Connectivity,
    PixelClass,
    connected_components,
    disk_structuring_element,
)
from .morphology import (
    distance_transform,
    dynamic_reconstruction,
    grow_labels,
    local_maxima,
    residue_label_map,
    seeded_watershed,
    ultimate_erosion,
)

SUM_TOLERANCE = 0.02
# pixels whose channel sum is within this of 1 are left untouched so that
# renormalising an already-normalised map is a bitwise no-op
RENORM_SLACK = 1e-6


@dataclass(frozen=True)
class PipelineConfig:
    se_radius: int = 10
    ws_threshold: float = 0.5
    min_distance: int = 20
    connectivity: Connectivity = DEFAULT_CONNECTIVITY
    min_area: int = 20

    def __post_init__(self):
        object.__setattr__(self, "connectivity", Connectivity.parse(self.connectivity))
        if self.se_radius < 1:
            raise ValueError("se_radius must be >= 1")
        if not 0 < self.ws_threshold < 1:
            raise ValueError("ws_threshold must lie strictly between 0 and 1")
        if self.min_distance < 1:
            raise ValueError("min_distance must be >= 1")
        if self.min_area < 0:
            raise ValueError("min_area must be >= 0")


def normalize_probabilities(pm) -> np.ndarray:
    """Rescale each pixel's channels to sum to 1 (float32 result).

    Idempotent: pixels already within ``RENORM_SLACK`` of 1 are kept as is.
    """
    pm = np.asarray(pm)
    out = pm.astype(np.float32, copy=True)
    total = pm.astype(np.float64).sum(axis=-1)
    fix = np.abs(total - 1.0) > RENORM_SLACK
    if fix.any():
        scaled = pm[fix].astype(np.float64) / total[fix][:, None]
        out[fix] = scaled.astype(np.float32)
    return out


def check_probability_map(pm) -> np.ndarray:
    pm = np.asarray(pm)
    if pm.ndim != 3 or pm.shape[2] != 3:
        raise ValueError(f"probability map must have shape (H, W, 3), got {pm.shape}")
    if pm.shape[0] == 0 or pm.shape[1] == 0:
        raise ValueError("probability map is empty")
    if not np.isfinite(pm).all() or pm.min() < 0 or pm.max() > 1:
        raise ValueError("probabilities must lie in [0, 1]")
    total = pm.astype(np.float64).sum(axis=-1)
    worst = float(np.abs(total - 1.0).max())
    if worst > SUM_TOLERANCE:
        raise ValueError(f"channel sums deviate from 1 by up to {worst:.4f}")
    return pm


def argmax_class(pm) -> np.ndarray:
    """Per-pixel class; ties resolve to the earlier channel."""
    pm = check_probability_map(pm)
    return np.argmax(pm, axis=-1).astype(np.uint8)


def merged_mask(pm) -> np.ndarray:
    """Pixels whose most likely class is neuron or contour."""
    return argmax_class(pm) != PixelClass.BACKGROUND


def remove_small_objects(labels, min_area: int) -> np.ndarray:
    labels = np.asarray(labels)
    if min_area <= 0 or labels.max() <= 0:
        return labels
    counts = np.bincount(labels.ravel())
    small = counts < min_area
    small[0] = False
    if not small.any():
        return labels
    return np.where(small[labels], 0, labels).astype(LABEL_DTYPE)


def _anchor_markers(recon, seeds, mask, conn) -> np.ndarray:
    """Clip reconstructed regions to ``mask``, keeping for each label only
    the part connected to its seed, so every marker is one connected blob."""
    clipped = np.where(mask, recon, 0)
    out = np.zeros_like(clipped)
    for lab, sl in enumerate(ndi.find_objects(clipped), start=1):
        if sl is None:
            continue
        region = clipped[sl] == lab
        seed = (seeds[sl] == lab) & region
        grown = ndi.binary_propagation(seed, structure=conn.structure, mask=region)
        out[sl][grown] = lab
    return out


def run_proposed(pm, cfg: PipelineConfig = PipelineConfig()) -> np.ndarray:
    """Ultimate erosion + dynamic reconstruction + seeded watershed."""
    cls = argmax_class(pm)
    neuron = cls == PixelClass.NEURON
    merged = cls != PixelClass.BACKGROUND
    se = disk_structuring_element(cfg.se_radius)
    residues = ultimate_erosion(neuron, se, cfg.connectivity)
    if not residues:
        return np.zeros(neuron.shape, dtype=LABEL_DTYPE)
    recon = dynamic_reconstruction(residues, se, neuron.shape)
    seeds = residue_label_map(residues, neuron.shape)
    markers = _anchor_markers(recon, seeds, merged, cfg.connectivity)
    topo = -np.asarray(pm, dtype=np.float64)[..., PixelClass.NEURON]
    labels = seeded_watershed(topo, markers, merged, cfg.connectivity)
    return remove_small_objects(labels, cfg.min_area)


def run_baseline(pm, cfg: PipelineConfig = PipelineConfig()) -> np.ndarray:
    """Watershed on the thresholded neuron channel.

    Every connected component is its own basin, so the watershed reduces to
    component labelling.
    """
    pm = check_probability_map(pm)
    mask = pm[..., PixelClass.NEURON] >= cfg.ws_threshold
    labels = connected_components(mask, cfg.connectivity)
    return remove_small_objects(labels, cfg.min_area)


def run_distance_ws(pm, cfg: PipelineConfig = PipelineConfig()) -> np.ndarray:
    """Seeded watershed from distance-map peaks of the neuron class."""
    cls = argmax_class(pm)
    neuron = cls == PixelClass.NEURON
    merged = cls != PixelClass.BACKGROUND
    dist = distance_transform(neuron)
    peaks = local_maxima(dist, cfg.min_distance)
    markers = np.zeros(neuron.shape, dtype=LABEL_DTYPE)
    for i, (x, y) in enumerate(peaks, start=1):
        markers[y, x] = i
    labels = seeded_watershed(-dist, markers, merged, cfg.connectivity)
    return remove_small_objects(labels, cfg.min_area)


def run_contour_strip(pm, cfg: PipelineConfig = PipelineConfig()) -> np.ndarray:
    """Drop pixels that lean towards the contour class, then dilate back one
    structuring-element step inside the merged neuron/contour mask."""
    pm = check_probability_map(pm)
    neuron = pm[..., PixelClass.NEURON]
    core = (neuron > pm[..., PixelClass.CONTOUR]) & (neuron >= cfg.ws_threshold)
    labels = connected_components(core, cfg.connectivity)
    if labels.max() > 0:
        steps = np.ones(int(labels.max()) + 1, dtype=np.int64)
        se = disk_structuring_element(cfg.se_radius)
        labels = grow_labels(labels, steps, se, within=merged_mask(pm))
    return remove_small_objects(labels, cfg.min_area)


SCHEMES = {
    "proposed": run_proposed,
    "baseline": run_baseline,
    "distance": run_distance_ws,
    "contour-strip": run_contour_strip,
}


def run_scheme(name: str, pm, cfg: PipelineConfig = PipelineConfig()) -> np.ndarray:
    try:
        fn = SCHEMES[name]
    except KeyError:
        raise ValueError(f"unknown scheme {name!r}; choose from {', '.join(SCHEMES)}") from None
    return fn(pm, cfg)
