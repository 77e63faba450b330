"""Instance segmentation of cells from 3-class probability maps by
mathematical morphology, with point-annotation mask synthesis and metrics."""

from .core import (
    Connectivity,
    PixelClass,
    StructuringElement,
    component_sizes,
    connected_components,
    disk_structuring_element,
)
from .metrics import (
    DetectionCounts,
    LossWeights,
    aji,
    compound_loss,
    cross_entropy,
    dice,
    f1_seg,
    match_detections,
    precision_recall_f1,
    rce,
    soft_dice,
)
from .morphology import (
    UltimateResidue,
    dilate,
    distance_transform,
    dynamic_reconstruction,
    erode,
    local_maxima,
    seeded_watershed,
    ultimate_erosion,
)
from .postprocess import (
    PipelineConfig,
    argmax_class,
    merged_mask,
    run_baseline,
    run_contour_strip,
    run_distance_ws,
    run_proposed,
    run_scheme,
)
from .synthesis import contour_class, region_growing, synthesize
from .tiling import TileGrid, plan_tiles, stitch, weight_map

__version__ = "0.1.0"
