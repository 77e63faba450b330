"""File formats: PNG rasters, point lists and the batch manifest."""

from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .core import LABEL_DTYPE, PixelClass
from .errors import (
    BadFormat,
    DuplicatePoint,
    LabelOverflow,
    NotThreeChannel,
    OutOfBounds,
    ParseError,
    UnknownColor,
)
from .postprocess import SUM_TOLERANCE, normalize_probabilities

CLASS_COLORS = {
    PixelClass.BACKGROUND: (0, 0, 0),
    PixelClass.NEURON: (0, 0, 255),
    PixelClass.CONTOUR: (0, 255, 0),
}
MAX_LABEL = 65535


def _open(path) -> Image.Image:
    try:
        img = Image.open(path)
        img.load()
    except FileNotFoundError:
        raise
    except Exception as exc:  # Pillow raises a zoo of types for corrupt files
        raise BadFormat(f"{path}: cannot decode image ({exc})") from exc
    if img.format != "PNG":
        raise BadFormat(f"{path}: expected PNG, got {img.format}")
    return img


def _save(array: np.ndarray, path):
    """uint8 (H, W) -> L, uint8 (H, W, 3) -> RGB, uint16 (H, W) -> I;16."""
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    img = Image.fromarray(np.ascontiguousarray(array))
    # fixed settings keep the encoded bytes reproducible
    img.save(path, format="PNG", optimize=False, compress_level=6)


# --- probability maps ------------------------------------------------------

def read_probability_map(path) -> np.ndarray:
    """8-bit RGB PNG -> (H, W, 3) float32 map with R/G/B = background/contour/neuron."""
    img = _open(path)
    if img.mode != "RGB":
        raise NotThreeChannel(f"{path}: expected an 8-bit RGB image, got mode {img.mode}")
    pm = np.asarray(img, dtype=np.float64) / 255.0
    total = pm.sum(axis=-1)
    worst = float(np.abs(total - 1.0).max())
    if worst > SUM_TOLERANCE:
        raise BadFormat(f"{path}: channel sums deviate from 1 by up to {worst:.4f}")
    return normalize_probabilities(pm)


def write_probability_map(pm, path):
    pm = np.asarray(pm, dtype=np.float64)
    if pm.ndim != 3 or pm.shape[2] != 3:
        raise ValueError("probability map must have shape (H, W, 3)")
    _save(np.clip(np.rint(pm * 255.0), 0, 255).astype(np.uint8), path)


# --- label maps ------------------------------------------------------------

def write_label_map(labels, path):
    labels = np.asarray(labels)
    if labels.size and (labels.min() < 0 or labels.max() > MAX_LABEL):
        raise LabelOverflow(f"labels must lie in [0, {MAX_LABEL}], got [{labels.min()}, {labels.max()}]")
    _save(labels.astype(np.uint16), path)


def read_label_map(path) -> np.ndarray:
    img = _open(path)
    if img.mode not in ("I;16", "I", "L"):
        raise BadFormat(f"{path}: expected a single-channel label image, got mode {img.mode}")
    return np.asarray(img).astype(LABEL_DTYPE)


# --- masks -----------------------------------------------------------------

def write_mask(mask, path):
    _save(np.where(np.asarray(mask, dtype=bool), 255, 0).astype(np.uint8), path)


def read_mask(path) -> np.ndarray:
    img = _open(path)
    if img.mode == "1":
        return np.asarray(img, dtype=bool)
    if img.mode != "L":
        raise BadFormat(f"{path}: expected an 8-bit grayscale mask, got mode {img.mode}")
    arr = np.asarray(img)
    if not np.isin(arr, (0, 255)).all():
        raise BadFormat(f"{path}: binary mask must contain only 0 and 255")
    return arr == 255


def write_class_mask(classes, path):
    classes = np.asarray(classes)
    rgb = np.zeros(classes.shape + (3,), dtype=np.uint8)
    for cls, color in CLASS_COLORS.items():
        rgb[classes == cls] = color
    _save(rgb, path)


def read_class_mask(path) -> np.ndarray:
    img = _open(path)
    if img.mode != "RGB":
        raise NotThreeChannel(f"{path}: expected an RGB class mask, got mode {img.mode}")
    rgb = np.asarray(img)
    out = np.zeros(rgb.shape[:2], dtype=np.uint8)
    known = np.zeros(rgb.shape[:2], dtype=bool)
    for cls, color in CLASS_COLORS.items():
        hit = (rgb == color).all(axis=-1)
        out[hit] = cls
        known |= hit
    if not known.all():
        y, x = np.argwhere(~known)[0]
        raise UnknownColor((int(x), int(y)), rgb[y, x].tolist())
    return out


# --- points ----------------------------------------------------------------

def read_points(path, shape=None) -> list[tuple[int, int]]:
    """Read ``x,y`` lines; ``#`` starts a comment. ``shape`` is ``(H, W)``."""
    points: list[tuple[int, int]] = []
    seen: set[tuple[int, int]] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = [p.strip() for p in line.split(",")]
            try:
                if len(parts) != 2:
                    raise ValueError
                x, y = int(parts[0]), int(parts[1])
            except ValueError:
                raise ParseError(lineno, f"expected 'x,y' integers, got {raw.strip()!r}") from None
            if shape is not None:
                h, w = shape
                if not (0 <= x < w and 0 <= y < h):
                    raise OutOfBounds(lineno, f"point ({x}, {y}) outside {w}x{h} image")
            if (x, y) in seen:
                raise DuplicatePoint(lineno, f"point ({x}, {y}) repeated")
            seen.add((x, y))
            points.append((x, y))
    return points


def write_points(points, path):
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for x, y in points:
            fh.write(f"{int(x)},{int(y)}\n")


# --- manifest --------------------------------------------------------------

@dataclass(frozen=True)
class ManifestEntry:
    image_id: str
    probmap: Path
    centroids: Path | None = None
    ground_truth: Path | None = None


def read_manifest(path) -> list[ManifestEntry]:
    """Tab-separated ``id  probmap  [centroids]  [ground-truth]`` lines.

    Relative paths resolve against the manifest's directory; ``-`` or an
    empty field marks an absent optional path.
    """
    base = Path(path).parent
    entries: list[ManifestEntry] = []
    ids: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            fields = line.split("\t")
            if len(fields) < 2 or len(fields) > 4:
                raise ParseError(lineno, "expected 2 to 4 tab-separated fields")
            image_id = fields[0].strip()
            if image_id in ids:
                raise ParseError(lineno, f"duplicate image id {image_id!r}")
            ids.add(image_id)
            paths = []
            for f in fields[1:] + [""] * (4 - len(fields)):
                f = f.strip()
                if f in ("", "-"):
                    paths.append(None)
                    continue
                p = Path(f) if os.path.isabs(f) else base / f
                if not p.exists():
                    raise ParseError(lineno, f"path does not exist: {p}")
                paths.append(p)
            if paths[0] is None:
                raise ParseError(lineno, "probability map path is required")
            entries.append(ManifestEntry(image_id, *paths))
    return entries


def write_manifest(entries, path):
    base = Path(path).parent

    def rel(p):
        if p is None:
            return "-"
        try:
            return Path(p).relative_to(base).as_posix()
        except ValueError:
            return str(p)

    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("# id\tprobmap\tcentroids\tground_truth\n")
        for e in entries:
            fh.write("\t".join([e.image_id, rel(e.probmap), rel(e.centroids), rel(e.ground_truth)]) + "\n")
