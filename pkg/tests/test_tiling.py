import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from neuroseg.errors import CoverageGap, PatchLargerThanImage
from neuroseg.tiling import Tile, plan_tiles, predict_tiled, stitch, weight_map


def stub_predictor(img):
    """Per-pixel map from an integer image to a normalised 3-channel map."""
    v = img.astype(np.float32)
    raw = np.stack([np.sin(v * 0.01) ** 2, np.cos(v * 0.013) ** 2, np.full_like(v, 0.5)], -1)
    return (raw / raw.sum(-1, keepdims=True)).astype(np.float32)


def test_tile_counts():
    assert len(plan_tiles(5000, 5000, 1344, 120)) == 16
    assert plan_tiles(5000, 5000).stride == 1224
    g = plan_tiles(1344, 1344)
    assert len(g) == 1 and g.tiles[0] == Tile(0, 0, 1344, 1344)
    g = plan_tiles(1400, 1344)
    assert [t.x0 for t in g] == [0, 56]


def test_patch_larger_than_image_shrinks():
    with pytest.warns(PatchLargerThanImage):
        g = plan_tiles(300, 200, 1344, 120)
    assert list(g) == [Tile(0, 0, 300, 200)]


def test_bad_plan_arguments():
    with pytest.raises(ValueError):
        plan_tiles(100, 100, 50, 50)
    with pytest.raises(ValueError):
        plan_tiles(0, 100, 50, 10)


@settings(max_examples=80, deadline=None)
@given(st.integers(1, 400), st.integers(1, 400), st.integers(2, 128), st.data())
def test_plan_covers_canvas(width, height, patch, data):
    overlap = data.draw(st.integers(0, patch - 1))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", PatchLargerThanImage)
        g = plan_tiles(width, height, patch, overlap)
    cover = np.zeros((height, width), int)
    for t in g:
        assert t.x0 >= 0 and t.y0 >= 0 and t.x0 + t.w <= width and t.y0 + t.h <= height
        cover[t.slices] += 1
    assert cover.min() >= 1
    stride = patch - overlap
    for length, starts in ((width, {t.x0 for t in g}), (height, {t.y0 for t in g})):
        expect = math.ceil((length - patch) / stride) + 1 if length >= patch else 1
        assert len(starts) == expect
    xs = sorted({t.x0 for t in g})
    for a, b in zip(xs, xs[1:]):
        assert a + g.tiles[0].w - b >= overlap


def test_weight_map_values():
    assert (weight_map(64, 0) == 1).all()
    w = weight_map(1344, 120)
    assert w[672, 672] == 1
    assert w[0, 0] == pytest.approx((1 / 121) ** 2)
    assert w[0, 0] == pytest.approx(6.8e-5, rel=0.01)
    assert w[120, 500] == 1 and w[119, 500] == pytest.approx(120 / 121)
    assert (w > 0).all() and (w <= 1).all()
    with pytest.raises(ValueError):
        weight_map(10, 5)


def test_stitch_single_tile_identity():
    pm = stub_predictor(np.arange(200).reshape(10, 20))
    out = stitch([(Tile(0, 0, 20, 10), pm)], weight_map((10, 20), 3), 20, 10)
    np.testing.assert_array_equal(out, pm)


def test_stitch_equal_overlap_values_unchanged():
    pm = stub_predictor(np.arange(300).reshape(10, 30))
    tiles = [(Tile(0, 0, 20, 10), pm[:, :20]), (Tile(10, 0, 20, 10), pm[:, 10:])]
    out = stitch(tiles, weight_map((10, 20), 4), 30, 10)
    np.testing.assert_array_equal(out, pm)


def test_stitch_convexity():
    rng = np.random.default_rng(0)
    a = rng.random((10, 20, 3))
    b = rng.random((10, 20, 3))
    a /= a.sum(-1, keepdims=True)
    b /= b.sum(-1, keepdims=True)
    out = stitch([(Tile(0, 0, 20, 10), a), (Tile(10, 0, 20, 10), b)], weight_map((10, 20), 4), 30, 10)
    lo = np.minimum(a[:, 10:], b[:, :10])
    hi = np.maximum(a[:, 10:], b[:, :10])
    ov = out[:, 10:20].astype(np.float64)
    assert (ov >= lo - 1e-6).all() and (ov <= hi + 1e-6).all()


def test_stitch_coverage_gap():
    pm = stub_predictor(np.zeros((10, 10)))
    with pytest.raises(CoverageGap) as exc:
        stitch([(Tile(0, 0, 10, 10), pm)], np.ones((10, 10)), 12, 10)
    assert exc.value.count == 20


def test_stitch_shape_check():
    with pytest.raises(ValueError):
        stitch([(Tile(0, 0, 10, 10), np.zeros((5, 5, 3)))], np.ones((10, 10)), 10, 10)


@pytest.mark.parametrize("size,patch,overlap", [((257, 389), 64, 10), ((100, 100), 40, 0), ((50, 200), 64, 12)])
def test_tiled_prediction_round_trip(size, patch, overlap):
    img = np.random.default_rng(1).integers(0, 4096, size)
    np.testing.assert_array_equal(predict_tiled(img, stub_predictor, patch, overlap), stub_predictor(img))
