import csv
import subprocess
import sys

import numpy as np
import pytest

from neuroseg import io
from neuroseg.cli import main
from neuroseg.core import PixelClass
from neuroseg.scenes import disk, generate_scene, probability_from_classes, touching_pair


def read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def n_labels(path):
    lab = io.read_label_map(path)
    return len(np.unique(lab[lab > 0]))


@pytest.fixture
def merged_pair_png(tmp_path):
    """Two overlapping disks painted as one neuron blob with no contour valley."""
    d = disk((50, 90), (27, 25), 18) | disk((50, 90), (57, 25), 18)
    pm = probability_from_classes(np.where(d, PixelClass.NEURON, 0).astype(np.uint8), blur=0)
    path = tmp_path / "pair.png"
    io.write_probability_map(pm, path)
    return path


@pytest.fixture
def annotated_blob(tmp_path):
    yy, xx = np.mgrid[:40, :60]
    blob = ((xx - 20) ** 2 + (yy - 20) ** 2 <= 144) | ((xx - 38) ** 2 + (yy - 20) ** 2 <= 144)
    io.write_mask(blob, tmp_path / "blob.png")
    (tmp_path / "blob.txt").write_text("20,20\n38,20\n")
    return tmp_path / "blob.png", tmp_path / "blob.txt"


# --- synthesize ------------------------------------------------------------

def test_synthesize_writes_two_files(tmp_path, annotated_blob):
    binary, pts = annotated_blob
    assert main(["synthesize", str(binary), str(pts), str(tmp_path / "out")]) == 0
    lab = io.read_label_map(tmp_path / "out" / "blob_labels.png")
    cls = io.read_class_mask(tmp_path / "out" / "blob_mask.png")
    assert lab.max() == 2
    assert (cls == PixelClass.CONTOUR).any()


def test_synthesize_seed_on_background_warns(tmp_path, annotated_blob, caplog):
    binary, pts = annotated_blob
    pts.write_text("20,20\n0,0\n")
    assert main(["synthesize", str(binary), str(pts), str(tmp_path / "out")]) == 2
    assert "(0, 0)" in caplog.text
    assert (tmp_path / "out" / "blob_labels.png").exists()


def test_synthesize_missing_file(tmp_path, annotated_blob):
    binary, _ = annotated_blob
    assert main(["synthesize", str(binary), str(tmp_path / "nope.txt"), str(tmp_path)]) == 1


# --- postprocess -----------------------------------------------------------

def test_postprocess_touching_disks(tmp_path, merged_pair_png, capsys):
    assert main(["postprocess", str(merged_pair_png), "-o", str(tmp_path / "p.png")]) == 0
    assert n_labels(tmp_path / "p.png") == 2
    assert main(["postprocess", str(merged_pair_png), "-o", str(tmp_path / "b.png"), "--scheme", "baseline"]) == 0
    assert n_labels(tmp_path / "b.png") == 1
    out = capsys.readouterr().out.splitlines()
    assert [line.split("\t")[0] for line in out] == ["proposed", "baseline"]


def test_postprocess_ridge_fixture(tmp_path):
    io.write_probability_map(touching_pair(18, 26).probmap, tmp_path / "t.png")
    assert main(["postprocess", str(tmp_path / "t.png"), "-o", str(tmp_path / "o.png")]) == 0
    assert n_labels(tmp_path / "o.png") == 2


def test_postprocess_unknown_scheme(tmp_path, merged_pair_png, capsys):
    with pytest.raises(SystemExit) as exc:
        main(["postprocess", str(merged_pair_png), "-o", str(tmp_path / "p.png"), "--scheme", "magic"])
    assert exc.value.code == 1
    assert "usage" in capsys.readouterr().err


def test_postprocess_bad_input(tmp_path):
    (tmp_path / "x.png").write_bytes(b"garbage")
    assert main(["postprocess", str(tmp_path / "x.png"), "-o", str(tmp_path / "p.png")]) == 1
    assert main(["postprocess", "-o", str(tmp_path / "p.png")]) == 1


def test_postprocess_tile_directory_matches_whole_image(tmp_path):
    sc = generate_scene(np.random.default_rng(4), 300, 260, n_cells=30)
    io.write_probability_map(sc.probmap, tmp_path / "whole.png")
    tiles = tmp_path / "tiles"
    assert main(["tile-plan", "--split", str(tmp_path / "whole.png"), "--out-dir", str(tiles),
                 "--patch-size", "128", "--overlap", "16"]) == 0
    assert main(["postprocess", str(tiles), "-o", str(tmp_path / "a.png")]) == 0
    assert main(["postprocess", str(tmp_path / "whole.png"), "-o", str(tmp_path / "b.png")]) == 0
    np.testing.assert_array_equal(io.read_label_map(tmp_path / "a.png"), io.read_label_map(tmp_path / "b.png"))


# --- genfix / evaluate / compare --------------------------------------------

def genfix(out, *extra):
    assert main(["genfix", str(out), "--count", "3", "--width", "160", "--height", "160",
                 "--cells", "15", *extra]) == 0


def test_genfix_layout_and_determinism(tmp_path):
    genfix(tmp_path / "a", "--seed", "5")
    genfix(tmp_path / "b", "--seed", "5")
    files = sorted(p.relative_to(tmp_path / "a") for p in (tmp_path / "a").rglob("*") if p.is_file())
    assert len(files) == 13
    for rel in files:
        assert (tmp_path / "a" / rel).read_bytes() == (tmp_path / "b" / rel).read_bytes()
    entries = io.read_manifest(tmp_path / "a" / "manifest.tsv")
    assert [e.image_id for e in entries] == ["scene_000", "scene_001", "scene_002"]


def test_genfix_sparse_counts(tmp_path):
    assert main(["genfix", str(tmp_path), "--count", "1", "--width", "512", "--height", "512",
                 "--cells", "100", "--layout", "sparse", "--blur", "0"]) == 0
    lab = io.read_label_map(tmp_path / "gt" / "scene_000.png")
    pts = io.read_points(tmp_path / "points" / "scene_000.txt")
    assert lab.max() == 100 and len(pts) == 100


def test_genfix_dense_has_ridges(tmp_path):
    genfix(tmp_path, "--ridge-dropout", "0")
    cls = io.read_class_mask(tmp_path / "mask" / "scene_000.png")
    assert (cls == PixelClass.CONTOUR).any()


def test_evaluate_perfect(tmp_path):
    genfix(tmp_path)
    out = tmp_path / "eval.csv"
    assert main(["evaluate", str(tmp_path / "gt"), str(tmp_path / "gt"), str(tmp_path / "points"), str(out)]) == 0
    rows = read_csv(out)
    assert [r["image_id"] for r in rows] == ["scene_000", "scene_001", "scene_002", "mean±std"]
    for r in rows[:3]:
        assert r["F1_det"] == r["Dice"] == r["F1_seg"] == r["AJI"] == "1.000000"
        assert r["RCE"] == "0.000000"
    assert rows[3]["AJI"] == "1.000000±0.000000"
    assert out.with_suffix(".png").exists()


def test_evaluate_hand_computed(tmp_path):
    for d in ("pred", "gt", "pts"):
        (tmp_path / d).mkdir()
    gt = np.zeros((10, 10), int)
    gt[1:4, 1:4] = 1
    gt[6:9, 6:9] = 2
    pred = np.zeros_like(gt)
    pred[1:4, 1:4] = 1
    pred[0, 8:10] = 2
    io.write_label_map(gt, tmp_path / "gt" / "x.png")
    io.write_label_map(pred, tmp_path / "pred" / "x.png")
    io.write_points([(2, 2), (7, 7)], tmp_path / "pts" / "x.txt")
    assert main(["evaluate", *(str(tmp_path / d) for d in ("pred", "gt", "pts")), str(tmp_path / "e.csv")]) == 0
    r = read_csv(tmp_path / "e.csv")[0]
    # tp=1, fp=1, fn=1 -> P=R=F1=0.5, RCE=0; Dice 18/(11+18); AJI 9/(9+9+2)
    assert (r["F1_det"], r["P"], r["R"], r["RCE"]) == ("0.500000", "0.500000", "0.500000", "0.000000")
    assert float(r["Dice"]) == pytest.approx(18 / 29, abs=1e-6)
    assert float(r["F1_seg"]) == pytest.approx(0.5, abs=1e-6)
    assert float(r["AJI"]) == pytest.approx(9 / 20, abs=1e-6)


def test_evaluate_missing_pair(tmp_path):
    genfix(tmp_path)
    (tmp_path / "gt" / "scene_001.png").unlink()
    assert main(["evaluate", str(tmp_path / "prob"), str(tmp_path / "gt"), str(tmp_path / "points"),
                 str(tmp_path / "e.csv")]) == 1


def test_compare_rows_and_ordering(tmp_path):
    genfix(tmp_path, "--ridge-dropout", "0.7")
    out = tmp_path / "cmp.csv"
    assert main(["compare", str(tmp_path / "prob"), str(tmp_path / "gt"), str(out)]) == 0
    rows = read_csv(out)
    assert len(rows) == 12
    assert [r["scheme"] for r in rows[:4]] == ["proposed", "baseline", "distance", "contour-strip"]
    by = {(r["image_id"], r["scheme"]): float(r["F1_seg"]) for r in rows}
    for i in ("scene_000", "scene_001", "scene_002"):
        assert by[(i, "proposed")] >= by[(i, "baseline")]
    timing = read_csv(tmp_path / "cmp_timing.csv")
    assert len(timing) == 12 and all(float(t["seconds"]) >= 0 for t in timing)
    assert out.with_suffix(".png").exists()


def test_compare_single_image_and_empty(tmp_path, merged_pair_png):
    (tmp_path / "gt").mkdir()
    (tmp_path / "prob").mkdir()
    assert main(["compare", str(tmp_path / "prob"), str(tmp_path / "gt"), str(tmp_path / "c.csv")]) == 1
    merged_pair_png.rename(tmp_path / "prob" / "pair.png")
    gt = np.zeros((50, 90), int)
    gt[disk((50, 90), (27, 25), 18)] = 1
    gt[disk((50, 90), (57, 25), 18) & (gt == 0)] = 2
    io.write_label_map(gt, tmp_path / "gt" / "pair.png")
    assert main(["compare", str(tmp_path / "prob"), str(tmp_path / "gt"), str(tmp_path / "c.csv")]) == 0
    assert len(read_csv(tmp_path / "c.csv")) == 4


def test_compare_timing_grows_with_area(tmp_path):
    for d in ("prob", "gt"):
        (tmp_path / d).mkdir()
    for name, size, cells in (("a_small", 64, 2), ("b_large", 512, 160)):
        sc = generate_scene(np.random.default_rng(9), size, size, n_cells=cells)
        io.write_probability_map(sc.probmap, tmp_path / "prob" / f"{name}.png")
        io.write_label_map(sc.labels, tmp_path / "gt" / f"{name}.png")
    assert main(["compare", str(tmp_path / "prob"), str(tmp_path / "gt"), str(tmp_path / "c.csv")]) == 0
    t = {(r["image_id"], r["scheme"]): float(r["seconds"]) for r in read_csv(tmp_path / "c_timing.csv")}
    for scheme in ("proposed", "baseline", "distance", "contour-strip"):
        assert t[("a_small", scheme)] < t[("b_large", scheme)]


# --- tile-plan -------------------------------------------------------------

def test_tile_plan_counts(tmp_path, capsys):
    assert main(["tile-plan", "5000", "5000"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0].startswith("# canvas\twidth\t5000")
    assert len([ln for ln in lines if ln.startswith("tile_")]) == 16
    assert main(["tile-plan", "1400", "1344", "-o", str(tmp_path / "t.tsv")]) == 0
    rows = (tmp_path / "t.tsv").read_text().splitlines()[2:]
    assert [r.split("\t")[1] for r in rows] == ["0", "56"]


def test_tile_plan_needs_size():
    assert main(["tile-plan"]) == 1


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "neuroseg", "--help"], capture_output=True, text=True)
    assert res.returncode == 0
    for cmd in ("synthesize", "postprocess", "evaluate", "compare", "genfix", "tile-plan"):
        assert cmd in res.stdout
