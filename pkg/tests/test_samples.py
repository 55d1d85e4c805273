import numpy as np
import pytest
from conftest import thick_lines
from hypothesis import given, settings
from hypothesis import strategies as st

from delineate.graphx import ExtractParams
from delineate.raster import BinaryMask, ScalarGrid, dilate, load_pgm
from delineate.samples import crop_patch, generate_samples, label_path, overlap_fraction, split_path


def mask_from(shape, pixels):
    b = np.zeros(shape, dtype=bool)
    for x, y in pixels:
        b[y, x] = True
    return BinaryMask(b)


def test_overlap_inside_and_outside():
    gt = mask_from((5, 20), [(x, 2) for x in range(20)])
    assert overlap_fraction([(x, 2) for x in range(5, 15)], gt, 0) == 1.0
    assert overlap_fraction([(x, 4) for x in range(5, 15)], gt, 1) == 0.0


@pytest.mark.parametrize("n,on,label", [(10, 9, 0), (100, 90, 0), (100, 91, 1), (10, 10, 1), (20, 19, 1)])
def test_ninety_percent_boundary(n, on, label):
    gt = mask_from((3, n), [(x, 0) for x in range(on)])
    poly = [(x, 0) for x in range(n)]
    assert overlap_fraction(poly, gt, 0) == on / n
    assert label_path(poly, gt, 0) == label


def test_centerline_is_positive():
    gt = BinaryMask(thick_lines((40, 60), [((5, 20), (55, 20))], half=0))
    assert label_path([(x, 20) for x in range(5, 56)], gt) == 1


def test_chord_between_structures_is_negative():
    gt = BinaryMask(thick_lines((60, 60), [((5, 10), (55, 10)), ((5, 50), (55, 50))], half=2))
    chord = [(30, y) for y in range(10, 51)]
    assert overlap_fraction(chord, gt, 1) < 0.9
    assert label_path(chord, gt, 1) == 0


def test_offset_path_inside_band_is_positive():
    gt = BinaryMask(thick_lines((40, 60), [((5, 20), (55, 20))], half=2))
    assert label_path([(x, 21) for x in range(5, 56)], gt, 0) == 1


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 60), st.data())
def test_label_iff_overlap(n, data):
    on = data.draw(st.integers(0, n))
    gt = mask_from((2, n), [(x, 0) for x in range(on)])
    poly = [(x, 0) for x in range(n)]
    assert label_path(poly, gt, 0) == int(on / n > 0.9 and 10 * on > 9 * n)


def test_split_fitting_path_is_identity():
    poly = tuple((x, 3) for x in range(20))
    assert split_path(poly, 32) == [poly]


def test_split_straight_path():
    span = 20
    poly = [(x, 0) for x in range(int(2.5 * span))]
    pieces = split_path(poly, span)
    assert len(pieces) == 3
    assert all(max(p[0] for p in pc) - min(p[0] for p in pc) + 1 <= span for pc in pieces)


def walk(steps):
    pts = [(50, 50)]
    for dx, dy in steps:
        pts.append((pts[-1][0] + dx, pts[-1][1] + dy))
    return pts


@settings(max_examples=60, deadline=None)
@given(st.lists(st.sampled_from([(1, 0), (1, 1), (0, 1), (-1, 1), (1, -1)]), min_size=0, max_size=120), st.integers(2, 40))
def test_split_reconstructs(steps, span):
    poly = walk(steps)
    pieces = split_path(poly, span)
    rebuilt = list(pieces[0])
    for pc in pieces[1:]:
        assert pc[0] == rebuilt[-1]
        rebuilt.extend(pc[1:])
    assert rebuilt == poly
    for pc in pieces:
        xs, ys = [p[0] for p in pc], [p[1] for p in pc]
        assert max(xs) - min(xs) < span and max(ys) - min(ys) < span


def test_crop_center_no_padding(rng):
    v = rng.random((100, 100))
    poly = [(50, 50), (51, 50)]
    patch, local, origin = crop_patch(ScalarGrid(v), poly, 32)
    assert origin == (50 - 15, 50 - 16)
    assert (patch.values == v[34:66, 35:67]).all()
    assert [(x + origin[0], y + origin[1]) for x, y in local] == poly


def test_crop_corner_pads_with_zero():
    v = np.ones((40, 40))
    patch, local, origin = crop_patch(ScalarGrid(v), [(0, 0), (1, 1)], 32)
    assert origin[0] < 0 and origin[1] < 0
    assert patch.values[: -origin[1], :].sum() == 0 and patch.values[:, : -origin[0]].sum() == 0
    assert patch.values.sum() == (32 + origin[0]) * (32 + origin[1])


@settings(max_examples=40, deadline=None)
@given(st.lists(st.sampled_from([(1, 0), (1, 1), (0, 1), (-1, -1)]), max_size=25), st.integers(32, 64))
def test_crop_round_trip(steps, size):
    poly = walk(steps)
    v = np.random.default_rng(0).random((90, 90))
    patch, local, origin = crop_patch(ScalarGrid(v), poly, size)
    for (lx, ly), (x, y) in zip(local, poly):
        assert (lx + origin[0], ly + origin[1]) == (x, y)
        if 0 <= x < 90 and 0 <= y < 90:
            assert patch.values[ly, lx] == v[y, x]


def y_fixture():
    bits = thick_lines((120, 120), [((60, 60), (60, 110)), ((60, 60), (15, 15)), ((60, 60), (105, 15))])
    return ScalarGrid(bits.astype(float)), BinaryMask(bits)


def test_samples_recheck(tmp_path):
    grid, gt = y_fixture()
    samples = generate_samples(grid, gt, ExtractParams(d=30), rho=1.0, patch_size=64, outdir=tmp_path)
    assert samples
    band = dilate(gt, 1.0).bits
    for s in samples:
        on = sum(band[y, x] for x, y in s.polyline)
        assert s.overlap == on / len(s.polyline)
        assert s.label == int(10 * on > 9 * len(s.polyline))
        assert load_pgm(tmp_path / s.patch_path).values.shape == (64, 64)
    lines = (tmp_path / "manifest.jsonl").read_text().splitlines()
    assert len(lines) == len(samples)


def test_perfect_rendering_mostly_positive():
    grid, gt = y_fixture()
    samples = generate_samples(grid, gt, ExtractParams(d=30))
    pos = [s for s in samples if s.label]
    neg = [s for s in samples if not s.label]
    assert len(pos) >= len(neg)
    # negatives are shortcuts that leave the structure
    for s in neg:
        assert s.overlap <= 0.9


def test_empty_map_gives_no_samples():
    assert generate_samples(ScalarGrid(np.zeros((30, 30))), BinaryMask.empty(30, 30)) == []


def test_manifest_reproducible(tmp_path):
    grid, gt = y_fixture()
    generate_samples(grid, gt, ExtractParams(d=30), outdir=tmp_path / "a")
    generate_samples(grid, gt, ExtractParams(d=30), outdir=tmp_path / "b", jobs=2)
    assert (tmp_path / "a/manifest.jsonl").read_bytes() == (tmp_path / "b/manifest.jsonl").read_bytes()


def test_size_mismatch():
    with pytest.raises(ValueError):
        generate_samples(ScalarGrid(np.zeros((10, 10))), BinaryMask.empty(11, 10))
