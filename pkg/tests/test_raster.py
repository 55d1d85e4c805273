from collections import deque

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy import ndimage
from skimage.morphology import thin

from delineate.raster import (
    BinaryMask,
    PGMError,
    ScalarGrid,
    Skeleton,
    connected_components,
    dilate,
    guo_hall_thin,
    load_pgm,
    neighbor_count,
    save_pgm,
    skeletonize,
    threshold,
)

masks = arrays(np.bool_, st.tuples(st.integers(1, 24), st.integers(1, 24)))


def flood_fill_count(bits):
    h, w = bits.shape
    seen = np.zeros_like(bits)
    n = 0
    for y in range(h):
        for x in range(w):
            if bits[y, x] and not seen[y, x]:
                n += 1
                seen[y, x] = True
                todo = deque([(y, x)])
                while todo:
                    cy, cx = todo.popleft()
                    for dy in (-1, 0, 1):
                        for dx in (-1, 0, 1):
                            ny, nx = cy + dy, cx + dx
                            if 0 <= ny < h and 0 <= nx < w and bits[ny, nx] and not seen[ny, nx]:
                                seen[ny, nx] = True
                                todo.append((ny, nx))
    return n


def brute_dilate(bits, r):
    h, w = bits.shape
    out = np.zeros_like(bits)
    on = np.argwhere(bits)
    for y in range(h):
        for x in range(w):
            if len(on) and (((on[:, 0] - y) ** 2 + (on[:, 1] - x) ** 2) <= r * r).any():
                out[y, x] = True
    return out


def write_raw_pgm(path, w, h, maxval, payload):
    path.write_bytes(f"P5\n{w} {h}\n{maxval}\n".encode() + payload)


# --- grids ---------------------------------------------------------------


def test_scalar_grid_rejects_out_of_range():
    with pytest.raises(ValueError):
        ScalarGrid(np.array([[0.5, 1.2]]))
    with pytest.raises(ValueError):
        ScalarGrid(np.array([[np.nan]]))
    with pytest.raises(ValueError):
        ScalarGrid(np.zeros((0, 3)))


def test_grid_indexing_is_x_then_y():
    v = np.zeros((2, 3))
    v[1, 2] = 0.25
    g = ScalarGrid(v)
    assert (g.width, g.height) == (3, 2)
    assert g[2, 1] == 0.25
    assert g.contains(2, 1) and not g.contains(3, 0)


# --- PGM -----------------------------------------------------------------


def test_load_all_255(tmp_path):
    p = tmp_path / "a.pgm"
    write_raw_pgm(p, 4, 3, 255, bytes([255]) * 12)
    g = load_pgm(p)
    assert g.values.shape == (3, 4)
    assert (g.values == 1.0).all()


def test_load_16bit_zero(tmp_path):
    p = tmp_path / "z.pgm"
    write_raw_pgm(p, 2, 2, 65535, bytes(8))
    assert (load_pgm(p).values == 0.0).all()


def test_load_mid_value(tmp_path):
    p = tmp_path / "m.pgm"
    write_raw_pgm(p, 1, 1, 255, bytes([128]))
    assert load_pgm(p).values[0, 0] == 128 / 255


def test_load_16bit_is_big_endian_and_skips_comments(tmp_path):
    p = tmp_path / "c.pgm"
    p.write_bytes(b"P5\n# made by hand\n2 1\n65535\n" + bytes([0x01, 0x00, 0xFF, 0xFF]))
    assert load_pgm(p).values.tolist() == [[256 / 65535, 1.0]]


@pytest.mark.parametrize(
    "blob",
    [b"P2\n1 1\n255\n0", b"P5\n2 2\n255\n\x00", b"P5\n1 1\n1000\n\x00\x00", b"P5\nx 1\n255\n\x00"],
)
def test_load_rejects_bad_files(tmp_path, blob):
    p = tmp_path / "bad.pgm"
    p.write_bytes(blob)
    with pytest.raises(PGMError):
        load_pgm(p)


def test_save_zero_payload(tmp_path):
    p = tmp_path / "z.pgm"
    save_pgm(ScalarGrid(np.zeros((3, 5))), p)
    data = p.read_bytes()
    assert data.startswith(b"P5\n5 3\n65535\n")
    assert data[len(b"P5\n5 3\n65535\n") :] == bytes(30)


def test_save_single_one(tmp_path):
    p = tmp_path / "one.pgm"
    save_pgm(ScalarGrid(np.ones((1, 1))), p)
    assert p.read_bytes().endswith(b"\xff\xff")


@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(1, 9), st.integers(1, 9)), elements=st.floats(0, 1)))
def test_pgm_round_trip_error(tmp_path_factory, v):
    d = tmp_path_factory.mktemp("rt")
    for maxval in (255, 65535):
        p = d / f"g{maxval}.pgm"
        save_pgm(ScalarGrid(v), p, maxval)
        back = load_pgm(p).values
        assert np.abs(back - v).max() <= 1 / (2 * maxval) + 1e-15


# --- threshold / dilate / components --------------------------------------


def test_threshold_edges():
    g = ScalarGrid(np.array([[0.0, 0.5, 1.0]]))
    assert threshold(g, 0.0).bits.all()
    assert threshold(g, 1.0).bits.tolist() == [[False, False, True]]
    with pytest.raises(ValueError):
        threshold(g, 1.5)


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, (8, 8), elements=st.floats(0, 1)), st.floats(0, 1), st.floats(0, 1))
def test_threshold_monotone(v, a, b):
    lo, hi = sorted((a, b))
    g = ScalarGrid(v)
    assert not (threshold(g, hi).bits & ~threshold(g, lo).bits).any()


def test_dilate_zero_is_identity(rng):
    m = BinaryMask(rng.random((10, 10)) < 0.3)
    assert (dilate(m, 0).bits == m.bits).all()


def test_dilate_single_pixel_plus():
    b = np.zeros((5, 5), dtype=bool)
    b[2, 2] = True
    out = dilate(BinaryMask(b), 1).bits
    assert out.sum() == 5
    assert out[1, 2] and out[3, 2] and out[2, 1] and out[2, 3] and not out[1, 1]


@settings(max_examples=30, deadline=None)
@given(masks, st.sampled_from([0.5, 1.0, 1.5, 2.0, 2.5]))
def test_dilate_matches_brute_force(m, r):
    assert (dilate(BinaryMask(m), r).bits == brute_dilate(m, r)).all()


@settings(max_examples=30, deadline=None)
@given(masks)
def test_dilate_twice_covers_radius_two(m):
    once = dilate(dilate(BinaryMask(m), 1), 1).bits
    assert not (brute_dilate(m, 2) & ~once).any()


def test_components_trivial():
    assert connected_components(BinaryMask.empty(4, 4))[1] == 0
    b = np.zeros((5, 5), dtype=bool)
    b[0, 0] = b[2, 2] = True
    assert connected_components(BinaryMask(b))[1] == 2
    b[1, 1] = True
    assert connected_components(BinaryMask(b))[1] == 1


@settings(max_examples=60, deadline=None)
@given(masks)
def test_components_match_flood_fill(m):
    assert connected_components(BinaryMask(m))[1] == flood_fill_count(m)


# --- thinning / skeleton ---------------------------------------------------


def test_neighbor_count():
    b = np.ones((3, 3), dtype=bool)
    n = neighbor_count(b)
    assert n[1, 1] == 8 and n[0, 0] == 3 and n[0, 1] == 5


def test_guo_hall_matches_reference_thinning():
    gen = np.random.default_rng(7)
    for _ in range(60):
        m = gen.random((30, 30)) < gen.uniform(0.3, 0.8)
        assert (guo_hall_thin(m) == thin(m)).all()


def test_empty_skeleton():
    assert skeletonize(BinaryMask.empty(10, 10)).bits.sum() == 0


def test_bar_has_two_endpoints():
    b = np.zeros((9, 60), dtype=bool)
    b[3:6, 5:55] = True
    sk = skeletonize(BinaryMask(b))
    assert connected_components(BinaryMask(sk.bits))[1] == 1
    assert ((sk.degree == 1) & sk.bits).sum() == 2
    assert ((sk.degree > 2) & sk.bits).sum() == 0


def plus_mask(n=41, half=2):
    b = np.zeros((n, n), dtype=bool)
    c = n // 2
    b[c - half : c + half + 1, 4 : n - 4] = True
    b[4 : n - 4, c - half : c + half + 1] = True
    return b


def test_plus_has_one_junction_cluster():
    sk = skeletonize(BinaryMask(plus_mask()))
    junction = BinaryMask(sk.bits & (sk.degree >= 3))
    assert connected_components(junction)[1] == 1
    assert ((sk.degree == 1) & sk.bits).sum() == 4


def test_spur_pruning_removes_short_branch():
    b = np.zeros((20, 40), dtype=bool)
    b[10, 2:38] = True
    b[7:10, 20] = True  # 3-pixel spur
    sk = skeletonize(BinaryMask(b), min_spur=5)
    assert not sk.bits[7:9, 20].any()
    assert ((sk.degree == 1) & sk.bits).sum() == 2


def test_long_branch_survives_pruning():
    b = np.zeros((30, 40), dtype=bool)
    b[20, 2:38] = True
    b[5:20, 20] = True
    sk = skeletonize(BinaryMask(b), min_spur=5)
    assert ((sk.degree == 1) & sk.bits).sum() == 3


@settings(max_examples=50, deadline=None)
@given(arrays(np.bool_, st.tuples(st.integers(3, 28), st.integers(3, 28))))
def test_skeleton_invariants(m):
    sk = skeletonize(BinaryMask(m))
    assert not (sk.bits & ~m).any()
    assert connected_components(BinaryMask(sk.bits))[1] == flood_fill_count(m)
    assert isinstance(sk, Skeleton)


def _topology(bits):
    """(8-connected foreground count, 4-connected background count incl. the outside)."""
    fg = ndimage.label(bits, structure=np.ones((3, 3)))[1]
    bg = ndimage.label(~np.pad(bits, 1))[1]
    return fg, bg


def test_skeleton_is_thin():
    # every pixel that is not a line end carries topology: deleting it changes a count
    gen = np.random.default_rng(3)
    for _ in range(12):
        m = gen.random((30, 30)) < gen.uniform(0.4, 0.7)
        sk = skeletonize(BinaryMask(m)).bits
        ref = _topology(sk)
        deg = neighbor_count(sk)
        for y, x in np.argwhere(sk & (deg >= 2)):
            b = sk.copy()
            b[y, x] = False
            assert _topology(b) != ref, (y, x)
