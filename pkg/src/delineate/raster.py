"""Raster grids, thresholding, thinning and PGM I/O.

Coordinates follow image convention: pixel ``(x, y)`` lives at
``values[y, x]`` with the origin at the top-left corner.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

# 8-neighbourhood in ring order starting north, clockwise, as (dy, dx).
RING = ((-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1), (0, -1), (-1, -1))
N, NE, E, SE, S, SW, W, NW = range(8)
_EIGHT = np.ones((3, 3), dtype=bool)


class PGMError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class ScalarGrid:
    """Row-major 2D grid of probabilities in [0, 1]."""

    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64, copy=True)
        if v.ndim != 2 or v.shape[0] < 1 or v.shape[1] < 1:
            raise ValueError(f"grid must be a non-empty 2D array, got shape {v.shape}")
        if not np.all((v >= 0.0) & (v <= 1.0)):
            raise ValueError("grid values must lie in [0, 1]")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def height(self) -> int:
        return self.values.shape[0]

    def contains(self, x: int, y: int) -> bool:
        return 0 <= x < self.width and 0 <= y < self.height

    def __getitem__(self, xy):
        x, y = xy
        return float(self.values[y, x])


@dataclass(frozen=True, eq=False)
class BinaryMask:
    bits: np.ndarray

    def __post_init__(self):
        b = np.array(self.bits, dtype=bool, copy=True)
        if b.ndim != 2 or b.shape[0] < 1 or b.shape[1] < 1:
            raise ValueError(f"mask must be a non-empty 2D array, got shape {b.shape}")
        b.flags.writeable = False
        object.__setattr__(self, "bits", b)

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    def count(self) -> int:
        return int(self.bits.sum())

    def pixels(self) -> list[tuple[int, int]]:
        """Foreground pixels as ``(x, y)`` in raster order."""
        ys, xs = np.nonzero(self.bits)
        return list(zip(xs.tolist(), ys.tolist()))

    @classmethod
    def empty(cls, width: int, height: int) -> "BinaryMask":
        return cls(np.zeros((height, width), dtype=bool))


@dataclass(frozen=True, eq=False)
class Skeleton:
    """A one-pixel-wide mask together with its per-pixel 8-neighbour count."""

    mask: BinaryMask
    degree: np.ndarray = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "degree", neighbor_count(self.mask.bits))

    @property
    def bits(self) -> np.ndarray:
        return self.mask.bits

    @property
    def width(self) -> int:
        return self.mask.width

    @property
    def height(self) -> int:
        return self.mask.height


def neighbor_count(bits: np.ndarray) -> np.ndarray:
    """Number of 8-neighbours set for every foreground pixel (0 on background)."""
    b = bits.astype(np.int16)
    total = ndimage.correlate(b, np.ones((3, 3), dtype=np.int16), mode="constant", cval=0)
    out = (total - b).astype(np.int16)
    out[~bits] = 0
    out.flags.writeable = False
    return out


# ---------------------------------------------------------------------------
# PGM


def _read_header(data: bytes):
    tokens = []
    pos = 0
    n = len(data)
    while len(tokens) < 4:
        while pos < n and data[pos : pos + 1].isspace():
            pos += 1
        if pos >= n:
            raise PGMError("truncated header")
        if data[pos : pos + 1] == b"#":
            while pos < n and data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < n and not data[pos : pos + 1].isspace() and data[pos : pos + 1] != b"#":
            pos += 1
        tokens.append(data[start:pos])
    # exactly one whitespace byte separates the header from the raster
    if pos >= n or not data[pos : pos + 1].isspace():
        raise PGMError("malformed header terminator")
    return tokens, pos + 1


def load_pgm(path) -> ScalarGrid:
    """Read a binary (P5) PGM; values are scaled by ``1/maxval`` exactly."""
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:2] != b"P5":
        raise PGMError(f"unsupported magic number {data[:2]!r}; only P5 is handled")
    tokens, offset = _read_header(data)
    try:
        width, height, maxval = (int(t) for t in tokens[1:4])
    except ValueError as exc:
        raise PGMError(f"malformed header: {exc}") from None
    if width < 1 or height < 1:
        raise PGMError("image dimensions must be positive")
    if maxval not in (255, 65535):
        raise PGMError(f"unsupported maxval {maxval}")
    dtype = np.dtype(">u2") if maxval == 65535 else np.dtype("u1")
    need = width * height * dtype.itemsize
    payload = data[offset : offset + need]
    if len(payload) < need:
        raise PGMError(f"truncated payload: expected {need} bytes, got {len(payload)}")
    raw = np.frombuffer(payload, dtype=dtype).reshape(height, width)
    return ScalarGrid(raw.astype(np.float64) / maxval)


def save_pgm(grid: ScalarGrid, path, maxval: int = 65535) -> None:
    if maxval not in (255, 65535):
        raise ValueError("maxval must be 255 or 65535")
    dtype = np.dtype(">u2") if maxval == 65535 else np.dtype("u1")
    raw = np.rint(grid.values * maxval).astype(dtype)
    header = f"P5\n{grid.width} {grid.height}\n{maxval}\n".encode("ascii")
    tmp = f"{os.fspath(path)}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(header)
        fh.write(raw.tobytes())
    os.replace(tmp, path)


def mask_to_grid(mask: BinaryMask) -> ScalarGrid:
    return ScalarGrid(mask.bits.astype(np.float64))


# ---------------------------------------------------------------------------
# Morphology


def threshold(grid: ScalarGrid, t: float = 0.5) -> BinaryMask:
    if not 0.0 <= t <= 1.0:
        raise ValueError("threshold must lie in [0, 1]")
    return BinaryMask(grid.values >= t)


def dilate(mask: BinaryMask, r: float) -> BinaryMask:
    """All pixels within Euclidean distance ``r`` of the foreground."""
    if r < 0:
        raise ValueError("dilation radius must be non-negative")
    if r == 0 or not mask.bits.any():
        return mask
    dist = ndimage.distance_transform_edt(~mask.bits)
    return BinaryMask(dist <= r)


def connected_components(mask: BinaryMask) -> tuple[np.ndarray, int]:
    """8-connected labelling; labels run 1..count, background is 0."""
    labels, count = ndimage.label(mask.bits, structure=_EIGHT)
    return labels, int(count)


def _ring_codes(bits: np.ndarray) -> np.ndarray:
    """8-bit neighbourhood code per pixel; bit ``i`` is ``RING[i]``."""
    p = np.pad(bits, 1).astype(np.uint8)
    h, w = bits.shape
    code = np.zeros((h, w), dtype=np.uint8)
    for i, (dy, dx) in enumerate(RING):
        code |= p[1 + dy : 1 + dy + h, 1 + dx : 1 + dx + w] << i
    return code


def _bit(code: int, i: int) -> bool:
    return bool(code >> i & 1)


def _guo_hall_luts():
    first = np.zeros(256, dtype=bool)
    second = np.zeros(256, dtype=bool)
    for code in range(256):
        n, ne, e, se, s, sw, w, nw = (_bit(code, i) for i in range(8))
        # neighbours counter-clockwise from east, as in the original formulation
        x = (e, ne, n, nw, w, sw, s, se)
        crossings = sum((not x[2 * i]) and (x[2 * i + 1] or x[(2 * i + 2) % 8]) for i in range(4))
        n1 = sum(x[2 * k] or x[2 * k + 1] for k in range(4))
        n2 = sum(x[2 * k + 1] or x[(2 * k + 2) % 8] for k in range(4))
        removable = crossings == 1 and 2 <= min(n1, n2) <= 3
        first[code] = removable and not ((ne or n or not se) and e)
        second[code] = removable and not ((sw or s or not nw) and w)
    return first, second


def _components(members, adjacent) -> list[set]:
    groups, seen = [], set()
    for start in members:
        if start in seen:
            continue
        comp, stack = {start}, [start]
        while stack:
            a = stack.pop()
            for b in members:
                if b not in comp and adjacent(RING[a], RING[b]):
                    comp.add(b)
                    stack.append(b)
        seen |= comp
        groups.append(comp)
    return groups


def _simple_lut() -> np.ndarray:
    """Pixels whose removal preserves 8-foreground / 4-background topology."""

    def adj8(a, b):
        return max(abs(a[0] - b[0]), abs(a[1] - b[1])) == 1

    def adj4(a, b):
        return abs(a[0] - b[0]) + abs(a[1] - b[1]) == 1

    lut = np.zeros(256, dtype=bool)
    for code in range(256):
        fg = [i for i in range(8) if _bit(code, i)]
        bg = [i for i in range(8) if not _bit(code, i)]
        t8 = len(_components(fg, adj8))
        # only background components touching a 4-neighbour of the centre count
        t4 = sum(1 for comp in _components(bg, adj4) if any(i % 2 == 0 for i in comp))
        lut[code] = t8 == 1 and t4 == 1
    return lut


GUO_HALL_FIRST, GUO_HALL_SECOND = _guo_hall_luts()
SIMPLE = _simple_lut()


def guo_hall_thin(bits: np.ndarray) -> np.ndarray:
    """Two-subiteration Guo-Hall thinning run to convergence."""
    skel = np.array(bits, dtype=bool, copy=True)
    while True:
        before = int(skel.sum())
        for lut in (GUO_HALL_FIRST, GUO_HALL_SECOND):
            skel[lut[_ring_codes(skel)] & skel] = False
        if int(skel.sum()) == before:
            return skel


def _remove_redundant(skel: np.ndarray) -> None:
    """Delete simple pixels that are not line ends, in raster order, in place.

    Guo-Hall can leave staircase corners where a pixel and both of its
    neighbours are mutually adjacent; those pixels inflate the 8-degree.
    """
    h, w = skel.shape
    changed = True
    while changed:
        changed = False
        codes = _ring_codes(skel)
        ys, xs = np.nonzero(skel & SIMPLE[codes])
        for y, x in zip(ys.tolist(), xs.tolist()):
            code = 0
            deg = 0
            for i, (dy, dx) in enumerate(RING):
                yy, xx = y + dy, x + dx
                if 0 <= yy < h and 0 <= xx < w and skel[yy, xx]:
                    code |= 1 << i
                    deg += 1
            if deg >= 2 and SIMPLE[code]:
                skel[y, x] = False
                changed = True


def _neighbors(skel: np.ndarray, x: int, y: int):
    h, w = skel.shape
    for dy, dx in RING:
        yy, xx = y + dy, x + dx
        if 0 <= yy < h and 0 <= xx < w and skel[yy, xx]:
            yield xx, yy


def _prune_spurs(skel: np.ndarray, min_spur: int) -> None:
    """Remove end branches shorter than ``min_spur`` pixels that hang off a junction."""
    if min_spur <= 0:
        return
    deg = neighbor_count(skel)
    ys, xs = np.nonzero(deg == 1)
    doomed = []
    for x, y in zip(xs.tolist(), ys.tolist()):
        branch = [(x, y)]
        prev, cur = None, (x, y)
        hit_junction = False
        while True:
            nxt = [p for p in _neighbors(skel, *cur) if p != prev]
            if len(nxt) != 1:
                break
            prev, cur = cur, nxt[0]
            if deg[cur[1], cur[0]] >= 3:
                hit_junction = True
                break
            if deg[cur[1], cur[0]] != 2 or len(branch) >= min_spur:
                break
            branch.append(cur)
        if hit_junction and len(branch) < min_spur:
            doomed.extend(branch)
    for x, y in doomed:
        skel[y, x] = False


def skeletonize(mask: BinaryMask, min_spur: int = 5) -> Skeleton:
    """Thin ``mask`` to a one-pixel-wide skeleton and clip short spurs."""
    skel = guo_hall_thin(mask.bits)
    _remove_redundant(skel)
    if min_spur > 0:
        _prune_spurs(skel, min_spur)
        _remove_redundant(skel)
    return Skeleton(BinaryMask(skel))

