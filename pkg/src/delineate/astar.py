"""Best-first path search on a tubularity grid.

Entering pixel ``q`` costs ``base - p(q)``; the start pixel is free.  The
A* priority is ``g + hweight * euclid(q, goal)``.  With the default
``hweight = 0.5`` the heuristic over-estimates and the search is a greedy
approximation; :func:`dijkstra` is the exact reference.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numba
import numpy as np
from scipy import sparse
from scipy.sparse import csgraph

from .raster import BinaryMask, ScalarGrid

Pixel = tuple[int, int]

_OFFSETS8 = np.array([(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)], dtype=np.int64)
_OFFSETS4 = np.array([(-1, 0), (0, -1), (0, 1), (1, 0)], dtype=np.int64)
SQRT2 = math.sqrt(2.0)


class Status(enum.IntEnum):
    FOUND = 0
    UNREACHABLE = 1
    EXHAUSTED = 2


@dataclass(frozen=True)
class SearchParams:
    base: float = 1.1
    hweight: float = 0.5
    connectivity: int = 8
    # None searches the whole grid; extraction sets this to d/2
    search_margin: Optional[int] = None
    max_expansions: int = 4_000_000

    def __post_init__(self):
        if not self.base > 1.0:
            raise ValueError("base must exceed 1 so every step costs at least base - 1 > 0")
        if self.hweight < 0:
            raise ValueError("hweight must be non-negative")
        if self.connectivity not in (4, 8):
            raise ValueError("connectivity must be 4 or 8")
        if self.search_margin is not None and self.search_margin < 0:
            raise ValueError("search_margin must be non-negative")
        if self.max_expansions < 1:
            raise ValueError("max_expansions must be positive")


@dataclass(frozen=True)
class PathResult:
    polyline: tuple[Pixel, ...]
    cost: float

    @property
    def length(self) -> float:
        return polyline_length(self.polyline)


@dataclass(frozen=True)
class SearchOutcome:
    status: Status
    result: Optional[PathResult]
    expansions: int


def polyline_length(polyline: Sequence[Pixel]) -> float:
    """Sum of step lengths: 1 for axis steps, sqrt(2) for diagonal ones."""
    total = 0.0
    for (x0, y0), (x1, y1) in zip(polyline, polyline[1:]):
        total += SQRT2 if (x0 != x1 and y0 != y1) else 1.0
    return total


def check_polyline(grid: ScalarGrid, polyline: Sequence[Pixel]) -> None:
    if len(polyline) == 0:
        raise ValueError("polyline is empty")
    for x, y in polyline:
        if not grid.contains(x, y):
            raise ValueError(f"pixel {(x, y)} lies outside the {grid.width}x{grid.height} grid")
    for a, b in zip(polyline, polyline[1:]):
        if max(abs(a[0] - b[0]), abs(a[1] - b[1])) != 1:
            raise ValueError(f"consecutive pixels {a} and {b} are not 8-neighbours")


def path_cost(grid: ScalarGrid, polyline: Sequence[Pixel], base: float = 1.1) -> float:
    """Accumulated cost of entering every pixel after the first."""
    check_polyline(grid, polyline)
    v = grid.values
    total = 0.0
    for x, y in polyline[1:]:
        total += base - v[y, x]
    return total


def search_region(start: Pixel, goal: Pixel, margin: Optional[int], width: int, height: int):
    """Inclusive ``(x0, y0, x1, y1)`` bounding box of both endpoints padded by ``margin``."""
    if margin is None:
        return 0, 0, width - 1, height - 1
    m = int(math.ceil(margin))
    x0 = max(0, min(start[0], goal[0]) - m)
    y0 = max(0, min(start[1], goal[1]) - m)
    x1 = min(width - 1, max(start[0], goal[0]) + m)
    y1 = min(height - 1, max(start[1], goal[1]) + m)
    return x0, y0, x1, y1


# ---------------------------------------------------------------------------
# numba kernel


@numba.njit(cache=True, nogil=True, inline="always")
def _before(f1, h1, i1, f2, h2, i2):
    if f1 != f2:
        return f1 < f2
    if h1 != h2:
        return h1 < h2
    return i1 < i2


@numba.njit(cache=True, nogil=True)
def _push(hf, hh, hi, size, f, h, i):
    if size == hf.shape[0]:
        cap = 2 * hf.shape[0]
        nf = np.empty(cap, np.float64)
        nh = np.empty(cap, np.float64)
        ni = np.empty(cap, np.int64)
        nf[:size] = hf[:size]
        nh[:size] = hh[:size]
        ni[:size] = hi[:size]
        hf, hh, hi = nf, nh, ni
    k = size
    while k > 0:
        p = (k - 1) >> 1
        if _before(f, h, i, hf[p], hh[p], hi[p]):
            hf[k] = hf[p]
            hh[k] = hh[p]
            hi[k] = hi[p]
            k = p
        else:
            break
    hf[k] = f
    hh[k] = h
    hi[k] = i
    return hf, hh, hi, size + 1


@numba.njit(cache=True, nogil=True)
def _pop(hf, hh, hi, size):
    top = hi[0]
    size -= 1
    f, h, i = hf[size], hh[size], hi[size]
    k = 0
    while True:
        c = 2 * k + 1
        if c >= size:
            break
        if c + 1 < size and _before(hf[c + 1], hh[c + 1], hi[c + 1], hf[c], hh[c], hi[c]):
            c += 1
        if _before(hf[c], hh[c], hi[c], f, h, i):
            hf[k] = hf[c]
            hh[k] = hh[c]
            hi[k] = hi[c]
            k = c
        else:
            break
    if size > 0:
        hf[k] = f
        hh[k] = h
        hi[k] = i
    return top, size


@numba.njit(cache=True, nogil=True)
def _astar_kernel(cost, passable, sx, sy, gx, gy, hweight, offsets, max_expansions):
    rows, cols = cost.shape
    n = rows * cols
    g = np.full(n, np.inf)
    parent = np.full(n, -1, np.int64)
    closed = np.zeros(n, np.uint8)
    hf = np.empty(256, np.float64)
    hh = np.empty(256, np.float64)
    hi = np.empty(256, np.int64)
    start = sy * cols + sx
    goal = gy * cols + gx
    g[start] = 0.0
    h0 = hweight * math.sqrt(float((sx - gx) ** 2 + (sy - gy) ** 2))
    hf, hh, hi, size = _push(hf, hh, hi, 0, h0, h0, start)
    expansions = 0
    status = 1
    while size > 0:
        cur, size = _pop(hf, hh, hi, size)
        if closed[cur]:
            continue
        if cur == goal:
            status = 0
            break
        expansions += 1
        if expansions > max_expansions:
            status = 2
            break
        closed[cur] = 1
        cy = cur // cols
        cx = cur - cy * cols
        gc = g[cur]
        for k in range(offsets.shape[0]):
            ny = cy + offsets[k, 0]
            nx = cx + offsets[k, 1]
            if ny < 0 or ny >= rows or nx < 0 or nx >= cols:
                continue
            nb = ny * cols + nx
            if closed[nb] or not passable[ny, nx]:
                continue
            ng = gc + cost[ny, nx]
            if ng < g[nb]:
                g[nb] = ng
                parent[nb] = cur
                hv = hweight * math.sqrt(float((nx - gx) ** 2 + (ny - gy) ** 2))
                hf, hh, hi, size = _push(hf, hh, hi, size, ng + hv, hv, nb)
    if status != 0:
        return status, np.empty(0, np.int64), 0.0, expansions
    count = 1
    k = goal
    while k != start:
        k = parent[k]
        count += 1
    path = np.empty(count, np.int64)
    k = goal
    for j in range(count - 1, -1, -1):
        path[j] = k
        k = parent[k]
    return status, path, g[goal], expansions


def _prepare(grid, start, goal, params, mask):
    for name, p in (("start", start), ("goal", goal)):
        if not grid.contains(*p):
            raise ValueError(f"{name} {p} lies outside the {grid.width}x{grid.height} grid")
    x0, y0, x1, y1 = search_region(start, goal, params.search_margin, grid.width, grid.height)
    sub = grid.values[y0 : y1 + 1, x0 : x1 + 1]
    cost = params.base - sub
    if mask is None:
        passable = np.ones(sub.shape, dtype=np.bool_)
    else:
        if mask.bits.shape != grid.values.shape:
            raise ValueError("mask and grid dimensions differ")
        passable = np.ascontiguousarray(mask.bits[y0 : y1 + 1, x0 : x1 + 1])
    return (x0, y0), np.ascontiguousarray(cost), passable


def _to_polyline(idx, cols, origin):
    ys, xs = np.divmod(idx, cols)
    return tuple(zip((xs + origin[0]).tolist(), (ys + origin[1]).tolist()))


def find_path(
    grid: ScalarGrid,
    start: Pixel,
    goal: Pixel,
    params: SearchParams = SearchParams(),
    mask: Optional[BinaryMask] = None,
    hweight: Optional[float] = None,
) -> SearchOutcome:
    """A* search returning a status alongside the (optional) path.

    ``mask`` optionally marks passable pixels; everything is passable by
    default since all tubularity values yield a finite cost.
    """
    start = (int(start[0]), int(start[1]))
    goal = (int(goal[0]), int(goal[1]))
    origin, cost, passable = _prepare(grid, start, goal, params, mask)
    if start == goal:
        return SearchOutcome(Status.FOUND, PathResult((start,), 0.0), 0)
    offsets = _OFFSETS8 if params.connectivity == 8 else _OFFSETS4
    hw = params.hweight if hweight is None else hweight
    status, idx, total, expansions = _astar_kernel(
        cost, passable,
        start[0] - origin[0], start[1] - origin[1],
        goal[0] - origin[0], goal[1] - origin[1],
        float(hw), offsets, int(params.max_expansions),
    )
    status = Status(status)
    if status is not Status.FOUND:
        return SearchOutcome(status, None, int(expansions))
    polyline = _to_polyline(idx, cost.shape[1], origin)
    return SearchOutcome(status, PathResult(polyline, float(total)), int(expansions))


def astar(
    grid: ScalarGrid,
    start: Pixel,
    goal: Pixel,
    params: SearchParams = SearchParams(),
    mask: Optional[BinaryMask] = None,
) -> Optional[PathResult]:
    return find_path(grid, start, goal, params, mask).result


def _region_graph(cost: np.ndarray, passable: np.ndarray, connectivity: int):
    rows, cols = cost.shape
    index = np.arange(rows * cols).reshape(rows, cols)
    src, dst, wts = [], [], []
    offsets = _OFFSETS8 if connectivity == 8 else _OFFSETS4
    for dy, dx in offsets:
        ys0, ys1 = max(0, -dy), rows - max(0, dy)
        xs0, xs1 = max(0, -dx), cols - max(0, dx)
        a = index[ys0:ys1, xs0:xs1]
        b = index[ys0 + dy : ys1 + dy, xs0 + dx : xs1 + dx]
        ok = passable[ys0:ys1, xs0:xs1] & passable[ys0 + dy : ys1 + dy, xs0 + dx : xs1 + dx]
        src.append(a[ok])
        dst.append(b[ok])
        wts.append(cost[ys0 + dy : ys1 + dy, xs0 + dx : xs1 + dx][ok])
    src = np.concatenate(src)
    dst = np.concatenate(dst)
    wts = np.concatenate(wts)
    return sparse.csr_matrix((wts, (src, dst)), shape=(rows * cols, rows * cols))


def dijkstra_search(
    grid: ScalarGrid,
    start: Pixel,
    goal: Pixel,
    params: SearchParams = SearchParams(),
    mask: Optional[BinaryMask] = None,
) -> SearchOutcome:
    """Exact shortest path over the same region, via a sparse-graph Dijkstra."""
    start = (int(start[0]), int(start[1]))
    goal = (int(goal[0]), int(goal[1]))
    origin, cost, passable = _prepare(grid, start, goal, params, mask)
    if start == goal:
        return SearchOutcome(Status.FOUND, PathResult((start,), 0.0), 0)
    rows, cols = cost.shape
    s = (start[1] - origin[1]) * cols + (start[0] - origin[0])
    t = (goal[1] - origin[1]) * cols + (goal[0] - origin[0])
    if not passable.flat[s] or not passable.flat[t]:
        return SearchOutcome(Status.UNREACHABLE, None, 0)
    graph = _region_graph(cost, passable, params.connectivity)
    dist, pred = csgraph.dijkstra(graph, directed=True, indices=s, return_predecessors=True)
    if not np.isfinite(dist[t]):
        settled = int(np.isfinite(dist).sum())
        return SearchOutcome(Status.UNREACHABLE, None, settled)
    settled = int((dist < dist[t]).sum())
    if settled > params.max_expansions:
        return SearchOutcome(Status.EXHAUSTED, None, settled)
    idx = [t]
    while idx[-1] != s:
        idx.append(int(pred[idx[-1]]))
    polyline = _to_polyline(np.array(idx[::-1]), cols, origin)
    return SearchOutcome(Status.FOUND, PathResult(polyline, path_cost(grid, polyline, params.base)), settled)


def dijkstra(
    grid: ScalarGrid,
    start: Pixel,
    goal: Pixel,
    params: SearchParams = SearchParams(),
    mask: Optional[BinaryMask] = None,
) -> Optional[PathResult]:
    return dijkstra_search(grid, start, goal, params, mask).result
