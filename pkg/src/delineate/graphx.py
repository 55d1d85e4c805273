"""Overcomplete candidate graph from a tubularity map.

threshold -> skeletonize -> significant points -> regular-grid samples
(with an exclusion radius) -> all node pairs within ``k * d`` -> one A*
path per pair.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from scipy import ndimage
from scipy.spatial import cKDTree

from .astar import SearchParams, find_path
from .graph import DelinGraph, Node, make_edge
from .raster import RING, ScalarGrid, Skeleton, skeletonize, threshold

log = logging.getLogger(__name__)

_EIGHT = np.ones((3, 3), dtype=bool)


@dataclass(frozen=True)
class ExtractParams:
    threshold: float = 0.5
    d: int = 30
    # None resolves to max(3, d / 10)
    epsilon: Optional[float] = None
    k: float = 1.5
    min_spur: int = 5
    search: SearchParams = field(default_factory=SearchParams)

    def __post_init__(self):
        if not 0.0 <= self.threshold <= 1.0:
            raise ValueError("threshold must lie in [0, 1]")
        if self.d < 1 or int(self.d) != self.d:
            raise ValueError("d must be a positive integer")
        if not 0 < self.eps < self.d:
            raise ValueError("epsilon must satisfy 0 < epsilon < d")
        if self.k < 1:
            raise ValueError("k must be at least 1")

    @property
    def eps(self) -> float:
        return float(self.epsilon) if self.epsilon is not None else max(3.0, self.d / 10)

    @property
    def r_max(self) -> float:
        return self.k * self.d

    @property
    def search_params(self) -> SearchParams:
        if self.search.search_margin is not None:
            return self.search
        return replace(self.search, search_margin=int(math.ceil(self.d / 2)))


PROFILES = {
    "roads": {"d": 250, "k": 1.1, "R": 40.0},
    "axons": {"d": 30, "k": 1.5, "R": 10.0},
}


@dataclass(frozen=True)
class Segment:
    """Skeleton run between two consecutive nodes."""

    a: int
    b: int
    pixels: tuple[tuple[int, int], ...]

    @property
    def geodesic(self) -> float:
        total = 0.0
        for (x0, y0), (x1, y1) in zip(self.pixels, self.pixels[1:]):
            total += math.sqrt(2.0) if (x0 != x1 and y0 != y1) else 1.0
        return total


def _representative(ys: np.ndarray, xs: np.ndarray) -> tuple[int, int]:
    """Member closest to the centroid; ties go to the smallest (y, x)."""
    cy, cx = ys.mean(), xs.mean()
    d2 = (ys - cy) ** 2 + (xs - cx) ** 2
    order = np.lexsort((xs, ys, d2))
    i = order[0]
    return int(xs[i]), int(ys[i])


def _cluster_representatives(mask: np.ndarray) -> list[tuple[int, int]]:
    labels, count = ndimage.label(mask, structure=_EIGHT)
    if count == 0:
        return []
    ys, xs = np.nonzero(labels)
    lab = labels[ys, xs]
    order = np.argsort(lab, kind="stable")
    ys, xs, lab = ys[order], xs[order], lab[order]
    bounds = np.searchsorted(lab, np.arange(1, count + 2))
    return [_representative(ys[bounds[i] : bounds[i + 1]], xs[bounds[i] : bounds[i + 1]]) for i in range(count)]


def find_significant_points(skeleton: Skeleton, first_id: int = 0) -> list[Node]:
    """Endpoints (degree 1) and intersections (degree >= 3, one node per touching cluster)."""
    bits, deg = skeleton.bits, skeleton.degree
    found = []
    ys, xs = np.nonzero(bits & (deg == 1))
    found += [(int(y), int(x), "endpoint") for y, x in zip(ys, xs)]
    found += [(y, x, "intersection") for x, y in _cluster_representatives(bits & (deg >= 3))]
    found.sort()
    return [Node(first_id + i, x, y, kind) for i, (y, x, kind) in enumerate(found)]


class _Occupancy:
    """Point set answering 'is anything within eps of (x, y)?' via a hash grid."""

    def __init__(self, eps: float, points=()):
        self.eps = eps
        self.cell = max(eps, 1.0)
        self.buckets: dict[tuple[int, int], list[tuple[int, int]]] = {}
        for p in points:
            self.add(p)

    def _key(self, x, y):
        return int(math.floor(x / self.cell)), int(math.floor(y / self.cell))

    def add(self, p):
        self.buckets.setdefault(self._key(*p), []).append(p)

    def clear(self, x, y) -> bool:
        kx, ky = self._key(x, y)
        e2 = self.eps * self.eps
        for bx in (kx - 1, kx, kx + 1):
            for by in (ky - 1, ky, ky + 1):
                for px, py in self.buckets.get((bx, by), ()):
                    if (px - x) ** 2 + (py - y) ** 2 < e2:
                        return False
        return True


def sample_regular_nodes(skeleton: Skeleton, existing: list[Node], d: int, eps: float) -> list[Node]:
    """Nodes where the skeleton crosses the lines x = 0 mod d or y = 0 mod d.

    Each run of touching crossing pixels yields one candidate; candidates
    closer than ``eps`` to an already accepted node are dropped.
    """
    if not 0 < eps < d:
        raise ValueError("need 0 < eps < d")
    h, w = skeleton.bits.shape
    yy, xx = np.mgrid[0:h, 0:w]
    on_grid = skeleton.bits & ((xx % d == 0) | (yy % d == 0))
    candidates = sorted((y, x) for x, y in _cluster_representatives(on_grid))
    occupied = _Occupancy(eps, [n.coord for n in existing])
    next_id = max((n.id for n in existing), default=-1) + 1
    out = []
    for y, x in candidates:
        if occupied.clear(x, y):
            out.append(Node(next_id, x, y, "sample"))
            occupied.add((x, y))
            next_id += 1
    return out


def trace_segments(skeleton: Skeleton, nodes: list[Node]) -> list[Segment]:
    """Skeleton runs joining consecutive nodes.

    Pixels of a junction cluster all stand for the cluster's intersection
    node.  Node-free cycles are not reported.
    """
    bits, deg = skeleton.bits, skeleton.degree
    h, w = bits.shape
    stop: dict[tuple[int, int], int] = {}
    labels, _ = ndimage.label(bits & (deg >= 3), structure=_EIGHT)
    label_node = {}
    for n in nodes:
        lab = labels[n.y, n.x]
        if lab:
            label_node.setdefault(int(lab), n.id)
    ys, xs = np.nonzero(labels)
    for y, x in zip(ys.tolist(), xs.tolist()):
        nid = label_node.get(int(labels[y, x]))
        if nid is not None:
            stop[(x, y)] = nid
    for n in nodes:
        stop[n.coord] = n.id

    def neighbours(p):
        x, y = p
        for dy, dx in RING:
            q = (x + dx, y + dy)
            if 0 <= q[1] < h and 0 <= q[0] < w and bits[q[1], q[0]]:
                yield q

    used = set()
    segments = []
    limit = int(bits.sum()) + 1
    for p in sorted(stop, key=lambda q: (q[1], q[0])):
        for q in neighbours(p):
            if (p, q) in used:
                continue
            if q in stop:
                used.add((p, q))
                used.add((q, p))
                if stop[q] != stop[p]:
                    segments.append(Segment(stop[p], stop[q], (p, q)))
                continue
            path = [p, q]
            prev, cur = p, q
            end = None
            for _ in range(limit):
                nxt = [r for r in neighbours(cur) if r != prev]
                if len(nxt) != 1:
                    break
                prev, cur = cur, nxt[0]
                path.append(cur)
                if cur in stop:
                    end = stop[cur]
                    break
            used.add((p, q))
            if end is not None:
                used.add((path[-1], path[-2]))
                segments.append(Segment(stop[p], end, tuple(path)))
    return segments


def fill_gaps(skeleton: Skeleton, nodes: list[Node], d: int, eps: float) -> list[Node]:
    """Extra sample nodes wherever consecutive nodes end up farther apart than
    ``d * sqrt(2)`` (straight line) or ``2 d`` (along the skeleton).

    Gaps appear when a grid crossing was suppressed by the exclusion zone of
    a node on the other side of the crossing.
    """
    coords = {n.id: n.coord for n in nodes}
    occupied = _Occupancy(eps, coords.values())
    next_id = max(coords, default=-1) + 1
    bound = d * math.sqrt(2.0)
    added = []
    for seg in trace_segments(skeleton, nodes):
        px = seg.pixels
        steps = np.array([math.sqrt(2.0) if (a[0] != b[0] and a[1] != b[1]) else 1.0 for a, b in zip(px, px[1:])])
        geo = np.concatenate([[0.0], np.cumsum(steps)])
        end = coords[seg.b]
        anchor, anchor_xy = 0, coords[seg.a]
        while math.dist(anchor_xy, end) > bound or geo[-1] - geo[anchor] > 2 * d:
            pick = None
            j = int(np.searchsorted(geo, geo[anchor] + d, side="right")) - 1
            while j > anchor:
                if j < len(px) - 1 and occupied.clear(*px[j]):
                    pick = j
                    break
                j -= 1
            if pick is None:
                log.debug("cannot split skeleton gap between nodes %d and %d", seg.a, seg.b)
                break
            node = Node(next_id, px[pick][0], px[pick][1], "sample")
            next_id += 1
            added.append(node)
            occupied.add(node.coord)
            anchor, anchor_xy = pick, node.coord
    return added


def candidate_pairs(nodes: list[Node], r_max: float) -> list[tuple[int, int]]:
    """Unordered id pairs with Euclidean distance <= r_max, sorted."""
    if r_max <= 0:
        raise ValueError("r_max must be positive")
    if len(nodes) < 2:
        return []
    pts = np.array([n.coord for n in nodes], dtype=np.float64)
    ids = [n.id for n in nodes]
    tree = cKDTree(pts)
    r2 = r_max * r_max
    out = set()
    for i, j in tree.query_pairs(r_max * (1 + 1e-9) + 1e-9):
        dx, dy = pts[i] - pts[j]
        if dx * dx + dy * dy <= r2:
            a, b = ids[i], ids[j]
            out.add((min(a, b), max(a, b)))
    return sorted(out)


@dataclass(frozen=True)
class Extraction:
    skeleton: Skeleton
    nodes: tuple[Node, ...]
    graph: DelinGraph


def extract_nodes(grid: ScalarGrid, params: ExtractParams) -> tuple[Skeleton, list[Node]]:
    skel = skeletonize(threshold(grid, params.threshold), params.min_spur)
    nodes = find_significant_points(skel)
    nodes += sample_regular_nodes(skel, nodes, params.d, params.eps)
    nodes += fill_gaps(skel, nodes, params.d, params.eps)
    return skel, nodes


def connect_nodes(grid: ScalarGrid, nodes: list[Node], params: ExtractParams, jobs: int = 1) -> DelinGraph:
    by_id = {n.id: n for n in nodes}
    pairs = candidate_pairs(nodes, params.r_max)
    search = params.search_params

    def run(pair):
        u, v = pair
        return find_path(grid, by_id[u].coord, by_id[v].coord, search)

    if jobs > 1 and len(pairs) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(run, pairs))
    else:
        outcomes = [run(p) for p in pairs]
    edges = []
    for (u, v), out in zip(pairs, outcomes):
        if out.result is None:
            log.debug("no path between %d and %d (%s)", u, v, out.status.name)
            continue
        edges.append(make_edge(u, v, out.result.polyline, out.result.cost))
    return DelinGraph(tuple(nodes), tuple(edges))


def extract(grid: ScalarGrid, params: ExtractParams = ExtractParams(), jobs: int = 1) -> Extraction:
    skel, nodes = extract_nodes(grid, params)
    return Extraction(skel, tuple(nodes), connect_nodes(grid, nodes, params, jobs))


def build_overcomplete_graph(grid: ScalarGrid, params: ExtractParams = ExtractParams(), jobs: int = 1) -> DelinGraph:
    return extract(grid, params, jobs).graph
