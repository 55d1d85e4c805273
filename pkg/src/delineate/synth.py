"""Seeded synthetic curvilinear networks with matching masks and tubularity maps."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage
from scipy.spatial import cKDTree

from .graph import DelinGraph, Node, make_edge
from .raster import BinaryMask, ScalarGrid, dilate
from .rng import XorShift64Star

# smallest angle (degrees) an extra loop edge may make with an existing edge
MIN_LOOP_ANGLE = 45.0


@dataclass(frozen=True)
class SynthParams:
    seed: int = 0
    extent: int = 512
    n_seeds: int = 12
    loop_prob: float = 0.1
    w: int = 5
    sigma: float = 1.0
    noise_amp: float = 0.05

    def __post_init__(self):
        if self.extent < 64:
            raise ValueError("extent must be at least 64")
        if self.w < 1:
            raise ValueError("w must be at least 1")
        if self.n_seeds < 2:
            raise ValueError("need at least two seeds")
        if not 0.0 <= self.loop_prob <= 1.0:
            raise ValueError("loop_prob must lie in [0, 1]")
        if not 0.0 <= self.noise_amp <= 1.0:
            raise ValueError("noise_amp must lie in [0, 1]")
        if self.sigma < 0:
            raise ValueError("sigma must be non-negative")

    @property
    def clearance(self) -> float:
        return max(4.0 * self.w, self.extent / 32)


def _segment_point_distance(p, a, b) -> float:
    ax, ay = a
    bx, by = b
    dx, dy = bx - ax, by - ay
    L2 = dx * dx + dy * dy
    t = 0.0 if L2 == 0 else max(0.0, min(1.0, ((p[0] - ax) * dx + (p[1] - ay) * dy) / L2))
    return math.hypot(p[0] - ax - t * dx, p[1] - ay - t * dy)


def _segments_cross(a, b, c, d) -> bool:
    def orient(p, q, r):
        v = (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0])
        return (v > 0) - (v < 0)

    if len({a, b, c, d}) < 4:
        return False
    return orient(a, b, c) * orient(a, b, d) < 0 and orient(c, d, a) * orient(c, d, b) < 0


def _angle_between(o, p, q) -> float:
    v1 = (p[0] - o[0], p[1] - o[1])
    v2 = (q[0] - o[0], q[1] - o[1])
    c = (v1[0] * v2[0] + v1[1] * v2[1]) / (math.hypot(*v1) * math.hypot(*v2))
    return math.degrees(math.acos(max(-1.0, min(1.0, c))))


def _emst(pts) -> list[tuple[int, int]]:
    """Prim's algorithm; ties resolved by lowest index."""
    n = len(pts)
    in_tree = [False] * n
    best = [math.inf] * n
    link = [-1] * n
    best[0] = 0.0
    edges = []
    for _ in range(n):
        i = min((j for j in range(n) if not in_tree[j]), key=lambda j: (best[j], j))
        in_tree[i] = True
        if link[i] >= 0:
            edges.append((min(i, link[i]), max(i, link[i])))
        for j in range(n):
            if not in_tree[j]:
                dd = math.dist(pts[i], pts[j])
                if dd < best[j]:
                    best[j], link[j] = dd, i
    return sorted(edges)


def _clear_of_seeds(pts, edges, clearance) -> bool:
    for a, b in edges:
        for c, p in enumerate(pts):
            if c not in (a, b) and _segment_point_distance(p, pts[a], pts[b]) < clearance:
                return False
    return True


def _chaikin(points: np.ndarray, rounds: int = 3) -> np.ndarray:
    for _ in range(rounds):
        q = 0.75 * points[:-1] + 0.25 * points[1:]
        r = 0.25 * points[:-1] + 0.75 * points[1:]
        mid = np.empty((2 * len(q), 2))
        mid[0::2], mid[1::2] = q, r
        points = np.vstack([points[:1], mid, points[-1:]])
    return points


def _curve(a, b, rng: XorShift64Star) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    v = b - a
    length = float(np.hypot(*v))
    normal = np.array([-v[1], v[0]]) / length
    ctrl = [a]
    for t in (0.25, 0.5, 0.75):
        amp = 0.08 * length * math.sin(math.pi * t) * rng.uniform(-1.0, 1.0)
        ctrl.append(a + t * v + amp * normal)
    ctrl.append(b)
    return _chaikin(np.array(ctrl))


def rasterize(points: np.ndarray) -> list[tuple[int, int]]:
    """8-connected pixel path through a dense float polyline.

    Revisited pixels cut the loop they close, and corner pixels whose
    neighbours touch diagonally are dropped.
    """
    out: list[tuple[int, int]] = []
    where: dict[tuple[int, int], int] = {}
    for (x0, y0), (x1, y1) in zip(points[:-1], points[1:]):
        steps = max(1, int(math.ceil(math.hypot(x1 - x0, y1 - y0) / 0.25)))
        for s in range(steps + 1):
            t = s / steps
            p = (int(round(x0 + t * (x1 - x0))), int(round(y0 + t * (y1 - y0))))
            if out and p == out[-1]:
                continue
            if p in where:
                for q in out[where[p] + 1 :]:
                    del where[q]
                del out[where[p] + 1 :]
                continue
            where[p] = len(out)
            out.append(p)
    cleaned = [out[0]]
    for i in range(1, len(out) - 1):
        a, c = cleaned[-1], out[i + 1]
        if max(abs(a[0] - c[0]), abs(a[1] - c[1])) <= 1:
            continue
        cleaned.append(out[i])
    if len(out) > 1:
        cleaned.append(out[-1])
    return cleaned


def _loop_allowed(pts, edges, incident, i, j, clearance) -> bool:
    """A straight extra edge i-j must not cross, crowd, or meet an edge at a sharp angle."""
    if any(_segments_cross(pts[i], pts[j], pts[a], pts[b]) for a, b in edges):
        return False
    if any(_angle_between(pts[i], pts[j], pts[k]) < MIN_LOOP_ANGLE for k in incident[i]):
        return False
    if any(_angle_between(pts[j], pts[i], pts[k]) < MIN_LOOP_ANGLE for k in incident[j]):
        return False
    if not _clear_of_seeds(pts, [(i, j)], clearance):
        return False
    for a, b in edges:
        if {a, b} & {i, j}:
            continue
        if min(_segment_point_distance(pts[i], pts[a], pts[b]), _segment_point_distance(pts[j], pts[a], pts[b])) < clearance:
            return False
    return True


def gen_network(params: SynthParams) -> DelinGraph:
    """Random planar network: Euclidean MST over seed points plus optional loops."""
    rng = XorShift64Star(params.seed)
    ext = params.extent
    margin = max(2 * params.w, ext // 16)
    spacing = 0.5 * ext / math.sqrt(params.n_seeds)
    clearance = params.clearance
    pts = []
    tree = []
    for _attempt in range(200):
        pts = []
        tries = 0
        while len(pts) < params.n_seeds and tries < 10000:
            tries += 1
            p = (margin + rng.randbelow(ext - 2 * margin), margin + rng.randbelow(ext - 2 * margin))
            if all(math.dist(p, q) >= spacing for q in pts):
                pts.append(p)
        if len(pts) < params.n_seeds:
            spacing *= 0.9
            continue
        tree = _emst(pts)
        if _clear_of_seeds(pts, tree, clearance):
            break
    edges = list(tree)

    longest = max(math.dist(pts[a], pts[b]) for a, b in tree)
    incident = {i: [] for i in range(len(pts))}
    for a, b in edges:
        incident[a].append(b)
        incident[b].append(a)
    n = len(pts)
    for i in range(n):
        for j in range(i + 1, n):
            if (i, j) in edges or math.dist(pts[i], pts[j]) > longest:
                continue
            if rng.random() >= params.loop_prob:
                continue
            if not _loop_allowed(pts, edges, incident, i, j, clearance):
                continue
            edges.append((i, j))
            incident[i].append(j)
            incident[j].append(i)
    edges.sort()

    polylines = {}
    for a, b in edges:
        curved = rasterize(_curve(pts[a], pts[b], rng))
        cand = np.array(curved, dtype=float)
        ok = True
        for (c, e), other in polylines.items():
            if {c, e} & {a, b}:
                continue
            dist, _ = cKDTree(np.array(other, dtype=float)).query(cand)
            if dist.min() < clearance:
                ok = False
                break
        if not ok:
            curved = rasterize(np.array([pts[a], pts[b]], dtype=float))
        polylines[(a, b)] = curved

    deg = [len(incident[i]) for i in range(n)]
    kinds = ["endpoint" if k == 1 else "intersection" if k >= 3 else "sample" for k in deg]
    nodes = tuple(Node(i, pts[i][0], pts[i][1], kinds[i]) for i in range(n))
    return DelinGraph(nodes, tuple(make_edge(a, b, polylines[(a, b)]) for a, b in edges))


def render_mask(graph: DelinGraph, w: int, extent: int) -> BinaryMask:
    bits = np.zeros((extent, extent), dtype=bool)
    for e in graph.edges:
        for x, y in e.polyline:
            if 0 <= x < extent and 0 <= y < extent:
                bits[y, x] = True
    for n in graph.nodes:
        if 0 <= n.x < extent and 0 <= n.y < extent:
            bits[n.y, n.x] = True
    return dilate(BinaryMask(bits), (w - 1) / 2)


def render_tubularity(mask: BinaryMask, sigma: float, noise_amp: float, seed: int) -> ScalarGrid:
    v = mask.bits.astype(np.float64)
    if sigma > 0:
        v = ndimage.gaussian_filter(v, sigma, mode="constant")
    if noise_amp > 0:
        u = XorShift64Star(seed).random_array(v.size).reshape(v.shape)
        v = v + noise_amp * (2.0 * u - 1.0)
    return ScalarGrid(np.clip(v, 0.0, 1.0))


def synth(params: SynthParams) -> tuple[DelinGraph, BinaryMask, ScalarGrid]:
    graph = gen_network(params)
    mask = render_mask(graph, params.w, params.extent)
    return graph, mask, render_tubularity(mask, params.sigma, params.noise_amp, params.seed)
