"""Topology-aware comparison of a predicted graph against a ground-truth graph.

Both metrics pair up ground-truth significant points (endpoints and
junctions), find the closest predicted node within ``R`` of each, and
compare shortest paths.  NPD compares path lengths over every connected
pair; topological precision/recall compares the paths pixel by pixel for
pairs adjacent in the ground truth.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .graph import DelinGraph, Node
from .rng import XorShift64Star

MATCH_TARGETS = ("all", "significant")


@dataclass(frozen=True)
class NodeMatch:
    """Ground-truth node id -> ``(predicted node id, distance)`` or None."""

    pairs: dict

    def get(self, gt_id: int) -> Optional[int]:
        hit = self.pairs.get(gt_id)
        return None if hit is None else hit[0]


@dataclass(frozen=True)
class NpdReport:
    scores: tuple[float, ...]
    cdf: tuple[tuple[float, float], ...]


@dataclass(frozen=True)
class TopoPoint:
    m: float
    precision: float
    recall: float


def significant_points(graph: DelinGraph) -> list[Node]:
    deg = graph.degree()
    return [n for n in graph.nodes if deg[n.id] == 1 or deg[n.id] >= 3]


def match_points(gt_pts: Sequence[Node], pred: DelinGraph, R: float, target: str = "all") -> NodeMatch:
    """Nearest predicted node within ``R`` for each point, matched independently."""
    if R <= 0:
        raise ValueError("R must be positive")
    if target not in MATCH_TARGETS:
        raise ValueError(f"match target must be one of {MATCH_TARGETS}")
    cands = list(pred.nodes) if target == "all" else significant_points(pred)
    out = {}
    if not cands:
        return NodeMatch({p.id: None for p in gt_pts})
    xy = np.array([n.coord for n in cands], dtype=np.float64)
    ids = np.array([n.id for n in cands])
    for p in gt_pts:
        d = np.hypot(xy[:, 0] - p.x, xy[:, 1] - p.y)
        ok = d <= R
        if not ok.any():
            out[p.id] = None
            continue
        order = np.lexsort((ids, d))
        best = order[0]
        out[p.id] = (int(ids[best]), float(d[best]))
    return NodeMatch(out)


def _dijkstra(graph: DelinGraph, adj, src: int):
    dist = {src: 0.0}
    prev = {src: None}
    done = set()
    heap = [(0.0, src)]
    while heap:
        d, u = heapq.heappop(heap)
        if u in done:
            continue
        done.add(u)
        for v, e in adj[u]:
            nd = d + e.length
            if nd < dist.get(v, math.inf):
                dist[v] = nd
                prev[v] = (u, e)
                heapq.heappush(heap, (nd, v))
    return dist, prev


def _trace(prev, src: int, dst: int) -> tuple[tuple[int, int], ...]:
    hops = []
    cur = dst
    while cur != src:
        u, e = prev[cur]
        hops.append((u, cur, e))
        cur = u
    hops.reverse()
    pixels: list[tuple[int, int]] = []
    for u, _v, e in hops:
        pts = e.polyline if e.u == u else e.polyline[::-1]
        pixels.extend(pts if not pixels else pts[1:])
    return tuple(pixels)


def graph_shortest_path(graph: DelinGraph, a: int, b: int, adj=None):
    """``(polyline, length)`` of the shortest a-b path by polyline length, or None."""
    for nid in (a, b):
        if not graph.has_node(nid):
            raise KeyError(f"unknown node id {nid}")
    if a == b:
        return (graph.node(a).coord,), 0.0
    dist, prev = _dijkstra(graph, adj or graph.adjacency(), a)
    if b not in dist:
        return None
    return _trace(prev, a, b), dist[b]


def _cdf(scores: Sequence[float]) -> tuple[tuple[float, float], ...]:
    if not scores:
        return ()
    s = np.sort(np.asarray(scores, dtype=np.float64))
    xs = np.arange(101) / 100.0
    frac = np.searchsorted(s, xs, side="right") / len(s)
    return tuple((float(x), float(f)) for x, f in zip(xs, frac))


def npd(
    gt: DelinGraph,
    pred: DelinGraph,
    R: float,
    target: str = "all",
    max_pairs: Optional[int] = None,
    seed: int = 0,
) -> NpdReport:
    """Normalised path difference ``min(|l - l*| / l*, 1)`` over connected gt pairs.

    A pair scores 1 when either end has no match or the matched nodes are
    disconnected in the prediction.
    """
    pts = significant_points(gt)
    comp = gt.components()
    pairs = [(a.id, b.id) for i, a in enumerate(pts) for b in pts[i + 1 :] if comp[a.id] == comp[b.id]]
    if max_pairs is not None and len(pairs) > max_pairs:
        rng = XorShift64Star(seed)
        rng.shuffle(pairs)
        pairs = sorted(pairs[:max_pairs])
    match = match_points(pts, pred, R, target)
    gt_adj, pred_adj = gt.adjacency(), pred.adjacency()
    gt_dist, pred_dist = {}, {}
    scores = []
    for a, b in pairs:
        if a not in gt_dist:
            gt_dist[a] = _dijkstra(gt, gt_adj, a)[0]
        l_star = gt_dist[a][b]
        if l_star == 0:
            continue
        ma, mb = match.get(a), match.get(b)
        if ma is None or mb is None:
            scores.append(1.0)
            continue
        if ma not in pred_dist:
            pred_dist[ma] = _dijkstra(pred, pred_adj, ma)[0]
        length = pred_dist[ma].get(mb)
        if length is None:
            scores.append(1.0)
            continue
        scores.append(min(abs(length - l_star) / l_star, 1.0))
    return NpdReport(tuple(scores), _cdf(scores))


def adjacent_significant_pairs(gt: DelinGraph) -> list[tuple[int, int]]:
    """Significant-point pairs joined by a chain of degree-2 nodes (or directly)."""
    deg = gt.degree()
    sig = {n.id for n in significant_points(gt)}
    adj = gt.adjacency()
    pairs = set()
    for s in sorted(sig):
        for nxt, _ in adj[s]:
            prev, cur = s, nxt
            seen = {s}
            while cur not in sig and deg[cur] == 2 and cur not in seen:
                seen.add(cur)
                a, b = adj[cur]
                prev, cur = cur, (b[0] if a[0] == prev else a[0])
            if cur in sig and cur != s:
                pairs.add((min(s, cur), max(s, cur)))
    return sorted(pairs)


def _path_pairs(gt: DelinGraph, pred: DelinGraph, R: float, target: str):
    """gt/pred pixel arrays for every adjacent significant pair (pred may be None)."""
    pts = significant_points(gt)
    match = match_points(pts, pred, R, target)
    gt_adj, pred_adj = gt.adjacency(), pred.adjacency()
    out = []
    for a, b in adjacent_significant_pairs(gt):
        gpath = graph_shortest_path(gt, a, b, gt_adj)
        if gpath is None:
            continue
        ppath = None
        ma, mb = match.get(a), match.get(b)
        if ma is not None and mb is not None:
            found = graph_shortest_path(pred, ma, mb, pred_adj)
            if found is not None:
                ppath = np.array(found[0], dtype=np.float64)
        out.append((np.array(gpath[0], dtype=np.float64), ppath))
    return out


def matched_pairs(gt: DelinGraph, pred: DelinGraph, R: float, target: str = "all") -> set[tuple[int, int]]:
    """Adjacent gt pairs whose matched predicted nodes are connected."""
    return {
        pair
        for pair, (_, p) in zip(adjacent_significant_pairs(gt), _path_pairs(gt, pred, R, target))
        if p is not None
    }


def _within(points: np.ndarray, ref: np.ndarray, m: float) -> int:
    d, _ = cKDTree(ref).query(points, distance_upper_bound=m + 1e-9)
    return int(np.isfinite(d).sum())


def _precision_recall(paths, m: float) -> tuple[float, float]:
    weighted = 0.0
    n_m_total = 0
    gt_hit = 0
    gt_total = 0
    for gpix, ppix in paths:
        gt_total += len(gpix)
        if ppix is None:
            continue
        n_m = _within(ppix, gpix, m)
        n_t = len(ppix)
        weighted += n_m * n_m / n_t
        n_m_total += n_m
        gt_hit += _within(gpix, ppix, m)
    precision = weighted / n_m_total if n_m_total else 0.0
    recall = gt_hit / gt_total if gt_total else 0.0
    return precision, recall


def topo_pr(gt: DelinGraph, pred: DelinGraph, R: float, m: float, target: str = "all") -> tuple[float, float]:
    if m < 0:
        raise ValueError("m must be non-negative")
    return _precision_recall(_path_pairs(gt, pred, R, target), m)


def topo_curve(gt: DelinGraph, pred: DelinGraph, R: float, ms: Sequence[float], target: str = "all") -> list[TopoPoint]:
    paths = _path_pairs(gt, pred, R, target)
    return [TopoPoint(m, *_precision_recall(paths, m)) for m in ms]


def evaluate(
    gt: DelinGraph,
    pred: DelinGraph,
    R: float,
    ms: Sequence[float] = tuple(range(1, 11)),
    target: str = "all",
    max_pairs: Optional[int] = None,
    seed: int = 0,
) -> dict:
    """Full report in its JSON shape."""
    rep = npd(gt, pred, R, target, max_pairs, seed)
    curve = topo_curve(gt, pred, R, ms, target)
    return {
        "npd": {"scores": list(rep.scores), "cdf": [list(p) for p in rep.cdf]},
        "topo": [{"m": p.m, "precision": p.precision, "recall": p.recall} for p in curve],
        "params": {"R": float(R), "match": target},
    }
