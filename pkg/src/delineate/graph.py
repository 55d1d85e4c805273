"""Undirected geometric graph with pixel polylines, plus its JSON form."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Optional

from .astar import polyline_length

KINDS = ("endpoint", "intersection", "sample")


class GraphFormatError(ValueError):
    pass


@dataclass(frozen=True)
class Node:
    id: int
    x: int
    y: int
    kind: str = "sample"

    @property
    def coord(self) -> tuple[int, int]:
        return (self.x, self.y)


@dataclass(frozen=True)
class Edge:
    u: int
    v: int
    polyline: tuple[tuple[int, int], ...]
    length: float
    cost: float = 0.0
    score: Optional[float] = None

    @property
    def key(self) -> tuple[int, int]:
        return (self.u, self.v)


def make_edge(u: int, v: int, polyline, cost: float = 0.0, score=None) -> Edge:
    """Build an edge with ``u < v``, reversing ``polyline`` when needed."""
    pts = tuple((int(x), int(y)) for x, y in polyline)
    if u > v:
        u, v, pts = v, u, pts[::-1]
    return Edge(u, v, pts, polyline_length(pts), float(cost), score)


@dataclass(frozen=True)
class DelinGraph:
    nodes: tuple[Node, ...] = ()
    edges: tuple[Edge, ...] = ()
    _index: dict = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        nodes = tuple(sorted(self.nodes, key=lambda n: n.id))
        edges = tuple(sorted(self.edges, key=lambda e: (e.u, e.v)))
        index = {}
        for n in nodes:
            if n.id in index:
                raise ValueError(f"duplicate node id {n.id}")
            if n.kind not in KINDS:
                raise ValueError(f"unknown node kind {n.kind!r}")
            index[n.id] = n
        seen = set()
        for e in edges:
            if e.u == e.v:
                raise ValueError(f"self-loop on node {e.u}")
            if e.u > e.v:
                raise ValueError(f"edge ({e.u}, {e.v}) must be stored with u < v")
            if e.u not in index or e.v not in index:
                raise ValueError(f"edge ({e.u}, {e.v}) references a missing node")
            if e.key in seen:
                raise ValueError(f"duplicate edge ({e.u}, {e.v})")
            seen.add(e.key)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "_index", index)

    def node(self, nid: int) -> Node:
        return self._index[nid]

    def has_node(self, nid: int) -> bool:
        return nid in self._index

    def degree(self) -> dict[int, int]:
        deg = {n.id: 0 for n in self.nodes}
        for e in self.edges:
            deg[e.u] += 1
            deg[e.v] += 1
        return deg

    def adjacency(self) -> dict[int, list[tuple[int, Edge]]]:
        adj = {n.id: [] for n in self.nodes}
        for e in self.edges:
            adj[e.u].append((e.v, e))
            adj[e.v].append((e.u, e))
        return adj

    def with_edges(self, edges: Iterable[Edge]) -> "DelinGraph":
        return DelinGraph(self.nodes, tuple(edges))

    def components(self) -> dict[int, int]:
        """Node id -> component label (smallest node id in the component)."""
        parent = {n.id: n.id for n in self.nodes}

        def find(a):
            while parent[a] != a:
                parent[a] = parent[parent[a]]
                a = parent[a]
            return a

        for e in self.edges:
            ra, rb = find(e.u), find(e.v)
            if ra != rb:
                parent[max(ra, rb)] = min(ra, rb)
        return {nid: find(nid) for nid in parent}


# ---------------------------------------------------------------------------
# JSON


def _num(x) -> str:
    if isinstance(x, bool):
        raise TypeError("booleans are not numbers here")
    if isinstance(x, int):
        return str(x)
    x = float(x)
    if not math.isfinite(x):
        raise ValueError("non-finite float cannot be serialised")
    text = format(x, ".17g")
    if "e" not in text and "." not in text and "inf" not in text:
        text += ".0"
    return text


def dumps(obj) -> str:
    """Compact JSON with floats written to 17 significant digits."""
    if obj is None:
        return "null"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, (int, float)):
        return _num(obj)
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        return "{" + ",".join(f"{json.dumps(str(k))}:{dumps(v)}" for k, v in obj.items()) + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ",".join(dumps(v) for v in obj) + "]"
    if hasattr(obj, "item"):
        return dumps(obj.item())
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def graph_to_obj(graph: DelinGraph) -> dict:
    return {
        "nodes": [{"id": n.id, "x": n.x, "y": n.y, "kind": n.kind} for n in graph.nodes],
        "edges": [
            {
                "u": e.u,
                "v": e.v,
                "polyline": [[x, y] for x, y in e.polyline],
                "length": float(e.length),
                "cost": float(e.cost),
                "score": None if e.score is None else float(e.score),
            }
            for e in graph.edges
        ],
    }


def graph_to_json(graph: DelinGraph) -> str:
    return dumps(graph_to_obj(graph)) + "\n"


def graph_from_obj(obj) -> DelinGraph:
    try:
        nodes = [Node(int(n["id"]), int(n["x"]), int(n["y"]), str(n["kind"])) for n in obj["nodes"]]
        edges = []
        for e in obj["edges"]:
            score = e.get("score")
            edges.append(
                Edge(
                    int(e["u"]),
                    int(e["v"]),
                    tuple((int(p[0]), int(p[1])) for p in e["polyline"]),
                    float(e["length"]),
                    float(e["cost"]),
                    None if score is None else float(score),
                )
            )
        graph = DelinGraph(tuple(nodes), tuple(edges))
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise GraphFormatError(f"invalid graph document: {exc}") from None
    for e in graph.edges:
        if not e.polyline:
            raise GraphFormatError(f"edge ({e.u}, {e.v}) has an empty polyline")
        if e.polyline[0] != graph.node(e.u).coord or e.polyline[-1] != graph.node(e.v).coord:
            raise GraphFormatError(f"edge ({e.u}, {e.v}) polyline does not join its nodes")
        if any(max(abs(a[0] - b[0]), abs(a[1] - b[1])) != 1 for a, b in zip(e.polyline, e.polyline[1:])):
            raise GraphFormatError(f"edge ({e.u}, {e.v}) polyline has a gap or a repeated pixel")
        if abs(polyline_length(e.polyline) - e.length) > 1e-9:
            raise GraphFormatError(f"edge ({e.u}, {e.v}) length disagrees with its polyline")
    return graph


def graph_from_json(text: str) -> DelinGraph:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise GraphFormatError(f"not JSON: {exc}") from None
    if not isinstance(obj, dict):
        raise GraphFormatError("graph document must be a JSON object")
    return graph_from_obj(obj)


def load_graph(path) -> DelinGraph:
    with open(path, encoding="utf-8") as fh:
        return graph_from_json(fh.read())


def save_graph(graph: DelinGraph, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(graph_to_json(graph))


def rescore(graph: DelinGraph, scores: dict[tuple[int, int], float]) -> DelinGraph:
    return graph.with_edges(replace(e, score=float(scores[e.key])) for e in graph.edges)
