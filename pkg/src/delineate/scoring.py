"""Edge scoring and threshold pruning.

Built-in scorers summarise tubularity along a path.  An external scorer is
any program speaking line-delimited JSON on stdin/stdout::

    -> {"width": W, "height": H, "values": [...], "polyline": [[x, y], ...]}
    <- {"score": s}

one response per request, in order.
"""

from __future__ import annotations

import json
import logging
import math
import queue
import shlex
import subprocess
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Optional, Sequence

from .astar import check_polyline
from .graph import DelinGraph
from .raster import ScalarGrid
from .samples import crop_patch, split_path

log = logging.getLogger(__name__)

VARIANTS = ("mean", "quantile", "external")


class ScorerError(RuntimeError):
    pass


class ScorerSpawnError(ScorerError):
    pass


class ScorerProtocolError(ScorerError):
    pass


class ScorerTimeout(ScorerError):
    pass


@dataclass(frozen=True)
class ScorerSpec:
    variant: str = "mean"
    q: float = 0.05
    command: tuple[str, ...] = ()
    patch_size: int = 256
    timeout: float = 30.0

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown scorer {self.variant!r}; expected one of {VARIANTS}")
        if not 0.0 <= self.q <= 1.0:
            raise ValueError("q must lie in [0, 1]")
        if self.patch_size < 32:
            raise ValueError("patch_size must be at least 32")
        if self.variant == "external" and not self.command:
            raise ValueError("external scorer needs a command")
        if isinstance(self.command, str):
            object.__setattr__(self, "command", tuple(shlex.split(self.command)))


def _values(grid: ScalarGrid, polyline) -> list[float]:
    check_polyline(grid, polyline)
    v = grid.values
    return [float(v[y, x]) for x, y in polyline]


def score_mean(grid: ScalarGrid, polyline) -> float:
    vals = _values(grid, polyline)
    return min(1.0, max(0.0, math.fsum(vals) / len(vals)))


def score_quantile(grid: ScalarGrid, polyline, q: float) -> float:
    """Nearest-rank ``q`` quantile of tubularity along the path."""
    if not 0.0 <= q <= 1.0:
        raise ValueError("q must lie in [0, 1]")
    vals = sorted(_values(grid, polyline))
    rank = max(1, math.ceil(q * len(vals) - 1e-9))
    return vals[rank - 1]


class ExternalScorer:
    """One child process answering scoring requests in order."""

    def __init__(self, command: Sequence[str], timeout: float = 30.0):
        self.command = list(command)
        self.timeout = timeout
        try:
            self.proc = subprocess.Popen(
                self.command,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                text=True,
                encoding="utf-8",
                bufsize=1,
            )
        except OSError as exc:
            raise ScorerSpawnError(f"cannot start scorer {self.command!r}: {exc}") from None
        self._lines: queue.Queue = queue.Queue()
        self._reader = threading.Thread(target=self._pump, daemon=True)
        self._reader.start()

    def _pump(self):
        for line in self.proc.stdout:
            self._lines.put(line)
        self._lines.put(None)

    def request(self, width: int, height: int, values, polyline) -> float:
        msg = json.dumps({"width": width, "height": height, "values": values, "polyline": [list(p) for p in polyline]})
        try:
            self.proc.stdin.write(msg + "\n")
            self.proc.stdin.flush()
        except (BrokenPipeError, OSError, ValueError):
            raise ScorerProtocolError("scorer exited before accepting a request") from None
        try:
            line = self._lines.get(timeout=self.timeout)
        except queue.Empty:
            raise ScorerTimeout(f"no response within {self.timeout} s") from None
        if line is None:
            raise ScorerProtocolError("scorer exited before responding")
        try:
            reply = json.loads(line)
            score = float(reply["score"])
        except (json.JSONDecodeError, KeyError, TypeError, ValueError):
            raise ScorerProtocolError(f"malformed response line: {line.strip()[:200]!r}") from None
        if math.isnan(score):
            raise ScorerProtocolError("scorer returned NaN")
        return min(1.0, max(0.0, score))

    def close(self):
        if self.proc.poll() is None:
            try:
                self.proc.stdin.close()
            except OSError:
                pass
            try:
                self.proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                self.proc.kill()
                self.proc.wait()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def score_external(spec: ScorerSpec, grid: ScalarGrid, polyline, scorer: Optional[ExternalScorer] = None) -> float:
    """Score through the external classifier; long paths score as their worst piece."""
    check_polyline(grid, polyline)
    own = scorer is None
    if own:
        scorer = ExternalScorer(spec.command, spec.timeout)
    try:
        worst = 1.0
        for piece in split_path(polyline, spec.patch_size):
            patch, local, _ = crop_patch(grid, piece, spec.patch_size)
            s = scorer.request(patch.width, patch.height, patch.values.ravel().tolist(), local)
            worst = min(worst, s)
        return worst
    finally:
        if own:
            scorer.close()


def _builtin(spec: ScorerSpec):
    if spec.variant == "mean":
        return score_mean
    return lambda grid, poly: score_quantile(grid, poly, spec.q)


def score_graph(graph: DelinGraph, grid: ScalarGrid, spec: ScorerSpec = ScorerSpec(), jobs: int = 1) -> DelinGraph:
    """Copy of ``graph`` with every edge scored."""
    edges = list(graph.edges)
    if not edges:
        return graph
    if spec.variant != "external":
        fn = _builtin(spec)
        scores = [fn(grid, e.polyline) for e in edges]
    else:
        workers = max(1, min(jobs, len(edges)))
        chunks = [edges[i::workers] for i in range(workers)]

        def run(chunk):
            with ExternalScorer(spec.command, spec.timeout) as proc:
                return [score_external(spec, grid, e.polyline, proc) for e in chunk]

        if workers == 1:
            results = [run(chunks[0])]
        else:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(run, chunks))
        scores = [0.0] * len(edges)
        for i, chunk_scores in enumerate(results):
            scores[i::workers] = chunk_scores
    return graph.with_edges(replace(e, score=float(s)) for e, s in zip(edges, scores))


def prune(graph: DelinGraph, tau: float) -> DelinGraph:
    """Keep edges scoring at least ``tau``; drop nodes left without edges."""
    for e in graph.edges:
        if e.score is None:
            raise ValueError(f"edge ({e.u}, {e.v}) has no score")
    kept = [e for e in graph.edges if e.score >= tau]
    used = {e.u for e in kept} | {e.v for e in kept}
    return DelinGraph(tuple(n for n in graph.nodes if n.id in used), tuple(kept))
