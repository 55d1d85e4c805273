"""Labelled path samples for training an external path classifier."""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .graph import dumps
from .graphx import ExtractParams, build_overcomplete_graph
from .raster import BinaryMask, ScalarGrid, dilate, save_pgm

Pixel = tuple[int, int]


@dataclass(frozen=True)
class PathSample:
    polyline: tuple[Pixel, ...]
    label: int
    overlap: float
    patch_origin: Pixel
    patch_path: Optional[str] = None

    def to_json(self) -> str:
        return dumps(
            {
                "polyline": [list(p) for p in self.polyline],
                "label": self.label,
                "overlap": self.overlap,
                "patch": self.patch_path,
                "origin": list(self.patch_origin),
            }
        )


def _on_count(polyline: Sequence[Pixel], bits: np.ndarray) -> int:
    if len(polyline) == 0:
        raise ValueError("polyline is empty")
    h, w = bits.shape
    on = 0
    for x, y in polyline:
        if not (0 <= x < w and 0 <= y < h):
            raise ValueError(f"pixel {(x, y)} lies outside the mask")
        on += bool(bits[y, x])
    return on


def overlap_fraction(polyline: Sequence[Pixel], gt: BinaryMask, rho: float = 1.0) -> float:
    """Share of polyline pixels on the ground truth dilated by ``rho``."""
    if rho < 0:
        raise ValueError("rho must be non-negative")
    return _on_count(polyline, dilate(gt, rho).bits) / len(polyline)


def _is_positive(on: int, total: int) -> bool:
    # strictly more than 90 %, in exact integer arithmetic
    return 10 * on > 9 * total


def label_path(polyline: Sequence[Pixel], gt: BinaryMask, rho: float = 1.0) -> int:
    """1 when more than 90 % of the path lies on the (dilated) ground truth, else 0."""
    if rho < 0:
        raise ValueError("rho must be non-negative")
    return int(_is_positive(_on_count(polyline, dilate(gt, rho).bits), len(polyline)))


def _side(points) -> int:
    return max(points) - min(points) + 1


def split_path(polyline: Sequence[Pixel], max_span: int) -> list[tuple[Pixel, ...]]:
    """Greedy left-to-right split into pieces whose bounding box fits ``max_span``.

    Consecutive pieces share their junction pixel.
    """
    if max_span < 2:
        raise ValueError("max_span must be at least 2")
    pts = tuple((int(x), int(y)) for x, y in polyline)
    if not pts:
        return []
    pieces = []
    start = 0
    n = len(pts)
    while True:
        xmin = xmax = pts[start][0]
        ymin = ymax = pts[start][1]
        end = start
        while end + 1 < n:
            x, y = pts[end + 1]
            nx0, nx1 = min(xmin, x), max(xmax, x)
            ny0, ny1 = min(ymin, y), max(ymax, y)
            if nx1 - nx0 + 1 > max_span or ny1 - ny0 + 1 > max_span:
                break
            xmin, xmax, ymin, ymax = nx0, nx1, ny0, ny1
            end += 1
        pieces.append(pts[start : end + 1])
        if end == n - 1:
            return pieces
        start = end


def crop_patch(grid: ScalarGrid, polyline: Sequence[Pixel], size: int):
    """Square ``size`` patch centred on the polyline's bounding box.

    Returns ``(patch, local_polyline, origin)``; pixels outside the image
    are zero.
    """
    xs = [p[0] for p in polyline]
    ys = [p[1] for p in polyline]
    if not xs:
        raise ValueError("polyline is empty")
    sx, sy = _side(xs), _side(ys)
    if sx > size or sy > size:
        raise ValueError(f"polyline spans {sx}x{sy} pixels, more than the {size} patch; split it first")
    ox = min(xs) - math.ceil((size - sx) / 2)
    oy = min(ys) - math.ceil((size - sy) / 2)
    patch = np.zeros((size, size), dtype=np.float64)
    x0, y0 = max(ox, 0), max(oy, 0)
    x1, y1 = min(ox + size, grid.width), min(oy + size, grid.height)
    if x0 < x1 and y0 < y1:
        patch[y0 - oy : y1 - oy, x0 - ox : x1 - ox] = grid.values[y0:y1, x0:x1]
    local = tuple((x - ox, y - oy) for x, y in polyline)
    return ScalarGrid(patch), local, (ox, oy)


def generate_samples(
    grid: ScalarGrid,
    gt: BinaryMask,
    params: ExtractParams = ExtractParams(),
    rho: float = 1.0,
    patch_size: int = 256,
    outdir=None,
    jobs: int = 1,
) -> list[PathSample]:
    """Label every candidate path of the overcomplete graph built from ``grid``.

    Paths wider than a patch are split and each piece is labelled on its
    own.  With ``outdir`` set, patches go to ``outdir/patches`` and the
    manifest to ``outdir/manifest.jsonl``.
    """
    if grid.values.shape != gt.bits.shape:
        raise ValueError("tubularity grid and ground-truth mask differ in size")
    graph = build_overcomplete_graph(grid, params, jobs)
    band = dilate(gt, rho).bits
    if outdir is not None:
        os.makedirs(os.path.join(outdir, "patches"), exist_ok=True)
    samples = []
    for edge in graph.edges:
        for piece in split_path(edge.polyline, patch_size):
            on = _on_count(piece, band)
            patch, _, origin = crop_patch(grid, piece, patch_size)
            rel = None
            if outdir is not None:
                rel = f"patches/{len(samples):06d}.pgm"
                save_pgm(patch, os.path.join(outdir, rel))
            samples.append(PathSample(piece, int(_is_positive(on, len(piece))), on / len(piece), origin, rel))
    if outdir is not None:
        write_manifest(samples, os.path.join(outdir, "manifest.jsonl"))
    return samples


def write_manifest(samples: Sequence[PathSample], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for s in samples:
            fh.write(s.to_json() + "\n")
