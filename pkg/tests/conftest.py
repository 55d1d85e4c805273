import sys
from pathlib import Path

import numpy as np
import pytest

STUBS = Path(__file__).parent / "stubs"


def stub_command(name: str) -> tuple[str, ...]:
    return (sys.executable, str(STUBS / name))


def random_grid(seed: int, h: int = 64, w: int = 64) -> np.ndarray:
    return np.random.default_rng(seed).random((h, w))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def thick_lines(shape, segments, half=2):
    """Binary image of straight segments ((x0, y0), (x1, y1)) with the given half-width."""
    from skimage.draw import line

    bits = np.zeros(shape, dtype=bool)
    for (x0, y0), (x1, y1) in segments:
        rr, cc = line(y0, x0, y1, x1)
        for dy in range(-half, half + 1):
            for dx in range(-half, half + 1):
                if dy * dy + dx * dx <= half * half:
                    r, c = rr + dy, cc + dx
                    ok = (r >= 0) & (r < shape[0]) & (c >= 0) & (c < shape[1])
                    bits[r[ok], c[ok]] = True
    return bits


def consecutive_node_pairs(skel_bits, nodes):
    """Pairs of nodes joined by skeleton pixels that pass no other node.

    Junction clumps (8-connected pixels of degree >= 3) count as their node.
    """
    from scipy import ndimage

    eight = np.ones((3, 3), dtype=bool)
    padded = np.pad(skel_bits, 1).astype(int)
    deg = sum(np.roll(np.roll(padded, dy, 0), dx, 1) for dy in (-1, 0, 1) for dx in (-1, 0, 1)) - padded
    deg = deg[1:-1, 1:-1]
    clumps, _ = ndimage.label(skel_bits & (deg >= 3), structure=eight)
    owner = np.full(skel_bits.shape, -1)
    for n in nodes:
        if clumps[n.y, n.x]:
            owner[clumps == clumps[n.y, n.x]] = n.id
    for n in nodes:
        owner[n.y, n.x] = n.id
    free = skel_bits & (owner < 0)
    runs, count = ndimage.label(free, structure=eight)
    h, w = skel_bits.shape
    touching = [set() for _ in range(count + 1)]
    pairs = set()
    for y, x in np.argwhere(owner >= 0):
        a = owner[y, x]
        for dy in (-1, 0, 1):
            for dx in (-1, 0, 1):
                yy, xx = y + dy, x + dx
                if (dy or dx) and 0 <= yy < h and 0 <= xx < w and skel_bits[yy, xx]:
                    if runs[yy, xx]:
                        touching[runs[yy, xx]].add(a)
                    elif owner[yy, xx] >= 0 and owner[yy, xx] != a:
                        pairs.add(tuple(sorted((a, owner[yy, xx]))))
    for ids in touching:
        ids = sorted(ids)
        pairs.update((ids[i], ids[j]) for i in range(len(ids)) for j in range(i + 1, len(ids)))
    return pairs


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
