"""Hex connectivity on the square lattice Q = (Z^2 / n) intersected with [-1,1]^2.

Lattice points are integer index pairs (i, j) with |i|, |j| <= n standing for
the plane points (i/n, j/n).  Two same-colored points are adjacent when their
index difference has max-norm 1 and the coordinate sums differ, which keeps
the east, west, north, south, north-east and south-west neighbors and drops
the anti-diagonal pair; this is the usual hexagonal board drawn on a square
grid.  For every two-coloring there is a white path joining the left and
right faces or a black path joining the top and bottom faces; the module
provides a path-returning search and fast exhaustive / bulk checkers so that
statement is testable rather than folklore.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .errors import DomainError

__all__ = [
    "LatticeColoring",
    "CrossingResult",
    "adjacent",
    "neighbors",
    "find_crossing",
    "color_by_preimage",
    "mesh_for_epsilon",
    "winner_exists_batch",
    "exhaustive_winner_check",
    "random_winner_check",
]

# fixed neighbor order: deterministic searches and reproducible paths
_STEPS = ((-1, -1), (-1, 0), (0, -1), (0, 1), (1, 0), (1, 1))


@dataclass(frozen=True)
class LatticeColoring:
    """2-coloring of the (2n+1)^2 lattice; black[j+n, i+n] is True for black."""

    n: int
    black: np.ndarray

    def __post_init__(self):
        if self.n < 1:
            raise DomainError("lattice parameter n must be positive")
        b = np.asarray(self.black, dtype=bool)
        object.__setattr__(self, "black", b)
        m = 2 * self.n + 1
        if b.shape != (m, m):
            raise DomainError(f"coloring must be {(m, m)}, got {b.shape}")

    def is_black(self, point: tuple[int, int]) -> bool:
        i, j = point
        return bool(self.black[j + self.n, i + self.n])

    def world(self, point: tuple[int, int]) -> tuple[float, float]:
        return (point[0] / self.n, point[1] / self.n)


@dataclass(frozen=True)
class CrossingResult:
    white_lr_path: list[tuple[int, int]] | None
    black_tb_path: list[tuple[int, int]] | None

    @property
    def winner_exists(self) -> bool:
        return self.white_lr_path is not None or self.black_tb_path is not None


def _check_point(p, n: int) -> tuple[int, int]:
    i, j = p
    if int(i) != i or int(j) != j or abs(i) > n or abs(j) > n:
        raise DomainError(f"{p} is not a lattice point for n={n}")
    return int(i), int(j)


def adjacent(a, b, n: int) -> bool:
    """Adjacency on Q: index max-norm step of 1 with unequal coordinate sums."""
    ai, aj = _check_point(a, n)
    bi, bj = _check_point(b, n)
    di, dj = bi - ai, bj - aj
    return max(abs(di), abs(dj)) == 1 and (ai + aj) != (bi + bj)


def neighbors(p, n: int) -> list[tuple[int, int]]:
    i, j = _check_point(p, n)
    out = []
    for di, dj in _STEPS:
        ii, jj = i + di, j + dj
        if abs(ii) <= n and abs(jj) <= n:
            out.append((ii, jj))
    return out


def _bfs_path(coloring: LatticeColoring, color_black: bool,
              starts: list[tuple[int, int]], goal) -> list[tuple[int, int]] | None:
    """Deterministic breadth-first path over one color class."""
    n = coloring.n
    want = bool(color_black)
    parent: dict[tuple[int, int], tuple[int, int] | None] = {}
    queue = deque()
    for s in sorted(starts):
        if coloring.is_black(s) == want and s not in parent:
            parent[s] = None
            queue.append(s)
    while queue:
        cur = queue.popleft()
        if goal(cur):
            path = [cur]
            while parent[path[-1]] is not None:
                path.append(parent[path[-1]])
            path.reverse()
            return path
        for nb in neighbors(cur, n):
            if nb not in parent and coloring.is_black(nb) == want:
                parent[nb] = cur
                queue.append(nb)
    return None


def find_crossing(coloring: LatticeColoring) -> CrossingResult:
    """Search both monochromatic crossings.

    White connects the vertical faces {x = -1} and {x = +1}, black the
    horizontal faces {y = +1} and {y = -1}.  Corner points belong to both a
    vertical and a horizontal face.  Paths are breadth-first shortest from
    the lexicographically smallest admissible start, so repeated runs return
    identical fixtures.  At least one crossing always exists.
    """
    n = coloring.n
    left = [(-n, j) for j in range(-n, n + 1)]
    top = [(i, n) for i in range(-n, n + 1)]
    white = _bfs_path(coloring, False, left, lambda p: p[0] == n)
    black = _bfs_path(coloring, True, top, lambda p: p[1] == -n)
    return CrossingResult(white_lr_path=white, black_tb_path=black)


def color_by_preimage(Fh, n: int, x, eps: float) -> LatticeColoring:
    """Color black exactly the lattice points p with |Fh(p) - x| <= eps."""
    if eps <= 0:
        raise DomainError("eps must be positive")
    m = 2 * n + 1
    idx = np.arange(-n, n + 1) / n
    X, Y = np.meshgrid(idx, idx)
    pts = np.column_stack([X.ravel(), Y.ravel()])
    img = np.asarray(Fh(pts), dtype=float)
    target = np.asarray(getattr(x, "as_array", lambda: x)(), dtype=float).reshape(2)
    dist = np.hypot(img[:, 0] - target[0], img[:, 1] - target[1])
    return LatticeColoring(n=n, black=(dist <= eps).reshape(m, m))


def mesh_for_epsilon(holder_constant: float, alpha: float, eps: float) -> int:
    """Smallest n with holder_constant * 2**(alpha/2) * n**(-alpha) <= eps."""
    if eps <= 0:
        raise DomainError("eps must be positive")
    if holder_constant < 0 or not (0 < alpha <= 1):
        raise DomainError("need holder_constant >= 0 and alpha in (0, 1]")
    if holder_constant == 0:
        return 1
    n = max(1, int(np.ceil((holder_constant * 2 ** (alpha / 2) / eps) ** (1.0 / alpha))))
    while n > 1 and holder_constant * 2 ** (alpha / 2) * (n - 1) ** (-alpha) <= eps:
        n -= 1
    while holder_constant * 2 ** (alpha / 2) * n ** (-alpha) > eps:
        n += 1
    return n


def _face_masks(n: int):
    m = 2 * n + 1
    left = np.zeros((m, m), dtype=bool)
    right = np.zeros((m, m), dtype=bool)
    top = np.zeros((m, m), dtype=bool)
    bottom = np.zeros((m, m), dtype=bool)
    left[:, 0] = True
    right[:, -1] = True
    top[-1, :] = True
    bottom[0, :] = True
    return left, right, top, bottom


def _spread(reach: np.ndarray, allowed: np.ndarray) -> np.ndarray:
    """One synchronous step of flood fill over the 6-neighbor adjacency.

    Arrays are stacks of boards with shape (..., m, m); the leading axes
    broadcast, so a single call floods any number of boards at once.
    """
    out = reach.copy()
    out[..., :, 1:] |= reach[..., :, :-1]    # east
    out[..., :, :-1] |= reach[..., :, 1:]    # west
    out[..., 1:, :] |= reach[..., :-1, :]    # north
    out[..., :-1, :] |= reach[..., 1:, :]    # south
    out[..., 1:, 1:] |= reach[..., :-1, :-1]  # north-east
    out[..., :-1, :-1] |= reach[..., 1:, 1:]  # south-west
    out &= allowed
    return out


class _BitBoard:
    """Bit-parallel flood fill for boards packed one-per-integer.

    Bit layout: point (i, j) sits at bit (i+n) + (2n+1)*(j+n).  Shifts by
    1 / m / m+1 realize the six lattice directions after masking the columns
    and rows that would wrap.
    """

    def __init__(self, n: int):
        m = 2 * n + 1
        cells = m * m
        if cells > 64:
            raise DomainError("bitboard supports at most 64 lattice points")
        self.n = n
        self.m = m
        self.dtype = np.uint32 if cells <= 32 else np.uint64
        one = 1
        self.full = self.dtype((one << cells) - 1)
        col0 = sum(one << (m * r) for r in range(m))
        row0 = (one << m) - 1
        self.left = self.dtype(col0)
        self.right = self.dtype(col0 << (m - 1))
        self.bottom = self.dtype(row0)
        self.top = self.dtype(row0 << (m * (m - 1)))
        self.not_col_last = self.dtype(self.full ^ (col0 << (m - 1)))
        self.not_col0 = self.dtype(self.full ^ col0)
        self.not_row_last = self.dtype(self.full ^ (row0 << (m * (m - 1))))
        self.not_row0 = self.dtype(self.full ^ row0)

    def spread(self, x: np.ndarray) -> np.ndarray:
        m = self.dtype(self.m)
        m1 = self.dtype(self.m + 1)
        one = self.dtype(1)
        out = x.copy()
        out |= (x & self.not_col_last) << one                        # east
        out |= (x & self.not_col0) >> one                            # west
        out |= (x & self.not_row_last) << m                          # north
        out |= (x & self.not_row0) >> m                              # south
        out |= (x & self.not_col_last & self.not_row_last) << m1     # north-east
        out |= (x & self.not_col0 & self.not_row0) >> m1             # south-west
        return out

    def winners(self, black: np.ndarray) -> np.ndarray:
        black = black.astype(self.dtype, copy=False) & self.full
        white = black ^ self.full
        reach_w = white & self.left
        reach_b = black & self.top
        while True:
            new_w = self.spread(reach_w) & white
            new_b = self.spread(reach_b) & black
            if np.array_equal(new_w, reach_w) and np.array_equal(new_b, reach_b):
                break
            reach_w, reach_b = new_w, new_b
        return ((reach_w & self.right) != 0) | ((reach_b & self.bottom) != 0)


def _pack_boards(boards: np.ndarray, bb: _BitBoard) -> np.ndarray:
    m = bb.m
    flat = boards.reshape(-1, m * m).astype(np.uint64)
    weights = (np.uint64(1) << np.arange(m * m, dtype=np.uint64))
    return (flat * weights[None, :]).sum(axis=1).astype(bb.dtype)


def winner_exists_batch(n: int, black_boards: np.ndarray) -> np.ndarray:
    """Vectorized winner check for a stack of colorings.

    ``black_boards`` has shape (k, 2n+1, 2n+1); returns a boolean vector
    telling, per board, whether a white left-right or black top-bottom
    crossing exists.  Boards up to 64 points run bit-parallel; larger ones
    flood spatially.
    """
    boards = np.asarray(black_boards, dtype=bool)
    if boards.ndim == 2:
        boards = boards[None]
    m = 2 * n + 1
    if m * m <= 64:
        bb = _BitBoard(n)
        return bb.winners(_pack_boards(boards, bb))
    left, right, top, bottom = _face_masks(n)
    white = ~boards
    reach_w = white & left
    reach_b = boards & top
    while True:
        new_w = _spread(reach_w, white)
        new_b = _spread(reach_b, boards)
        if np.array_equal(new_w, reach_w) and np.array_equal(new_b, reach_b):
            break
        reach_w, reach_b = new_w, new_b
    win_w = np.any(reach_w & right, axis=(-2, -1))
    win_b = np.any(reach_b & bottom, axis=(-2, -1))
    return win_w | win_b


def exhaustive_winner_check(n: int, chunk: int = 1 << 20) -> tuple[int, list[int]]:
    """Check every coloring of the (2n+1)^2 lattice; returns (count, failures).

    Board index k encodes point (i, j) as bit (i+n) + (2n+1)*(j+n), so the
    coloring index is the packed bitboard.  Feasible for n <= 2
    (2^25 colorings); larger boards should use the random checker.
    """
    m = 2 * n + 1
    cells = m * m
    if cells > 25:
        raise DomainError(f"exhaustive check over 2^{cells} colorings is not supported")
    total = 1 << cells
    failures: list[int] = []
    bb = _BitBoard(n)
    for start in range(0, total, chunk):
        stop = min(start + chunk, total)
        ids = np.arange(start, stop, dtype=bb.dtype)
        ok = bb.winners(ids)
        if not np.all(ok):
            failures.extend((start + np.nonzero(~ok)[0]).tolist())
    return total, failures


def random_winner_check(n: int, count: int, seed: int = 0,
                        chunk: int = 4096) -> tuple[int, list[int]]:
    """Winner check over seeded random colorings; returns (count, failing seeds)."""
    rng = np.random.default_rng(seed)
    m = 2 * n + 1
    failures: list[int] = []
    done = 0
    while done < count:
        take = min(chunk, count - done)
        boards = rng.random((take, m, m)) < 0.5
        ok = winner_exists_batch(n, boards)
        if not np.all(ok):
            failures.extend((done + np.nonzero(~ok)[0]).tolist())
        done += take
    return count, failures
