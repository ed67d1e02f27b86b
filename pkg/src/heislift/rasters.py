"""Shared raster machinery: square-cell grids, segment marking, labeling,
boundary extraction and vectorized winding counts.

Conventions.  A Grid2D covers [x0, x0+nx*h] x [y0, y0+ny*h] with square cells
of side h; masks are boolean arrays of shape (ny, nx) indexed [iy, ix].
"Open set at raster scale" means a union of open cells; boundaries are the
corresponding cell-complex edges.  A cell is marked by a segment when its
closed square intersects the closed segment, so a labeled (unmarked) cell is
genuinely off-curve and the cell center keeps distance >= h/2 from the curve.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import DomainError

__all__ = [
    "Grid2D",
    "grid_over_bbox",
    "mark_segments",
    "label_cells",
    "boundary_edges",
    "stitch_loops",
    "mask_contours",
    "winding_many",
    "winding_batched",
    "refine_polyline",
]

_FOUR = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)


@dataclass(frozen=True)
class Grid2D:
    x0: float
    y0: float
    h: float
    nx: int
    ny: int

    def __post_init__(self):
        if not np.isfinite([self.x0, self.y0, self.h]).all() or self.h <= 0:
            raise DomainError("bad grid geometry")
        if self.nx < 1 or self.ny < 1:
            raise DomainError("grid must have at least one cell per axis")

    @property
    def bbox(self) -> tuple[float, float, float, float]:
        return (self.x0, self.y0, self.x0 + self.nx * self.h, self.y0 + self.ny * self.h)

    @property
    def cell_area(self) -> float:
        return self.h * self.h

    def centers(self) -> tuple[np.ndarray, np.ndarray]:
        cx = self.x0 + (np.arange(self.nx) + 0.5) * self.h
        cy = self.y0 + (np.arange(self.ny) + 0.5) * self.h
        return cx, cy

    def center_points(self) -> np.ndarray:
        """All cell centers as an (ny*nx, 2) array in row-major mask order."""
        cx, cy = self.centers()
        X, Y = np.meshgrid(cx, cy)
        return np.column_stack([X.ravel(), Y.ravel()])

    def cell_of(self, pts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Cell indices (ix, iy) of points; may lie outside [0, n)."""
        p = np.atleast_2d(np.asarray(pts, dtype=float))
        ix = np.floor((p[:, 0] - self.x0) / self.h).astype(int)
        iy = np.floor((p[:, 1] - self.y0) / self.h).astype(int)
        return ix, iy

    def corner(self, ix, iy) -> np.ndarray:
        """World coordinates of grid corner (ix, iy)."""
        return np.stack([self.x0 + np.asarray(ix) * self.h, self.y0 + np.asarray(iy) * self.h], axis=-1)


def grid_over_bbox(bbox, resolution: int, pad: float = 0.0,
                   min_short: int | None = None, max_cells: int = 8_000_000) -> Grid2D:
    """Square-cell grid covering a bbox at ``resolution`` cells on the long side.

    With ``min_short`` the cell size also guarantees at least that many cells
    across the short side (useful for ribbon-shaped sets), subject to the
    total cell budget.
    """
    x0, y0, x1, y1 = map(float, bbox)
    if not np.isfinite([x0, y0, x1, y1]).all():
        raise DomainError("non-finite bbox")
    w, hgt = x1 - x0, y1 - y0
    if pad > 0:
        m = pad * max(w, hgt, 1e-30)
        x0, y0, x1, y1 = x0 - m, y0 - m, x1 + m, y1 + m
        w, hgt = x1 - x0, y1 - y0
    side = max(w, hgt)
    if side <= 0:
        raise DomainError("degenerate bbox")
    if resolution < 1:
        raise DomainError("resolution must be positive")
    h = side / resolution
    if min_short is not None:
        short = min(w, hgt)
        if short > 0:
            h = min(h, short / min_short)
        h = max(h, np.sqrt(w * hgt / max_cells))
    nx = max(1, int(np.ceil(w / h - 1e-9)))
    ny = max(1, int(np.ceil(hgt / h - 1e-9)))
    return Grid2D(x0=x0, y0=y0, h=h, nx=nx, ny=ny)


def mark_segments(grid: Grid2D, points: np.ndarray, closed: bool = False) -> np.ndarray:
    """Boolean mask of cells whose closed square meets the polyline.

    Candidate cells come from walking each segment at half-cell steps and
    taking 3x3 neighborhoods, after which an exact square/segment overlap
    test (bbox overlap plus corner side signs straddling the carrier line)
    decides membership.  Ties count as hits, which errs on the safe side.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise DomainError("polyline must be (n, 2)")
    segs_a = pts[:-1]
    segs_b = pts[1:]
    if closed and np.any(pts[0] != pts[-1]):
        segs_a = np.vstack([segs_a, pts[-1]])
        segs_b = np.vstack([segs_b, pts[0]])
    mask = np.zeros((grid.ny, grid.nx), dtype=bool)
    h = grid.h
    half = 0.5 * h

    # walk every segment at half-cell steps, all segments in one batch
    d = segs_b - segs_a
    lengths = np.hypot(d[:, 0], d[:, 1])
    nsub = np.maximum(1, np.ceil(lengths / half).astype(np.int64))
    seg_of = np.repeat(np.arange(len(segs_a)), nsub + 1)
    local = np.arange(len(seg_of)) - np.repeat(np.cumsum(nsub + 1) - (nsub + 1), nsub + 1)
    ts = local / nsub[seg_of]
    walk = segs_a[seg_of] + ts[:, None] * d[seg_of]
    ix, iy = grid.cell_of(walk)

    # 3x3 neighborhoods catch every square the segment can touch
    offs = np.array([(ox, oy) for oy in (-1, 0, 1) for ox in (-1, 0, 1)])
    cand_x = (ix[:, None] + offs[None, :, 0]).ravel()
    cand_y = (iy[:, None] + offs[None, :, 1]).ravel()
    cand_seg = np.repeat(seg_of, 9)
    keep = (cand_x >= 0) & (cand_x < grid.nx) & (cand_y >= 0) & (cand_y < grid.ny)
    cand_x, cand_y, cand_seg = cand_x[keep], cand_y[keep], cand_seg[keep]
    if len(cand_x) == 0:
        return mask

    cx = grid.x0 + (cand_x + 0.5) * h
    cy = grid.y0 + (cand_y + 0.5) * h
    a = segs_a[cand_seg]
    b = segs_b[cand_seg]
    # bbox overlap between the closed square and the closed segment
    over = ((cx + half >= np.minimum(a[:, 0], b[:, 0])) &
            (cx - half <= np.maximum(a[:, 0], b[:, 0])) &
            (cy + half >= np.minimum(a[:, 1], b[:, 1])) &
            (cy - half <= np.maximum(a[:, 1], b[:, 1])))
    # corner side signs w.r.t. the carrier line must straddle zero
    dd = d[cand_seg]
    center_cross = dd[:, 0] * (cy - a[:, 1]) - dd[:, 1] * (cx - a[:, 0])
    reach = half * (np.abs(dd[:, 0]) + np.abs(dd[:, 1]))
    hit = over & (np.abs(center_cross) <= reach)
    mask[cand_y[hit], cand_x[hit]] = True
    return mask


def label_cells(free: np.ndarray) -> tuple[np.ndarray, int]:
    """4-connected component labels of a boolean mask (0 = background)."""
    labels, count = ndimage.label(free, structure=_FOUR)
    return labels, int(count)


def boundary_edges(mask: np.ndarray) -> np.ndarray:
    """Directed boundary edges of a cell mask, interior on the left.

    Returns an integer array (n, 4) of corner index pairs
    (ix_from, iy_from, ix_to, iy_to).  Outer loops come out counterclockwise
    and holes clockwise once stitched.
    """
    m = np.asarray(mask, dtype=bool)
    ny, nx = m.shape
    padded = np.zeros((ny + 2, nx + 2), dtype=bool)
    padded[1:-1, 1:-1] = m
    edges = []
    iy, ix = np.nonzero(m & ~padded[0:-2, 1:-1])  # south neighbor empty
    edges.append(np.stack([ix, iy, ix + 1, iy], axis=1))
    iy, ix = np.nonzero(m & ~padded[2:, 1:-1])  # north neighbor empty
    edges.append(np.stack([ix + 1, iy + 1, ix, iy + 1], axis=1))
    iy, ix = np.nonzero(m & ~padded[1:-1, 0:-2])  # west neighbor empty
    edges.append(np.stack([ix, iy + 1, ix, iy], axis=1))
    iy, ix = np.nonzero(m & ~padded[1:-1, 2:])  # east neighbor empty
    edges.append(np.stack([ix + 1, iy, ix + 1, iy + 1], axis=1))
    if not edges:
        return np.empty((0, 4), dtype=int)
    return np.concatenate(edges, axis=0)


def stitch_loops(edges: np.ndarray) -> list[np.ndarray]:
    """Stitch directed boundary edges into closed corner-index loops.

    Every corner has balanced in/out degree; at pinch corners (two diagonal
    cells sharing only the corner) the walk prefers the left turn, which keeps
    each loop simple.  Returns loops as (k, 2) corner index arrays with the
    first corner not repeated at the end.
    """
    if len(edges) == 0:
        return []
    out_map: dict[tuple[int, int], list[int]] = {}
    for idx, e in enumerate(edges):
        out_map.setdefault((int(e[0]), int(e[1])), []).append(idx)
    used = np.zeros(len(edges), dtype=bool)
    loops = []
    for start in range(len(edges)):
        if used[start]:
            continue
        loop = []
        cur = start
        while not used[cur]:
            used[cur] = True
            e = edges[cur]
            loop.append((int(e[0]), int(e[1])))
            head = (int(e[2]), int(e[3]))
            cands = [i for i in out_map.get(head, ()) if not used[i]]
            if not cands:
                break
            if len(cands) == 1:
                cur = cands[0]
            else:
                din = (e[2] - e[0], e[3] - e[1])
                best, best_turn = None, -2
                for i in cands:
                    dout = (edges[i][2] - edges[i][0], edges[i][3] - edges[i][1])
                    turn = din[0] * dout[1] - din[1] * dout[0]
                    if turn > best_turn:
                        best, best_turn = i, turn
                cur = best
        loops.append(np.asarray(loop, dtype=int))
    return loops


def mask_contours(grid: Grid2D, mask: np.ndarray) -> list[np.ndarray]:
    """World-coordinate boundary polylines of a cell mask (closed, not repeated)."""
    loops = stitch_loops(boundary_edges(mask))
    return [grid.corner(lp[:, 0], lp[:, 1]) for lp in loops]


def refine_polyline(points: np.ndarray, max_step: float, closed: bool = True) -> np.ndarray:
    """Subdivide polyline segments so no step exceeds ``max_step``.

    The loop is closed by an implicit edge back to the start when ``closed``
    and the endpoints differ; the returned array never repeats the start.
    """
    pts = np.asarray(points, dtype=float)
    if closed and np.any(pts[0] != pts[-1]):
        pts = np.vstack([pts, pts[0]])
    out = []
    for a, b in zip(pts[:-1], pts[1:]):
        n = max(1, int(np.ceil(np.hypot(*(b - a)) / max_step)))
        ts = np.arange(n) / n
        out.append(a[None, :] + ts[:, None] * (b - a)[None, :])
    return np.concatenate(out, axis=0)


def winding_many(loop: np.ndarray, qs: np.ndarray, closed: bool = True) -> np.ndarray:
    """Crossing-count winding numbers of one closed polyline around many points.

    Half-open edge rule: an upward edge contributes +1 when the query point
    is strictly left of it, a downward edge -1 when strictly right.  Exact
    integers for points off the polyline.
    """
    pts = np.asarray(loop, dtype=float)
    q = np.atleast_2d(np.asarray(qs, dtype=float))
    if closed and np.any(pts[0] != pts[-1]):
        pts = np.vstack([pts, pts[0]])
    wn = np.zeros(len(q), dtype=np.int64)
    ax, ay = pts[:-1, 0], pts[:-1, 1]
    bx, by = pts[1:, 0], pts[1:, 1]
    # chunk over edges to bound the broadcast buffer
    chunk = max(1, int(4e6 // max(1, len(q))))
    for s in range(0, len(ax), chunk):
        AX = ax[s:s + chunk][:, None]
        AY = ay[s:s + chunk][:, None]
        BX = bx[s:s + chunk][:, None]
        BY = by[s:s + chunk][:, None]
        QX = q[None, :, 0]
        QY = q[None, :, 1]
        is_left = (BX - AX) * (QY - AY) - (BY - AY) * (QX - AX)
        up = (AY <= QY) & (BY > QY) & (is_left > 0)
        dn = (AY > QY) & (BY <= QY) & (is_left < 0)
        wn += (up.sum(axis=0) - dn.sum(axis=0)).astype(np.int64)
    return wn


def winding_batched(seg_a: np.ndarray, seg_b: np.ndarray, group: np.ndarray,
                    targets: np.ndarray, n_groups: int) -> np.ndarray:
    """Winding contributions of grouped edges, each group against its own target.

    ``seg_a``/``seg_b`` are (m, 2) edge endpoints, ``group`` the (m,) group id
    of each edge and ``targets`` the (n_groups, 2) query point per group.
    The edges of each group must form closed loops for the result to be a
    winding number.
    """
    qa = targets[group]
    isl = (seg_b[:, 0] - seg_a[:, 0]) * (qa[:, 1] - seg_a[:, 1]) - \
          (seg_b[:, 1] - seg_a[:, 1]) * (qa[:, 0] - seg_a[:, 0])
    up = (seg_a[:, 1] <= qa[:, 1]) & (seg_b[:, 1] > qa[:, 1]) & (isl > 0)
    dn = (seg_a[:, 1] > qa[:, 1]) & (seg_b[:, 1] <= qa[:, 1]) & (isl < 0)
    contrib = up.astype(np.int64) - dn.astype(np.int64)
    wn = np.zeros(n_groups, dtype=np.int64)
    np.add.at(wn, group, contrib)
    return wn
