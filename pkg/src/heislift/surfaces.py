"""Sampled surfaces into the Heisenberg space and their horizontal probes.

A SurfaceSample stores values of a map F from a planar rectangle into R^3 on
a rectangular grid; between nodes the horizontal part F_h = (F_x, F_y) is
interpolated bilinearly.  The probes implemented here make three phenomena
executable: the search for a twisting simplex (a triangle whose boundary
image has nonzero winding mass), the lattice-coloring construction that pins
a near-fiber path between opposite faces of a square, and the finite-depth
refinement that nests preimage sets into a binary tree whose branches share
their image (the raster skeleton of a Cantor fiber).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage
from scipy.interpolate import RegularGridInterpolator
from scipy.spatial import cKDTree

from .errors import DomainError, PreconditionError
from .geometry import HolderEstimate, estimate_holder, heisenberg_distance
from .hexlattice import color_by_preimage, find_crossing, mesh_for_epsilon
from .rasters import Grid2D, grid_over_bbox, label_cells, mask_contours, refine_polyline, winding_many
from .winding import ComponentMap, component_map, degree_of_region, winding_area_sum, winding_mass

__all__ = [
    "SurfaceSample",
    "SimplexWitness",
    "CantorTree",
    "horizontal_part",
    "find_twisting_simplex",
    "hex_loop_construction",
    "cantor_refine",
    "projection_interior_check",
]

_FOUR = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)

_TRACE = False


def _trace(*args):
    if _TRACE:
        print("[trace]", *args)


@dataclass(frozen=True)
class SurfaceSample:
    """Values of a surface map on a rectangular grid, with audit metadata."""

    u_nodes: np.ndarray
    v_nodes: np.ndarray
    values: np.ndarray  # (len(v_nodes), len(u_nodes), 3)
    holder: HolderEstimate | None = None
    injectivity_audit: float | None = None

    def __post_init__(self):
        u = np.asarray(self.u_nodes, dtype=float)
        v = np.asarray(self.v_nodes, dtype=float)
        w = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "u_nodes", u)
        object.__setattr__(self, "v_nodes", v)
        object.__setattr__(self, "values", w)
        if u.ndim != 1 or v.ndim != 1 or len(u) < 2 or len(v) < 2:
            raise DomainError("surface grid needs at least 2 nodes per axis")
        if np.any(np.diff(u) <= 0) or np.any(np.diff(v) <= 0):
            raise DomainError("surface grid axes must be strictly increasing")
        if w.shape != (len(v), len(u), 3):
            raise DomainError(f"values must be {(len(v), len(u), 3)}, got {w.shape}")
        if not np.all(np.isfinite(w)):
            raise DomainError("non-finite surface values")

    @property
    def domain_bbox(self) -> tuple[float, float, float, float]:
        return (float(self.u_nodes[0]), float(self.v_nodes[0]),
                float(self.u_nodes[-1]), float(self.v_nodes[-1]))

    @classmethod
    def from_function(cls, F, u_range, v_range, nu: int = 129, nv: int = 129,
                      alpha: float = 0.5, audit_samples: int = 400,
                      seed: int = 0) -> "SurfaceSample":
        """Sample an analytic map F((n,2) array) -> (n,3) array on a grid."""
        u = np.linspace(u_range[0], u_range[1], nu)
        v = np.linspace(v_range[0], v_range[1], nv)
        U, V = np.meshgrid(u, v)
        pts = np.column_stack([U.ravel(), V.ravel()])
        vals = np.asarray(F(pts), dtype=float).reshape(nv, nu, 3)
        rng = np.random.default_rng(seed)
        idx = rng.choice(len(pts), size=min(audit_samples, len(pts)), replace=False)
        sample_pts = pts[idx]
        sample_vals = np.asarray(F(sample_pts), dtype=float)
        holder = estimate_holder(sample_pts, sample_vals, alpha,
                                 metric_dst=heisenberg_distance)
        span = max(u[-1] - u[0], v[-1] - v[0])
        seps = np.hypot(*(sample_pts[:, None, :] - sample_pts[None, :, :]).transpose(2, 0, 1))
        far = seps > 0.05 * span
        dists = heisenberg_distance(sample_vals[:, None, :], sample_vals[None, :, :])
        audit = float(np.min(dists[far])) if far.any() else None
        return cls(u_nodes=u, v_nodes=v, values=vals, holder=holder,
                   injectivity_audit=audit)


def horizontal_part(surface: SurfaceSample):
    """Planar sampler p -> (F_x, F_y)(p) with bilinear interpolation.

    Points are clamped to the sampled rectangle, so probing machinery can
    safely evaluate on cell corners that touch the domain boundary.
    """
    interp = RegularGridInterpolator(
        (surface.v_nodes, surface.u_nodes), surface.values[..., :2],
        method="linear", bounds_error=False, fill_value=None)
    u0, v0, u1, v1 = surface.domain_bbox

    def sampler(pts):
        p = np.atleast_2d(np.asarray(pts, dtype=float))
        uu = np.clip(p[:, 0], u0, u1)
        vv = np.clip(p[:, 1], v0, v1)
        return interp(np.column_stack([vv, uu]))

    return sampler


@dataclass(frozen=True)
class SimplexWitness:
    """A triangle whose boundary image twists: nonzero winding mass."""

    triangle: np.ndarray  # (3, 2) domain vertices
    boundary_loop: np.ndarray  # sampled image polyline of the triangle edge
    area_sum: float
    mass: float
    components: ComponentMap

    def __post_init__(self):
        tri = np.asarray(self.triangle, dtype=float)
        e1 = tri[1] - tri[0]
        e2 = tri[2] - tri[0]
        if abs(e1[0] * e2[1] - e1[1] * e2[0]) <= 0:
            raise DomainError("degenerate witness triangle")


def _image_loop(Fh, loop_pts: np.ndarray, step: float) -> np.ndarray:
    fine = refine_polyline(loop_pts, step, closed=True)
    return np.asarray(Fh(fine), dtype=float)


def _loop_mass(Fh, loop_pts: np.ndarray, step: float, resolution: int,
               min_short: int | None = None):
    img = _image_loop(Fh, loop_pts, step)
    if float(np.max(img.max(axis=0) - img.min(axis=0))) <= 0:
        return None
    cm = component_map(np.vstack([img, img[:1]]), resolution=resolution,
                       min_short=min_short)
    return img, cm, winding_area_sum(cm), winding_mass(cm)


def _raster_noise(img: np.ndarray, cm: ComponentMap) -> float:
    """Estimated raster area error: perimeter of the image loop times cell size."""
    closed = np.vstack([img, img[:1]])
    perim = float(np.sum(np.hypot(*(np.diff(closed, axis=0)).T)))
    return perim * cm.grid.h


def _rect_loops_in_mask(grid: Grid2D, mask: np.ndarray, max_candidates: int = 24,
                        min_cells: int = 6):
    """Axis-aligned rectangles fully inside a cell mask, large first.

    For every pair of dyadic side lengths the integral image gives all valid
    placements at once; a handful of them, spread over the placement set, is
    emitted per size so thin or scattered masks still yield candidates.
    """
    ny, nx = mask.shape
    integ = np.zeros((ny + 1, nx + 1), dtype=np.int64)
    np.cumsum(np.cumsum(mask, axis=0), axis=1, out=integ[1:, 1:])

    def scales(size):
        out = []
        s = int(size * 0.94)
        while s >= min_cells:
            out.append(s)
            s //= 2
        return out or [max(1, size - 1)]

    out = []
    per_size = max(2, max_candidates // 8)
    # perimeter order: a thin rectangle spanning one full axis beats a small
    # square, so ribbon-shaped masks still yield full-extent candidates
    sizes = sorted(
        {(sx, sy) for sx in scales(nx) for sy in scales(ny)},
        key=lambda t: -(t[0] + t[1]))
    for sx, sy in sizes:
        win = (integ[sy:, sx:] - integ[:-sy or None, sx:]
               - integ[sy:, :-sx or None] + integ[:-sy or None, :-sx or None])
        by, bx = np.nonzero(win == sx * sy)
        if len(by) == 0:
            continue
        take = np.unique(np.linspace(0, len(by) - 1, per_size).astype(int))
        for t in take:
            x0 = grid.x0 + bx[t] * grid.h
            y0 = grid.y0 + by[t] * grid.h
            x1 = x0 + sx * grid.h
            y1 = y0 + sy * grid.h
            out.append(np.array([[x0, y0], [x1, y0], [x1, y1], [x0, y1]]))
        if len(out) >= max_candidates:
            return out[:max_candidates]
    return out


def _fan_triangles(loop: np.ndarray, diagonals_first: bool = True) -> list[np.ndarray]:
    """Triangles decomposing a convex loop: diagonal halves, then the fan.

    The diagonal halves keep the loop's full extent in both axes, which
    matters when one axis carries no fold structure and collapsing it would
    starve later refinement stages.
    """
    tris = []
    if diagonals_first and len(loop) == 4:
        tris.append(np.array([loop[0], loop[1], loop[2]]))
        tris.append(np.array([loop[0], loop[2], loop[3]]))
    center = loop.mean(axis=0)
    for i in range(len(loop)):
        a, b = loop[i], loop[(i + 1) % len(loop)]
        tris.append(np.array([center, a, b]))
    return tris


def find_twisting_simplex(surface: SurfaceSample, V=None, loop_budget: int = 48,
                          resolution: int = 512, seed: int = 0,
                          noise_factor: float = 10.0) -> SimplexWitness | None:
    """Scan loops in V for one whose image twists, then pick a witness triangle.

    Candidates are grid rectangles (largest first), then seeded random convex
    polygons.  A loop is a hit when the winding mass of its image exceeds
    ``noise_factor`` times the raster area-error estimate; the loop's disk is
    then fanned into triangles from the centroid and the first triangle whose
    boundary image carries mass above the same threshold is returned.
    Exhausting the budget returns None: twisting undetected at this scale,
    which is never a disproof.
    """
    Fh = horizontal_part(surface)
    if V is None:
        V = surface.domain_bbox
    x0, y0, x1, y1 = map(float, V)
    if not (x1 > x0 and y1 > y0):
        raise DomainError("degenerate probe window")
    grid = grid_over_bbox((x0, y0, x1, y1), 64)
    mask = np.ones((grid.ny, grid.nx), dtype=bool)
    candidates = _rect_loops_in_mask(grid, mask)
    rng = np.random.default_rng(seed)
    while len(candidates) < loop_budget:
        k = int(rng.integers(4, 9))
        ang = np.sort(rng.uniform(0, 2 * np.pi, k))
        cx = rng.uniform(x0 + 0.25 * (x1 - x0), x1 - 0.25 * (x1 - x0))
        cy = rng.uniform(y0 + 0.25 * (y1 - y0), y1 - 0.25 * (y1 - y0))
        rad = rng.uniform(0.1, 0.45) * min(x1 - x0, y1 - y0)
        candidates.append(np.column_stack([cx + rad * np.cos(ang), cy + rad * np.sin(ang)]))

    step = min(x1 - x0, y1 - y0) / 256.0
    for loop in candidates[:loop_budget]:
        got = _loop_mass(Fh, loop, step, resolution)
        if got is None:
            continue
        img, cm, area, mass = got
        if mass <= noise_factor * _raster_noise(img, cm):
            continue
        for tri in _fan_triangles(loop):
            got_t = _loop_mass(Fh, tri, step, resolution)
            if got_t is None:
                continue
            img_t, cm_t, area_t, mass_t = got_t
            if mass_t > noise_factor * _raster_noise(img_t, cm_t):
                return SimplexWitness(triangle=tri, boundary_loop=img_t,
                                      area_sum=area_t, mass=mass_t, components=cm_t)
    return None


def hex_loop_construction(surface: SurfaceSample, square, x, eps_sequence,
                          n_cap: int = 256) -> dict:
    """Chase near-fiber crossings of a square at a ladder of tolerances.

    ``square`` is (center, half_width) inside the domain.  For each eps the
    lattice mesh comes from the surface Holder data, points mapping within
    eps of x are colored black, and the crossing search runs.  Black
    top-bottom paths are recorded along with a pointwise re-check that their
    image stays within 2 eps of x; a white crossing is the valid alternative
    outcome.  Meshes above ``n_cap`` are clamped and flagged.
    """
    Fh = horizontal_part(surface)
    (cx, cy), half = square
    target = np.asarray(getattr(x, "as_array", lambda: x)(), dtype=float).reshape(2)
    if surface.holder is None:
        raise PreconditionError("surface carries no Holder estimate")
    H_eff = surface.holder.constant * half ** surface.holder.alpha
    records = []
    a_pts, b_pts = [], []
    for eps in eps_sequence:
        n = mesh_for_epsilon(H_eff, surface.holder.alpha, eps)
        capped = n > n_cap
        n = min(n, n_cap)

        def Fh_square(p):
            q = np.atleast_2d(np.asarray(p, dtype=float))
            return Fh(np.column_stack([cx + half * q[:, 0], cy + half * q[:, 1]]))

        coloring = color_by_preimage(Fh_square, n, target, eps)
        res = find_crossing(coloring)
        rec = {"eps": float(eps), "n": n, "mesh_capped": capped,
               "black_crossing": res.black_tb_path is not None,
               "white_crossing": res.white_lr_path is not None}
        if res.black_tb_path is not None:
            path = np.asarray([coloring.world(p) for p in res.black_tb_path])
            img = Fh_square(path)
            dev = float(np.max(np.hypot(img[:, 0] - target[0], img[:, 1] - target[1])))
            rec["image_within_2eps"] = dev <= 2 * eps
            rec["max_image_deviation"] = dev
            a_pts.append(path[0])
            b_pts.append(path[-1])
        records.append(rec)
    out = {"records": records}
    if a_pts:
        out["a_limit"] = [float(c) for c in a_pts[-1]]
        out["b_limit"] = [float(c) for c in b_pts[-1]]
    return out


@dataclass
class CantorTree:
    """Finite-depth nesting of preimage sets with shared level images.

    nodes maps binary words to raster open sets (grid, mask) in the domain;
    levels maps k to the common image set W_k.  diagnostics carries the four
    per-node audits (nesting, disjointness, image coverage, diameter) plus
    the degree bookkeeping of every refinement step.
    """

    depth: int
    nodes: dict[str, tuple[Grid2D, np.ndarray]]
    levels: dict[int, tuple[Grid2D, np.ndarray]]
    diagnostics: dict = field(default_factory=dict)
    complete: bool = True
    flags: list[str] = field(default_factory=list)
    preds: dict = field(default_factory=dict, repr=False)


def _mask_points(grid: Grid2D, mask: np.ndarray) -> np.ndarray:
    return grid.center_points()[mask.ravel()]


def _region_member(grid: Grid2D, mask: np.ndarray, pts: np.ndarray) -> np.ndarray:
    ix, iy = grid.cell_of(pts)
    ok = (ix >= 0) & (ix < grid.nx) & (iy >= 0) & (iy < grid.ny)
    out = np.zeros(len(pts), dtype=bool)
    out[ok] = mask[iy[ok], ix[ok]]
    return out


def _mask_diameter(grid: Grid2D, mask: np.ndarray) -> float:
    if not mask.any():
        return 0.0
    iy, ix = np.nonzero(mask)
    w = (ix.max() - ix.min() + 1) * grid.h
    h = (iy.max() - iy.min() + 1) * grid.h
    return float(np.hypot(w, h))


def _quick_coverage(Fh, grid: Grid2D, mask: np.ndarray, wg: Grid2D,
                    wm: np.ndarray) -> float:
    """Fraction of the image-region cells approached by the node's images."""
    pts = _mask_points(grid, mask)
    w_pts = _mask_points(wg, wm)
    if len(pts) == 0 or len(w_pts) == 0:
        return 0.0
    img = np.asarray(Fh(pts), dtype=float)
    tol = 2.0 * wg.h + _image_mesh(Fh, grid, mask)
    d, _ = cKDTree(img).query(w_pts, k=1)
    return float(np.mean(d <= tol))


def _image_mesh(Fh, grid: Grid2D, mask: np.ndarray) -> float:
    """Largest image step between 4-adjacent mask cells (sampling mesh of F_h)."""
    img = np.asarray(Fh(grid.center_points()), dtype=float).reshape(grid.ny, grid.nx, 2)
    steps = [0.0]
    right = mask[:, :-1] & mask[:, 1:]
    if right.any():
        d = np.hypot(*(img[:, 1:] - img[:, :-1]).transpose(2, 0, 1))
        steps.append(float(d[right].max()))
    up = mask[:-1, :] & mask[1:, :]
    if up.any():
        d = np.hypot(*(img[1:, :] - img[:-1, :]).transpose(2, 0, 1))
        steps.append(float(d[up].max()))
    return max(steps)


def _tri_interior_mask(grid: Grid2D, tri: np.ndarray, erode: int = 1) -> np.ndarray:
    pts = grid.center_points()
    closed = np.vstack([tri, tri[:1]])
    inside = (winding_many(closed, pts) != 0).reshape(grid.ny, grid.nx)
    if erode:
        inside = ndimage.binary_erosion(inside, structure=_FOUR, iterations=erode)
    return inside


def _signed_components(cm: ComponentMap, min_cells: int = 12):
    """Component ids with positive / negative winding, by decreasing area."""
    pos = [k for k, w in cm.winding.items()
           if w > 0 and cm.areas[k] >= min_cells * cm.grid.cell_area]
    neg = [k for k, w in cm.winding.items()
           if w < 0 and cm.areas[k] >= min_cells * cm.grid.cell_area]
    pos.sort(key=lambda k: -cm.areas[k])
    neg.sort(key=lambda k: -cm.areas[k])
    return pos, neg


def _component_region(cm: ComponentMap, comp: int) -> tuple[Grid2D, np.ndarray]:
    return cm.grid, cm.labels == comp


def _stage_triangles(grid: Grid2D, mask: np.ndarray, budget: int):
    rects = _rect_loops_in_mask(grid, mask, max_candidates=max(8, budget // 4))
    tris = []
    for rect in rects:
        tris.extend(_fan_triangles(rect))
        if len(tris) >= budget:
            break
    return tris[:budget]


def _tri_membership(tri: np.ndarray, pts: np.ndarray, gap: float, inside: bool) -> np.ndarray:
    """Strict interior (or strict exterior) of a triangle with a safety gap."""
    closed = np.vstack([tri, tri[:1]])
    wind = winding_many(closed, pts) != 0
    d = np.full(len(pts), np.inf)
    for a, b in zip(closed[:-1], closed[1:]):
        e = b - a
        L2 = float(e @ e)
        t = np.clip(((pts - a) @ e) / L2, 0.0, 1.0)
        proj = a[None, :] + t[:, None] * e[None, :]
        d = np.minimum(d, np.hypot(pts[:, 0] - proj[:, 0], pts[:, 1] - proj[:, 1]))
    if inside:
        return wind & (d > gap)
    return ~wind & (d > gap)


def _pred_mask(grid: Grid2D, pred) -> np.ndarray:
    return pred(grid.center_points()).reshape(grid.ny, grid.nx)


def _bbox_of_mask(grid: Grid2D, mask: np.ndarray, pad: float = 0.05):
    iy, ix = np.nonzero(mask)
    x0 = grid.x0 + ix.min() * grid.h
    x1 = grid.x0 + (ix.max() + 1) * grid.h
    y0 = grid.y0 + iy.min() * grid.h
    y1 = grid.y0 + (iy.max() + 1) * grid.h
    px = pad * (x1 - x0) + grid.h
    py = pad * (y1 - y0) + grid.h
    return (x0 - px, y0 - py, x1 + px, y1 + py)


def _cantor_stage(Fh, node, W_region, image_resolution, resolution, stage_budget,
                  noise_factor, min_cells, min_span=0.0):
    """One refinement step on a node set (optionally chained through W_region).

    ``node`` is a dict with the raster (grid, mask) and the exact membership
    predicate of the set.  Children are re-rasterized on their own bounding
    boxes from the composed predicates, so deep levels stay resolved no
    matter how thin the preimage strips get.  Returns None when no admissible
    simplex pair exists at this scale.
    """
    node_grid, node_mask, node_pred = node["grid"], node["mask"], node["pred"]
    if W_region is not None:
        wg, wm = W_region

        def pred(pts, _prev=node_pred, _wg=wg, _wm=wm):
            p = np.atleast_2d(np.asarray(pts, dtype=float))
            out = _prev(p)
            idx = np.flatnonzero(out)
            if len(idx):
                img = np.asarray(Fh(p[idx]), dtype=float)
                out[idx] = _region_member(_wg, _wm, img)
            return out

        mask = node_mask & _pred_mask(node_grid, pred)
    else:
        pred = node_pred
        mask = node_mask
    if not mask.any():
        return None
    budget = {"loops": 12 * stage_budget}
    return _scan_stage(Fh, pred, node_grid, mask, image_resolution, resolution,
                       stage_budget, noise_factor, min_cells, zoom_depth=5,
                       budget=budget, min_span=min_span)


def _zoom_blobs(grid: Grid2D, mask: np.ndarray, pred, resolution: int,
                max_blobs: int = 3):
    """Refined (grid, mask) pairs over the largest connected pieces of a mask."""
    labels, count = label_cells(mask)
    if count == 0:
        return []
    sizes = np.bincount(labels.ravel())[1:]
    order = np.argsort(sizes)[::-1][:max_blobs]
    out = []
    for comp in order:
        blob = labels == comp + 1
        sub = grid_over_bbox(_bbox_of_mask(grid, blob, pad=0.15), resolution,
                             min_short=24)
        if sub.h >= 0.9 * grid.h:
            continue
        m = _pred_mask(sub, pred)
        if m.any():
            out.append((sub, m))
    return out


def _scan_stage(Fh, pred, grid, mask, image_resolution, resolution,
                stage_budget, noise_factor, min_cells, zoom_depth, budget,
                min_span=0.0):
    """Try the simplex-pair construction at this zoom, recursing into blobs.

    ``budget`` caps the total number of image-loop rasterizations across the
    whole zoom recursion, so deep scans terminate in bounded time.
    """
    step = max(_mask_diameter(grid, mask) / 512.0, grid.h / 8.0)
    for tri in _stage_triangles(grid, mask, stage_budget):
        if float(np.max(tri.max(axis=0) - tri.min(axis=0))) < min_span:
            continue  # below the surface sampling mesh: no honest folds left
        if budget["loops"] <= 0:
            return None
        budget["loops"] -= 1
        got = _loop_mass(Fh, tri, step, image_resolution, min_short=24)
        if got is None:
            continue
        img, cm, area, mass = got
        if mass <= noise_factor * _raster_noise(img, cm):
            _trace("scan: mass reject", f"uspan={np.ptp(tri[:,0]):.3g}",
                   f"vspan={np.ptp(tri[:,1]):.3g}", f"mass={mass:.3g}",
                   f"thr={noise_factor * _raster_noise(img, cm):.3g}")
            continue
        pos, neg = _signed_components(cm, min_cells=min_cells)
        if not pos and not neg:
            _trace("scan: no signed comps", f"uspan={np.ptp(tri[:,0]):.3g}")
            continue
        _trace("scan: candidate", f"uspan={np.ptp(tri[:,0]):.3g}",
               f"vspan={np.ptp(tri[:,1]):.3g}", f"pos={len(pos)}", f"neg={len(neg)}")
        # a few primary candidates, largest signed area first, either sign;
        # the inner simplex then hunts the opposite sign inside the image
        cands = sorted(pos + neg, key=lambda k: -cm.areas[k])[:3]
        inner = None
        for W_plus in cands:
            primary_sign = 1 if cm.winding[W_plus] > 0 else -1

            # Delta+ : preimage of the primary component inside the triangle
            lo = tri.min(axis=0)
            hi = tri.max(axis=0)
            zoom = grid_over_bbox((lo[0], lo[1], hi[0], hi[1]), resolution,
                                  pad=0.01, min_short=24)

            def in_delta_plus(pts, _tri=tri, _pred=pred, _cm=cm, _wp=W_plus, _gap=zoom.h):
                p = np.atleast_2d(np.asarray(pts, dtype=float))
                ok = _tri_membership(_tri, p, _gap, inside=True)
                if ok.any():
                    ok[ok] &= _pred(p[ok])
                if ok.any():
                    imgp = np.asarray(Fh(p[ok]), dtype=float)
                    ok[ok] &= _cm.component_of(imgp) == _wp
                return ok

            delta_plus = _pred_mask(zoom, in_delta_plus)
            if not delta_plus.any():
                _trace("scan: empty delta_plus")
                continue

            inner = _refine_inside(Fh, zoom, delta_plus, in_delta_plus, cm, W_plus,
                                   -primary_sign, image_resolution, resolution,
                                   stage_budget, noise_factor, min_cells, zoom_depth,
                                   budget, min_span=min_span)
            if inner is not None:
                break
        if inner is None:
            continue
        tri2, cm2, (w_grid, w_mask) = inner
        # separation gap between the two children: positive, so the closures
        # are disjoint, but far below raster scale, so the excluded collar
        # carries no degree and no coverage
        gap2 = float(np.max(tri2.max(axis=0) - tri2.min(axis=0))) * 1e-9

        def pred_V1(pts, _dp=in_delta_plus, _tri2=tri2, _wg=w_grid, _wm=w_mask, _gap=gap2):
            p = np.atleast_2d(np.asarray(pts, dtype=float))
            ok = _tri_membership(_tri2, p, _gap, inside=True)
            if ok.any():
                ok[ok] &= _dp(p[ok])
            if ok.any():
                imgp = np.asarray(Fh(p[ok]), dtype=float)
                ok[ok] &= _region_member(_wg, _wm, imgp)
            return ok

        def pred_V0(pts, _dp=in_delta_plus, _tri2=tri2, _wg=w_grid, _wm=w_mask, _gap=gap2):
            p = np.atleast_2d(np.asarray(pts, dtype=float))
            ok = _tri_membership(_tri2, p, _gap, inside=False)
            if ok.any():
                ok[ok] &= _dp(p[ok])
            if ok.any():
                imgp = np.asarray(Fh(p[ok]), dtype=float)
                ok[ok] &= _region_member(_wg, _wm, imgp)
            return ok

        coarse_V1 = _pred_mask(zoom, pred_V1)
        coarse_V0 = _pred_mask(zoom, pred_V0)
        if not coarse_V0.any() or not coarse_V1.any():
            continue

        # children on their own zoomed grids
        g1 = grid_over_bbox(_bbox_of_mask(zoom, coarse_V1), resolution, min_short=24)
        g0 = grid_over_bbox(_bbox_of_mask(zoom, coarse_V0), resolution, min_short=24)
        m1 = _pred_mask(g1, pred_V1)
        m0 = _pred_mask(g0, pred_V0)
        if not m0.any() or not m1.any():
            continue

        # accept only structurally sound splits: both children must already
        # cover the shared image region at raster tolerance, else keep looking
        cov0 = _quick_coverage(Fh, g0, m0, w_grid, w_mask)
        cov1 = _quick_coverage(Fh, g1, m1, w_grid, w_mask)
        if min(cov0, cov1) < 0.95:
            _trace("scan: children coverage reject", f"{cov0:.2f}", f"{cov1:.2f}")
            continue

        audit = _degree_bookkeeping(Fh, zoom, delta_plus, (g0, m0), (g1, m1),
                                    w_grid, w_mask)
        return {
            "triangle": tri,
            "inner_triangle": tri2,
            "components": cm,
            "delta_plus": (zoom, delta_plus),
            "V0": {"grid": g0, "mask": m0, "pred": pred_V0},
            "V1": {"grid": g1, "mask": m1, "pred": pred_V1},
            "W": (w_grid, w_mask),
            "bookkeeping": audit,
        }
    if zoom_depth > 0 and budget["loops"] > 0:
        for sub_grid, sub_mask in _zoom_blobs(grid, mask, pred, resolution):
            if float(np.hypot(sub_grid.nx, sub_grid.ny)) * sub_grid.h < min_span:
                continue
            got = _scan_stage(Fh, pred, sub_grid, sub_mask, image_resolution,
                              resolution, stage_budget, noise_factor, min_cells,
                              zoom_depth - 1, budget, min_span=min_span)
            if got is not None:
                return got
    return None


def _refine_inside(Fh, zoom, delta_plus, dp_pred, cm, W_plus, want_sign,
                   image_resolution, resolution, stage_budget, noise_factor,
                   min_cells, zoom_depth, budget, min_span=0.0):
    """Find an inner triangle in Delta+ whose image loop has a component of
    the requested sign contained in the primary component W+."""
    step = max(_mask_diameter(zoom, delta_plus) / 512.0, zoom.h / 8.0)
    if step <= 0:
        return None
    for tri2 in _stage_triangles(zoom, delta_plus, stage_budget):
        if float(np.max(tri2.max(axis=0) - tri2.min(axis=0))) < min_span:
            continue
        if budget["loops"] <= 0:
            return None
        budget["loops"] -= 1
        got = _loop_mass(Fh, tri2, step, image_resolution, min_short=24)
        if got is None:
            continue
        img2, cm2, area2, mass2 = got
        if mass2 <= noise_factor * _raster_noise(img2, cm2):
            _trace("inner: mass reject", f"uspan={np.ptp(tri2[:,0]):.3g}",
                   f"vspan={np.ptp(tri2[:,1]):.3g}", f"mass={mass2:.3g}",
                   f"thr={noise_factor * _raster_noise(img2, cm2):.3g}")
            continue
        pos2, neg2 = _signed_components(cm2, min_cells=min_cells)
        wanted = pos2 if want_sign > 0 else neg2
        if not wanted:
            _trace("inner: no wanted sign", f"uspan={np.ptp(tri2[:,0]):.3g}",
                   f"vspan={np.ptp(tri2[:,1]):.3g}", f"pos={len(pos2)}", f"neg={len(neg2)}")
        for W_inner in wanted:
            w_grid, w_mask = _component_region(cm2, W_inner)
            # keep only the part of the component lying inside the primary
            # region: there deg(q, Fh, Delta+) and deg(q, Fh, inner simplex)
            # are simultaneously nonzero with opposite signs
            pts = _mask_points(w_grid, w_mask)
            if len(pts) == 0:
                continue
            inside_plus = cm.component_of(pts) == W_plus
            if np.count_nonzero(inside_plus) < min_cells:
                _trace("inner: intersection too small",
                       f"cells={np.count_nonzero(inside_plus)}")
                continue
            _trace("inner: accepted", f"uspan={np.ptp(tri2[:,0]):.3g}",
                   f"vspan={np.ptp(tri2[:,1]):.3g}")
            cut = np.zeros(w_mask.size, dtype=bool)
            cut[np.flatnonzero(w_mask.ravel())[inside_plus]] = True
            return tri2, cm2, (w_grid, cut.reshape(w_mask.shape))
    if zoom_depth > 0 and budget["loops"] > 0:
        for sub_grid, sub_mask in _zoom_blobs(zoom, delta_plus, dp_pred, resolution):
            if float(np.hypot(sub_grid.nx, sub_grid.ny)) * sub_grid.h < min_span:
                continue
            got = _refine_inside(Fh, sub_grid, sub_mask, dp_pred, cm, W_plus,
                                 want_sign, image_resolution, resolution,
                                 stage_budget, noise_factor, min_cells,
                                 zoom_depth - 1, budget, min_span=min_span)
            if got is not None:
                return got
    return None


def _degree_bookkeeping(Fh, grid, delta_plus, V0, V1, w_grid, w_mask, n_probe: int = 3):
    """Check deg(q, Fh, Delta+) = deg(q, Fh, V0) + deg(q, Fh, V1) on sampled q.

    Probe points are the interior-most cells of the shared image region.  The
    winding margin is relaxed to one image step here: the probes sit inside a
    certified component, and the audit records rather than gates.
    """
    if not w_mask.any():
        return {"checked": 0, "passed": 0, "details": []}
    g0, m0 = V0
    g1, m1 = V1
    depth = ndimage.distance_transform_cdt(w_mask)
    order = np.argsort(depth.ravel())[::-1]
    pts_all = w_grid.center_points()
    details = []
    passed = 0
    checked = 0
    for flat in order[: n_probe * 4]:
        if checked >= n_probe:
            break
        q = pts_all[flat]
        try:
            d_plus = degree_of_region(Fh, grid, delta_plus, q, margin_factor=1.0)
            d0 = degree_of_region(Fh, g0, m0, q, margin_factor=1.0)
            d1 = degree_of_region(Fh, g1, m1, q, margin_factor=1.0)
        except Exception as exc:  # margin failures recorded, not fatal
            details.append({"q": [float(q[0]), float(q[1])], "error": str(exc)})
            continue
        checked += 1
        ok = d_plus == d0 + d1
        passed += bool(ok)
        details.append({"q": [float(q[0]), float(q[1])],
                        "deg_plus": d_plus, "deg_V0": d0, "deg_V1": d1, "ok": ok})
    return {"checked": checked, "passed": passed, "details": details}


def cantor_refine(surface: SurfaceSample, V=None, depth: int = 1,
                  resolution: int = 512, image_resolution: int | None = None,
                  stage_budget: int = 64, noise_factor: float = 10.0,
                  min_cells: int = 12) -> CantorTree:
    """Build the finite binary nesting of preimage sets under F_h.

    Level by level, every node of the current generation is refined through
    a twisting simplex: the positive image component defines Delta+, an inner
    simplex with a negative component W' splits the preimage of W' into the
    part inside the inner simplex (child 1) and the part outside it
    (child 0); chaining intersects the image region through all siblings so
    the whole generation shares one W.  Four properties are audited per node:
    nesting, disjointness of incomparable closures, image coverage of the
    level set, and geometric shrinking.  Failure to find an admissible
    simplex stops refinement with a partial tree and a resolution flag.
    """
    Fh = horizontal_part(surface)
    if V is None:
        V = surface.domain_bbox
    if image_resolution is None:
        image_resolution = resolution
    root_grid = grid_over_bbox(tuple(map(float, V)), resolution)
    root_mask = np.ones((root_grid.ny, root_grid.nx), dtype=bool)
    x0, y0, x1, y1 = root_grid.bbox

    def root_pred(pts):
        p = np.atleast_2d(np.asarray(pts, dtype=float))
        return (p[:, 0] >= x0) & (p[:, 0] <= x1) & (p[:, 1] >= y0) & (p[:, 1] <= y1)

    live = {"": {"grid": root_grid, "mask": root_mask, "pred": root_pred}}
    tree = CantorTree(depth=depth, nodes={"": (root_grid, root_mask)}, levels={})
    diam_U = _mask_diameter(root_grid, root_mask)
    # triangles below a few sampling meshes of the surface see only the
    # piecewise-linear interpolant, never honest folds
    min_span = 6.0 * float(np.min(np.diff(surface.u_nodes)))

    words = [""]
    for level in range(depth):
        W_chain = None
        children: dict[str, dict] = {}
        stage_records = {}
        for w in sorted(words):
            got = _cantor_stage(Fh, live[w], W_chain, image_resolution, resolution,
                                stage_budget, noise_factor, min_cells,
                                min_span=min_span)
            if got is None:
                tree.complete = False
                tree.flags.append(
                    f"node {w or 'root'}: no admissible simplex at resolution "
                    f"{resolution} (level {level + 1})")
                tree.diagnostics.setdefault("stages", {}).update(stage_records)
                return tree
            children[w + "0"] = got["V0"]
            children[w + "1"] = got["V1"]
            W_chain = got["W"]
            stage_records[f"level{level + 1}/{w or 'root'}"] = got["bookkeeping"]
        w_grid, w_mask = W_chain

        # chain every child of this generation through the final level image
        for cw, child in list(children.items()):
            prev = child["pred"]

            def chained(pts, _prev=prev, _wg=w_grid, _wm=w_mask):
                p = np.atleast_2d(np.asarray(pts, dtype=float))
                ok = _prev(p)
                idx = np.flatnonzero(ok)
                if len(idx):
                    img = np.asarray(Fh(p[idx]), dtype=float)
                    ok[idx] = _region_member(_wg, _wm, img)
                return ok

            mask = _pred_mask(child["grid"], chained)
            grid_c = child["grid"]
            if not mask.any():
                # the chained set can be thinner than the child raster
                for scale in (2, 4, 8):
                    finer = grid_over_bbox(grid_c.bbox, resolution * scale, min_short=24)
                    if finer.h >= grid_c.h:
                        continue
                    mask = _pred_mask(finer, chained)
                    if mask.any():
                        grid_c = finer
                        break
            if not mask.any():
                tree.complete = False
                tree.flags.append(f"node {cw}: empty after image chaining")
                continue
            # re-zoom onto the surviving set so later audits stay resolved
            grid_c2 = grid_over_bbox(_bbox_of_mask(grid_c, mask), resolution,
                                     min_short=24)
            mask2 = _pred_mask(grid_c2, chained)
            if mask2.any():
                grid_c, mask = grid_c2, mask2
            children[cw] = {"grid": grid_c, "mask": mask, "pred": chained}
            tree.preds[cw] = chained

        tree.levels[level + 1] = W_chain
        tree.diagnostics.setdefault("stages", {}).update(stage_records)
        if not tree.complete:
            for cw, child in children.items():
                tree.nodes[cw] = (child["grid"], child["mask"])
            return tree
        live.update(children)
        for cw, child in children.items():
            tree.nodes[cw] = (child["grid"], child["mask"])
        words = sorted(children.keys())

    tree.diagnostics["properties"] = audit_tree_properties(surface, tree, diam_U)
    return tree


def audit_tree_properties(surface: SurfaceSample, tree: CantorTree,
                          diam_U: float | None = None) -> dict:
    """The four per-node properties, re-checked from the stored rasters."""
    Fh = horizontal_part(surface)
    if diam_U is None:
        g0, m0 = tree.nodes[""]
        diam_U = _mask_diameter(g0, m0)
    report: dict[str, dict] = {}
    words = [w for w in tree.nodes if w]
    for w in words:
        g, m = tree.nodes[w]
        if not m.any():
            report[w] = {"nonempty": False}
            continue
        entry = {"nonempty": True}
        # (1) nesting in the parent, with raster tolerance: the parent mask
        # may under-resolve its strips near their rims
        parent = w[:-1]
        pg, pm = tree.nodes[parent]
        pts = _mask_points(g, m)
        grown = ndimage.binary_dilation(pm, structure=_FOUR)
        frac = float(np.mean(_region_member(pg, grown, pts))) if parent in tree.nodes else 1.0
        entry["nesting_fraction"] = frac
        entry["nesting"] = frac >= 0.98
        # (4) diameter shrink
        entry["diameter"] = _mask_diameter(g, m)
        entry["diameter_ok"] = entry["diameter"] <= 2.0 ** (-len(w)) * diam_U + 1e-12
        # (3) image covers the level set, at the tolerance the node's own
        # image sampling mesh can resolve; thin strips are refined through
        # the exact membership predicate before mapping
        lvl = len(w)
        wg, wm = tree.levels[lvl]
        sample = pts
        if w in tree.preds and len(pts) * 16 <= 2_000_000:
            off = (np.stack(np.meshgrid(np.arange(4), np.arange(4)), -1)
                   .reshape(-1, 2) + 0.5) / 4.0 - 0.5
            fine = (pts[:, None, :] + off[None, :, :] * g.h).reshape(-1, 2)
            keep = tree.preds[w](fine)
            if keep.any():
                sample = fine[keep]
        img = np.asarray(Fh(sample), dtype=float)
        w_pts = _mask_points(wg, wm)
        if len(w_pts):
            mesh = _image_mesh(Fh, g, m)
            tol = 2.0 * wg.h + mesh
            tree_img = cKDTree(img)
            d, _ = tree_img.query(w_pts, k=1)
            entry["coverage"] = float(np.mean(d <= tol))
            entry["coverage_tol"] = tol
        else:
            entry["coverage"] = 0.0
        entry["coverage_ok"] = entry["coverage"] >= 0.95
        report[w] = entry
    # (2) disjointness of incomparable closures: when the exact membership
    # predicates are stored, each node's sampled points must fail the other
    # predicate; otherwise fall back to one-cell-dilated raster overlap
    disjoint_ok = True
    pairs = []
    for i, w1 in enumerate(words):
        for w2 in words[i + 1:]:
            if w1.startswith(w2) or w2.startswith(w1):
                continue
            g1, m1 = tree.nodes[w1]
            g2, m2 = tree.nodes[w2]
            if not (m1.any() and m2.any()):
                continue
            if w1 in tree.preds and w2 in tree.preds:
                overlap = bool(np.any(tree.preds[w2](_mask_points(g1, m1))) or
                               np.any(tree.preds[w1](_mask_points(g2, m2))))
            else:
                grown = ndimage.binary_dilation(m1, structure=_FOUR)
                pts = _mask_points(g1, grown)
                overlap = np.any(_region_member(
                    g2, ndimage.binary_dilation(m2, structure=_FOUR), pts))
            pairs.append(((w1, w2), not overlap))
            disjoint_ok &= not overlap
    return {"per_node": report, "disjoint_pairs": pairs, "disjoint_ok": disjoint_ok}


def projection_interior_check(surface: SurfaceSample, witness: SimplexWitness | None = None,
                              sample_factor: int = 4) -> dict:
    """Verify the nonzero-degree component of a witness sits inside F_h(U).

    Every cell center of the component W must be approached by the image of
    some domain sample; the tolerance is twice the largest local image step
    of the sampling, i.e. raster-interior containment W inside F_h(U).
    """
    if witness is None:
        witness = find_twisting_simplex(surface)
    if witness is None:
        return {"witness": False, "contained": False, "fraction": 0.0}
    cm = witness.components
    comps = [k for k, w in cm.winding.items() if w != 0]
    if not comps:
        return {"witness": True, "contained": False, "fraction": 0.0}
    comp = max(comps, key=lambda k: cm.areas[k])
    w_pts = _mask_points(*_component_region(cm, comp))
    Fh = horizontal_part(surface)
    nu = min(len(surface.u_nodes), 256 * sample_factor)
    nv = min(len(surface.v_nodes), 256 * sample_factor)
    uu = np.linspace(surface.u_nodes[0], surface.u_nodes[-1], nu)
    vv = np.linspace(surface.v_nodes[0], surface.v_nodes[-1], nv)
    U, Vg = np.meshgrid(uu, vv)
    dom = np.column_stack([U.ravel(), Vg.ravel()])
    img = np.asarray(Fh(dom), dtype=float)
    # local image mesh: neighbor steps along the sampling grid
    step_u = np.hypot(*(img.reshape(nv, nu, 2)[:, 1:] - img.reshape(nv, nu, 2)[:, :-1]).transpose(2, 0, 1))
    step_v = np.hypot(*(img.reshape(nv, nu, 2)[1:, :] - img.reshape(nv, nu, 2)[:-1, :]).transpose(2, 0, 1))
    tol = 2.0 * max(float(step_u.max()), float(step_v.max()))
    tree = cKDTree(img)
    d, _ = tree.query(w_pts, k=1)
    frac = float(np.mean(d <= tol))
    return {"witness": True, "contained": frac >= 1.0, "fraction": frac,
            "tolerance": tol, "component_area": cm.areas[comp]}
