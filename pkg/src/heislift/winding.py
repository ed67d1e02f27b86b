"""Winding numbers, complement decompositions, mapping degree and loop surgery.

The winding number of a closed polyline is computed by signed ray-crossing
counts with a half-open edge rule, which yields exact integers without
epsilon tuning as long as the query point is off the curve.  Complements of
closed curves are decomposed on a raster (ComponentMap); the identity
"signed area = sum over components of winding times area" is then a testable
equation rather than a theorem.  The mapping degree of a sampled map over an
open set is the winding number of the boundary image, with a safety margin
of twice the sampled modulus of continuity.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .curves import SampledCurve, signed_area
from .errors import DomainError, MarginError, OnCurveError, PreconditionError
from .rasters import (
    Grid2D,
    grid_over_bbox,
    label_cells,
    mark_segments,
    mask_contours,
    refine_polyline,
    winding_many,
)

__all__ = [
    "ComponentMap",
    "GeneralPositionReport",
    "UnitLoop",
    "winding_number",
    "component_map",
    "winding_area_sum",
    "winding_mass",
    "mapping_degree",
    "degree_of_region",
    "check_sum_property",
    "check_locality",
    "check_homotopy_invariance",
    "check_multiplication_formula",
    "check_degree_axioms",
    "general_position_report",
    "extract_unit_loop",
    "cylinder_flatten",
]


def _loop_points(gamma) -> np.ndarray:
    if isinstance(gamma, SampledCurve):
        if not gamma.closed:
            raise DomainError("expected a closed curve")
        return gamma.planar().points
    pts = np.asarray(gamma, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise DomainError("polyline must be (n, 2)")
    return pts


def _closed_points(pts: np.ndarray) -> np.ndarray:
    """Normalize a loop so the last point repeats the first exactly."""
    diam = _diameter(pts)
    if float(np.max(np.abs(pts[0] - pts[-1]))) <= 1e-9 * diam:
        out = pts.copy()
        out[-1] = out[0]
        return out
    return np.vstack([pts, pts[0]])


def _point(q) -> np.ndarray:
    a = np.asarray(getattr(q, "as_array", lambda: q)(), dtype=float).reshape(-1)
    if a.shape != (2,) or not np.all(np.isfinite(a)):
        raise DomainError(f"bad planar point {q}")
    return a


def _distance_to_segments(pts: np.ndarray, q: np.ndarray) -> float:
    a = pts[:-1]
    b = pts[1:]
    d = b - a
    seg_len2 = np.einsum("ij,ij->i", d, d)
    t = np.clip(np.einsum("ij,ij->i", q[None, :] - a, d) / np.where(seg_len2 > 0, seg_len2, 1.0), 0.0, 1.0)
    proj = a + t[:, None] * d
    return float(np.min(np.hypot(proj[:, 0] - q[0], proj[:, 1] - q[1])))


def winding_number(gamma, q, snap_tol: float | None = None) -> int:
    """Exact winding number of a closed polyline around an off-curve point."""
    pts = _loop_points(gamma)
    qq = _point(q)
    closed_pts = _closed_points(pts)
    if snap_tol is None:
        diam = float(np.max(closed_pts.max(axis=0) - closed_pts.min(axis=0)))
        snap_tol = 1e-12 * max(1.0, diam)
    if _distance_to_segments(closed_pts, qq) <= snap_tol:
        raise OnCurveError(f"query point {tuple(qq)} lies on the curve")
    return int(winding_many(closed_pts, qq[None, :])[0])


@dataclass(frozen=True)
class ComponentMap:
    """Raster decomposition of the complement of a closed planar curve.

    labels holds -1 on cells meeting the curve and the component id
    elsewhere; winding/areas map component ids to the locally constant
    winding number and the covered cell area.  The winding density over the
    components is the concrete form of the curve's filling.
    """

    grid: Grid2D
    labels: np.ndarray
    winding: dict[int, int]
    areas: dict[int, float]
    unbounded_id: int
    representatives: dict[int, tuple[float, float]] = field(default_factory=dict)

    @property
    def resolution(self) -> int:
        return max(self.grid.nx, self.grid.ny)

    @property
    def bbox(self) -> tuple[float, float, float, float]:
        return self.grid.bbox

    def component_of(self, pts: np.ndarray) -> np.ndarray:
        """Component id of points (-1 on boundary cells or outside the grid)."""
        ix, iy = self.grid.cell_of(pts)
        out = np.full(len(ix), -1, dtype=int)
        ok = (ix >= 0) & (ix < self.grid.nx) & (iy >= 0) & (iy < self.grid.ny)
        out[ok] = self.labels[iy[ok], ix[ok]]
        return out


def component_map(gamma, resolution: int = 256, pad: float = 0.05,
                  min_short: int | None = None) -> ComponentMap:
    """Label the complement of a closed curve and attach windings and areas.

    Cells whose closed square meets the curve are boundary (-1); the rest is
    labeled by 4-connectivity, so a label can never straddle the curve.  The
    winding of each component is evaluated at its first cell center in scan
    order (a safe h/2 away from the curve); the unique component touching the
    padded frame is the unbounded one and carries winding 0.
    """
    if resolution < 16:
        raise DomainError("resolution must be at least 16")
    pts = _loop_points(gamma)
    closed_pts = _closed_points(pts)
    lo = closed_pts.min(axis=0)
    hi = closed_pts.max(axis=0)
    if not np.all(np.isfinite(lo)) or not np.all(np.isfinite(hi)):
        raise DomainError("degenerate bbox")
    span = float(max(hi[0] - lo[0], hi[1] - lo[1]))
    if span == 0.0:
        span = 1.0  # constant curve: give the point a unit-sized stage
        lo = lo - 0.5
        hi = hi + 0.5
    grid = grid_over_bbox((lo[0], lo[1], hi[0], hi[1]), resolution,
                          pad=max(pad, 3.0 / resolution), min_short=min_short)
    on_curve = mark_segments(grid, closed_pts)
    labels_raw, count = label_cells(~on_curve)
    labels = labels_raw - 1  # -1 for boundary, components from 0

    frame = np.zeros_like(on_curve)
    frame[0, :] = frame[-1, :] = frame[:, 0] = frame[:, -1] = True
    frame_ids = np.unique(labels[frame & (labels >= 0)])
    if len(frame_ids) != 1:
        raise DomainError("padded frame is not a single off-curve component")
    unbounded = int(frame_ids[0])

    cx, cy = grid.centers()
    winding: dict[int, int] = {}
    areas: dict[int, float] = {}
    reps: dict[int, tuple[float, float]] = {}
    flat = labels.ravel()
    order = np.argsort(flat, kind="stable")
    sorted_flat = flat[order]
    firsts = np.searchsorted(sorted_flat, np.arange(count))
    counts = np.bincount(flat[flat >= 0], minlength=count)
    rep_pts = []
    for comp in range(count):
        pos = order[firsts[comp]]
        iy, ix = divmod(int(pos), grid.nx)
        rep_pts.append((cx[ix], cy[iy]))
    rep_arr = np.asarray(rep_pts).reshape(-1, 2)
    wn = winding_many(closed_pts, rep_arr) if count else np.empty(0, dtype=int)
    for comp in range(count):
        winding[comp] = int(wn[comp])
        areas[comp] = float(counts[comp]) * grid.cell_area
        reps[comp] = (float(rep_arr[comp, 0]), float(rep_arr[comp, 1]))
    if winding[unbounded] != 0:
        raise DomainError("unbounded component computed nonzero winding")
    return ComponentMap(grid=grid, labels=labels, winding=winding, areas=areas,
                        unbounded_id=unbounded, representatives=reps)


def winding_area_sum(cm: ComponentMap) -> float:
    """Sum over components of winding times area (the filling's area integral)."""
    return float(sum(cm.winding[k] * cm.areas[k] for k in cm.winding))


def winding_mass(cm: ComponentMap) -> float:
    """Sum over components of |winding| times area (the filling's mass)."""
    return float(sum(abs(cm.winding[k]) * cm.areas[k] for k in cm.winding))


def _region_contours(region):
    """Oriented boundary polylines of an open-set description.

    Accepts a single closed polyline, a sequence of polylines (outer
    contours counterclockwise, holes clockwise), or a (Grid2D, mask) pair.
    """
    if isinstance(region, tuple) and len(region) == 2 and isinstance(region[0], Grid2D):
        return mask_contours(region[0], np.asarray(region[1], dtype=bool))
    if isinstance(region, SampledCurve):
        return [_loop_points(region)]
    if isinstance(region, np.ndarray) and region.ndim == 2:
        return [np.asarray(region, dtype=float)]
    if isinstance(region, (list, tuple)):
        return [np.asarray(_loop_points(c), dtype=float) for c in region]
    return [np.asarray(region, dtype=float)]


def mapping_degree(phi, region, q, samples_per_edge: int = 8,
                   margin_factor: float = 2.0, max_refine: int = 6) -> int:
    """Degree of a sampled map over an open set, via boundary winding.

    ``phi`` maps (n, 2) arrays to (n, 2) arrays.  The boundary contours are
    refined, pushed through ``phi``, and the winding of the image polylines
    around ``q`` is summed.  The target must keep a distance of at least
    ``margin_factor`` times the largest image step from the sampled boundary
    image; closer than that the polyline winding can no longer be trusted to
    match the continuous map.  Refinement is doubled up to ``max_refine``
    times until the margin holds, after which a MarginError is raised.
    """
    qq = _point(q)
    contours = _region_contours(region)
    if not contours:
        raise DomainError("region has empty boundary")
    total = 0
    for loop in contours:
        pts = np.asarray(loop, dtype=float)
        steps = np.hypot(*(np.roll(pts, -1, axis=0) - pts).T)
        max_len = float(np.max(steps))
        sub = max_len / samples_per_edge
        for attempt in range(max_refine + 1):
            fine = refine_polyline(pts, sub, closed=True)
            img = np.asarray(phi(fine), dtype=float)
            img_closed = np.vstack([img, img[0]])
            img_steps = np.hypot(*(img_closed[1:] - img_closed[:-1]).T)
            margin = margin_factor * float(np.max(img_steps))
            dist = float(np.min(np.hypot(img[:, 0] - qq[0], img[:, 1] - qq[1])))
            if dist > margin:
                break
            if attempt == max_refine:
                raise MarginError(
                    f"target at distance {dist:.3g} from sampled boundary image; "
                    f"need more than {margin:.3g}")
            sub *= 0.5
        total += int(winding_many(img_closed, qq[None, :])[0])
    return total


def degree_of_region(phi, grid: Grid2D, mask: np.ndarray, q,
                     samples_per_edge: int = 8, margin_factor: float = 2.0) -> int:
    """Degree over a raster open set (union of open cells)."""
    return mapping_degree(phi, (grid, mask), q,
                          samples_per_edge=samples_per_edge, margin_factor=margin_factor)


def check_sum_property(phi, parts, q, **kw) -> dict:
    """Degree over a disjoint union equals the sum of the parts' degrees."""
    degs = [mapping_degree(phi, part, q, **kw) for part in parts]
    whole = sum(degs)
    contours = []
    for part in parts:
        contours.extend(_region_contours(part))
    lhs = mapping_degree(phi, contours, q, **kw)
    return {"axiom": "sum", "lhs": lhs, "rhs_terms": degs, "rhs": whole, "equal": lhs == whole}


def check_locality(phi, V, K, q, interior_grid: int = 48, **kw) -> dict:
    """Removing a closed set K with q not in phi(K u dV) keeps the degree."""
    qq = _point(q)
    lhs = mapping_degree(phi, V, q, **kw)
    v_contours = _region_contours(V)
    k_contours = _region_contours(K)
    # sample the interior of K on a coarse grid to audit q not in phi(K)
    for loop in k_contours:
        pts = np.asarray(loop, float)
        lo, hi = pts.min(axis=0), pts.max(axis=0)
        gx = np.linspace(lo[0], hi[0], interior_grid)
        gy = np.linspace(lo[1], hi[1], interior_grid)
        X, Y = np.meshgrid(gx, gy)
        P = np.column_stack([X.ravel(), Y.ravel()])
        inside = winding_many(np.vstack([pts, pts[0]]), P) != 0
        probe = np.vstack([P[inside], refine_polyline(pts, _diameter(pts) / 128.0, closed=True)])
        img = np.asarray(phi(probe), dtype=float)
        gap = float(np.min(np.hypot(img[:, 0] - qq[0], img[:, 1] - qq[1])))
        if gap <= 1e-9 * max(1.0, _diameter(img)):
            raise PreconditionError("q meets the sampled image of K")
    holes = [np.asarray(loop, float)[::-1] for loop in k_contours]
    rhs = mapping_degree(phi, v_contours + holes, q, **kw)
    return {"axiom": "locality", "lhs": lhs, "rhs": rhs, "equal": lhs == rhs}


def check_homotopy_invariance(H, V, q_path, checkpoints: int = 10, **kw) -> dict:
    """deg(q(t), H_t, V) is constant along a homotopy avoiding the boundary image."""
    ts = np.linspace(0.0, 1.0, checkpoints)
    degs = []
    for t in ts:
        phi_t = lambda pts, _t=t: H(_t, pts)
        degs.append(mapping_degree(phi_t, V, q_path(t), **kw))
    return {"axiom": "homotopy", "degrees": degs, "equal": len(set(degs)) == 1}


def check_multiplication_formula(phi, psi, V, W_bbox, q, resolution: int = 512, **kw) -> dict:
    """deg(q, psi o phi, V) = sum over components W_l of W \\ phi(dV).

    The intermediate open set W (given by bbox, must contain phi(closure V))
    is decomposed by the image of the boundary of V; each component
    contributes deg(q, psi, W_l) * deg(W_l, phi, V).
    """
    lhs = mapping_degree(lambda p: psi(phi(p)), V, q, **kw)
    contours = _region_contours(V)
    fine = [refine_polyline(np.asarray(c, float), _diameter(c) / 256.0, closed=True) for c in contours]
    images = [np.asarray(phi(f), dtype=float) for f in fine]

    grid = grid_over_bbox(W_bbox, resolution)
    blocked = np.zeros((grid.ny, grid.nx), dtype=bool)
    for img in images:
        blocked |= mark_segments(grid, np.vstack([img, img[0]]))
    labels, count = label_cells(~blocked)
    total = 0
    terms = []
    for comp in range(1, count + 1):
        cells = np.nonzero(labels == comp)
        iy, ix = cells[0][0], cells[1][0]
        cx = grid.x0 + (ix + 0.5) * grid.h
        cy = grid.y0 + (iy + 0.5) * grid.h
        w_rep = np.array([cx, cy])
        deg_w_phi = 0
        for img in images:
            deg_w_phi += int(winding_many(np.vstack([img, img[0]]), w_rep[None, :])[0])
        if deg_w_phi == 0:
            continue
        deg_q_psi = degree_of_region(psi, grid, labels == comp, q, **kw)
        terms.append((deg_q_psi, deg_w_phi))
        total += deg_q_psi * deg_w_phi
    return {"axiom": "multiplication", "lhs": lhs, "rhs": total, "terms": terms,
            "equal": lhs == total}


def check_degree_axioms(axiom: str, **kwargs) -> dict:
    """Dispatch to one of the degree-axiom checkers by name."""
    table = {
        "sum": check_sum_property,
        "locality": check_locality,
        "homotopy": check_homotopy_invariance,
        "multiplication": check_multiplication_formula,
    }
    if axiom not in table:
        raise DomainError(f"unknown axiom {axiom!r}; choose from {sorted(table)}")
    return table[axiom](**kwargs)


def _diameter(pts) -> float:
    a = np.asarray(pts, dtype=float)
    lo = a.min(axis=0)
    hi = a.max(axis=0)
    return float(np.max(hi - lo)) or 1.0


@dataclass(frozen=True)
class GeneralPositionReport:
    """Self-intersection audit of a closed curve.

    double_points holds parameter pairs (s, s') with gamma(s) = gamma(s');
    a curve is in general position when these are finitely many transversal
    double points, no image point carrying more than two parameters.
    """

    double_points: list[tuple[float, float]]
    is_general_position: bool
    max_multiplicity: int
    has_overlap: bool = False


def _segment_intersections(pts: np.ndarray, times: np.ndarray, snap_tol: float):
    """All proper pairwise segment intersections of a closed polyline.

    Returns (locations, parameters, overlap_found).  Shared endpoints of
    adjacent segments are not intersections; collinear overlapping segments
    set the overlap flag.
    """
    n = len(pts) - 1
    a = pts[:-1]
    d = pts[1:] - pts[:-1]
    locs, params = [], []
    overlap = False
    for i in range(n):
        js = np.arange(i + 1, n)
        if len(js) == 0:
            continue
        r = d[i]
        qs = a[js]
        ss = d[js]
        denom = r[0] * ss[:, 1] - r[1] * ss[:, 0]
        diff = qs - a[i]
        num_t = diff[:, 0] * ss[:, 1] - diff[:, 1] * ss[:, 0]
        num_u = diff[:, 0] * r[1] - diff[:, 1] * r[0]
        with np.errstate(divide="ignore", invalid="ignore"):
            t = num_t / denom
            u = num_u / denom
        parallel = np.abs(denom) <= snap_tol * (np.abs(r).sum() + np.abs(ss).sum(axis=1))
        # collinear parallel segments with overlapping spans along the carrier
        for k, j in enumerate(js):
            if not parallel[k]:
                continue
            cross_gap = abs(diff[k, 0] * r[1] - diff[k, 1] * r[0])
            if cross_gap > snap_tol * max(1.0, np.abs(r).sum()):
                continue
            proj = (float(diff[k] @ r), float((diff[k] + ss[k]) @ r))
            lo, hi = min(proj), max(proj)
            if hi > snap_tol and lo < float(r @ r) - snap_tol:
                overlap = True
        ok = (~parallel) & (t > -1e-12) & (t < 1 + 1e-12) & (u > -1e-12) & (u < 1 + 1e-12)
        for k in np.nonzero(ok)[0]:
            j = int(js[k])
            tt, uu = float(t[k]), float(u[k])
            s_i = times[i] + tt * (times[i + 1] - times[i])
            s_j = times[j] + uu * (times[j + 1] - times[j])
            # adjacent segments meeting at their shared vertex
            if j == i + 1 and tt > 1 - 1e-9 and uu < 1e-9:
                continue
            if i == 0 and j == n - 1 and tt < 1e-9 and uu > 1 - 1e-9:
                continue
            locs.append(a[i] + tt * r)
            params.append((s_i, s_j))
    return locs, params, overlap


def general_position_report(gamma, snap_tol: float | None = None) -> GeneralPositionReport:
    """Enumerate double points and decide general position.

    Intersection points are clustered at ``snap_tol`` (default 1e-9 times the
    diameter); a cluster's multiplicity is the number of distinct curve
    parameters through it.  Zero-length edges after snapping are rejected.
    """
    if isinstance(gamma, SampledCurve):
        pts = gamma.planar().points
        times = gamma.times
        if not gamma.closed:
            raise DomainError("general position analysis expects a closed curve")
    else:
        pts = np.asarray(gamma, dtype=float)
        times = np.linspace(0.0, 1.0, len(pts))
    diam = _diameter(pts)
    if snap_tol is None:
        snap_tol = 1e-9 * diam
    if float(np.max(np.abs(pts[0] - pts[-1]))) <= snap_tol:
        pts = pts.copy()
        pts[-1] = pts[0]
    else:
        pts = np.vstack([pts, pts[0]])
        times = np.append(times, times[-1] + (times[-1] - times[0]) / max(1, len(times) - 1))
    edge_len = np.hypot(*(pts[1:] - pts[:-1]).T)
    if np.any(edge_len <= snap_tol):
        raise DomainError("polyline has zero-length edges at snapping tolerance")

    locs, params, overlap = _segment_intersections(pts, times, snap_tol)
    if overlap:
        return GeneralPositionReport(double_points=[], is_general_position=False,
                                     max_multiplicity=int(1e9), has_overlap=True)
    if not locs:
        return GeneralPositionReport(double_points=[], is_general_position=True,
                                     max_multiplicity=0)
    locs_arr = np.asarray(locs)
    # cluster intersection locations at the snapping tolerance
    clusters: list[list[int]] = []
    assigned = np.full(len(locs_arr), -1, dtype=int)
    for idx in range(len(locs_arr)):
        for ci, cl in enumerate(clusters):
            if np.hypot(*(locs_arr[cl[0]] - locs_arr[idx])) <= 4 * snap_tol:
                cl.append(idx)
                assigned[idx] = ci
                break
        if assigned[idx] < 0:
            clusters.append([idx])
            assigned[idx] = len(clusters) - 1

    t_span = times[-1] - times[0]
    pairs = []
    max_mult = 0
    ok = True
    for cl in clusters:
        svals: list[float] = []
        for idx in cl:
            for s in params[idx]:
                if not any(abs(s - s2) <= 1e-7 * t_span or
                           abs(abs(s - s2) - t_span) <= 1e-7 * t_span for s2 in svals):
                    svals.append(s)
        svals.sort()
        max_mult = max(max_mult, len(svals))
        if len(svals) != 2:
            ok = False
            continue
        pairs.append((svals[0], svals[1]))
    pairs.sort()
    return GeneralPositionReport(double_points=pairs, is_general_position=ok,
                                 max_multiplicity=max_mult)


def _point_at(gamma: SampledCurve, s: float) -> np.ndarray:
    t = gamma.times
    pts = gamma.planar().points
    s = min(max(s, t[0]), t[-1])
    i = int(np.searchsorted(t, s, side="right")) - 1
    i = min(max(i, 0), len(t) - 2)
    f = (s - t[i]) / (t[i + 1] - t[i])
    return pts[i] + f * (pts[i + 1] - pts[i])


def _arc_points(gamma: SampledCurve, s0: float, s1: float) -> np.ndarray:
    """Sample polyline of the closed arc [s0, s1] (cyclic when s1 < s0)."""
    t = gamma.times
    pts = gamma.planar().points
    if s1 < s0:
        first = _arc_points(gamma, s0, t[-1])
        second = _arc_points(gamma, t[0], s1)
        return np.vstack([first, second[1:]])
    inside = (t > s0) & (t < s1)
    chain = [
        _point_at(gamma, s0)[None, :],
        pts[inside],
        _point_at(gamma, s1)[None, :],
    ]
    return np.vstack(chain)


@dataclass(frozen=True)
class UnitLoop:
    s: float
    s_prime: float
    arc_points: np.ndarray
    winding: int


def extract_unit_loop(gamma: SampledCurve, q, snap_tol: float | None = None) -> UnitLoop:
    """Cut a sub-loop of unit winding out of a curve winding at least twice.

    Zero-winding sub-loops at double points are contracted recursively (their
    removal changes no remaining arc winding); among the surviving double
    points, the pair whose arc contains no other complete pair bounds a
    Jordan sub-loop, whose winding is then forced to be +-1.
    """
    report = general_position_report(gamma, snap_tol=snap_tol)
    if not report.is_general_position:
        raise PreconditionError("curve is not in general position")
    w_total = winding_number(gamma, q)
    if abs(w_total) < 2:
        raise PreconditionError(f"need |winding| >= 2 at the query point, got {w_total}")

    t0, t1 = gamma.times[0], gamma.times[-1]
    span = t1 - t0

    def arc_winding(s0: float, s1: float) -> int:
        arc = _arc_points(gamma, s0, s1)
        return int(winding_many(np.vstack([arc, arc[0]]), _point(q)[None, :])[0])

    pairs = list(report.double_points)
    wind_in = {p: arc_winding(p[0], p[1]) for p in pairs}

    def length_of(p, inner: bool) -> float:
        ell = p[1] - p[0]
        return ell if inner else span - ell

    # contract zero-winding sub-loops; arc windings of survivors are unchanged
    active = set(pairs)
    changed = True
    while changed:
        changed = False
        zero = [p for p in sorted(active) if wind_in[p] == 0 or wind_in[p] == w_total]
        # wind_in == w_total means the complementary arc has zero winding
        for p in sorted(zero, key=lambda p: min(length_of(p, True), length_of(p, False))):
            if p not in active:
                continue
            if wind_in[p] == 0:
                lo, hi, inner = p[0], p[1], True
            else:
                lo, hi, inner = p[1], p[0], False
            removed = {p}
            for r in active:
                if r == p:
                    continue
                for s in r:
                    in_arc = (lo < s < hi) if inner else (s < hi or s > lo)
                    if in_arc:
                        removed.add(r)
                        break
            active -= removed
            changed = True
            break

    if not active:
        raise PreconditionError("no double points survive loop contraction")

    # the shortest arc holding no complete surviving pair bounds a Jordan loop
    best = None
    for p in sorted(active):
        for (lo, hi, inner) in ((p[0], p[1], True), (p[1], p[0], False)):
            ell = (hi - lo) if inner else (span - (lo - hi))
            clean = True
            for r in active:
                if r == p:
                    continue
                inside = [((lo < s < hi) if inner else (s > lo or s < hi)) for s in r]
                if all(inside):
                    clean = False
                    break
            if clean and (best is None or ell < best[0]):
                best = (ell, lo, hi, inner)
    if best is None:
        raise PreconditionError("no innermost double-point arc found")
    _, lo, hi, inner = best
    if inner:
        arc = _arc_points(gamma, lo, hi)
        s, s_prime = lo, hi
    else:
        arc = _arc_points(gamma, lo, hi)  # cyclic wrap
        s, s_prime = lo, hi
    w = int(winding_many(np.vstack([arc, arc[0]]), _point(q)[None, :])[0])
    if abs(w) != 1:
        raise PreconditionError(f"extracted arc has winding {w}, expected +-1")
    return UnitLoop(s=s, s_prime=s_prime, arc_points=arc, winding=w)


def cylinder_flatten(gamma: SampledCurve, cylinder_tol: float = 0.5,
                     axis_tol: float = 1e-9) -> SampledCurve:
    """Flatten a closed loop on the unit cylinder to the plane, keeping winding.

    After normalizing the height range to [0, 1], applies
    (x, y, z) -> ((z+1)x, (z+1)y) and drops z.  The radial factor stays in
    [1, 2], so the homotopy from the straight projection misses the origin
    and the winding about 0 is preserved.
    """
    if gamma.dim != 3:
        raise DomainError("cylinder flattening expects a space curve")
    if not gamma.closed:
        raise DomainError("cylinder flattening expects a closed curve")
    pts = gamma.points
    radius = np.hypot(pts[:, 0], pts[:, 1])
    if np.any(np.abs(radius - 1.0) > cylinder_tol):
        raise DomainError("curve strays farther than the tolerance from the unit cylinder")
    if np.any(radius <= axis_tol):
        raise DomainError("curve meets the cylinder axis after projection")
    z = pts[:, 2]
    zmin, zmax = float(z.min()), float(z.max())
    zn = np.zeros_like(z) if zmax == zmin else (z - zmin) / (zmax - zmin)
    factor = zn + 1.0
    flat = np.column_stack([factor * pts[:, 0], factor * pts[:, 1]])
    flat[-1] = flat[0]
    return SampledCurve(gamma.times, flat, closed=True)
