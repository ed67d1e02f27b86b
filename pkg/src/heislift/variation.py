"""Indicator domains, multiplicity lower bounds and bounded-variation diagnostics.

The multiplicity of a target q under a sampled planar map phi over an open
set V is bounded from below by summing |degree| over pairwise disjoint
connected open sets whose closures avoid the boundary and whose boundary
images keep a safe margin from q.  The bound is certified (never an upper
bound): domains the margin cannot certify are simply dropped.  Preimage
counting works cell-by-cell on an image raster, clustering the domain cells
that map into each image cell; collapsed clusters (large domain patches with
point-like images) are flagged as divergent rather than counted.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage, sparse
from scipy.sparse import csgraph

from .errors import DomainError, MarginError, PreconditionError
from .rasters import (
    Grid2D,
    grid_over_bbox,
    label_cells,
    mask_contours,
    refine_polyline,
    winding_many,
)
from .winding import _point, degree_of_region, mapping_degree

__all__ = [
    "IndicatorDomain",
    "MultiplicityField",
    "EbvReport",
    "IndexReport",
    "rasterize_region",
    "multiplicity_lower_bound",
    "validate_indicator_domain",
    "preimage_count_field",
    "classify_regular_points",
    "ebv_diagnostic",
    "index_at_regular_point",
]

_FOUR = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)


@dataclass(frozen=True)
class IndicatorDomain:
    """A connected open raster set with nonzero degree at the target point."""

    grid: Grid2D
    mask: np.ndarray
    degree_at_q: int
    scale: float

    def __post_init__(self):
        if self.degree_at_q == 0:
            raise DomainError("indicator domain must have nonzero degree")

    def contours(self) -> list[np.ndarray]:
        return mask_contours(self.grid, self.mask)

    @property
    def area(self) -> float:
        return float(np.count_nonzero(self.mask)) * self.grid.cell_area


def rasterize_region(region, resolution: int = 256, pad: float = 0.02) -> tuple[Grid2D, np.ndarray]:
    """Cell mask of an open set given as polygon, (grid, mask) or bbox tuple.

    Polygon regions keep the cells whose center lies inside with the full
    closed square clear of the boundary polyline, so the mask closure stays
    inside the region.
    """
    if isinstance(region, tuple) and len(region) == 2 and isinstance(region[0], Grid2D):
        return region[0], np.asarray(region[1], dtype=bool)
    if isinstance(region, tuple) and len(region) == 4:
        grid = grid_over_bbox(region, resolution)
        return grid, np.ones((grid.ny, grid.nx), dtype=bool)
    poly = np.asarray(region, dtype=float)
    if poly.ndim != 2 or poly.shape[1] != 2:
        raise DomainError("region must be a polygon, a bbox or a (grid, mask) pair")
    lo, hi = poly.min(axis=0), poly.max(axis=0)
    grid = grid_over_bbox((lo[0], lo[1], hi[0], hi[1]), resolution, pad=pad)
    closed = np.vstack([poly, poly[0]]) if np.any(poly[0] != poly[-1]) else poly
    from .rasters import mark_segments

    touched = mark_segments(grid, closed)
    centers = grid.center_points()
    inside = winding_many(closed, centers) != 0
    return grid, inside.reshape(grid.ny, grid.nx) & ~touched


def _components_of(mask: np.ndarray) -> tuple[np.ndarray, int]:
    return label_cells(mask)


def _touches_border(mask: np.ndarray, allowed: np.ndarray) -> bool:
    """Does the mask touch cells outside ``allowed`` or the grid frame?"""
    grown = ndimage.binary_dilation(mask, structure=_FOUR)
    if np.any(grown & ~allowed):
        return True
    return bool(np.any(mask[0, :]) or np.any(mask[-1, :]) or
                np.any(mask[:, 0]) or np.any(mask[:, -1]))


def multiplicity_lower_bound(phi, V, q, refinement_depth: int = 3,
                             resolution: int = 256,
                             initial_scale: float | None = None,
                             margin_factor: float = 2.0,
                             ) -> tuple[int, list[IndicatorDomain]]:
    """Certified lower bound for the multiplicity of q under phi over V.

    For a dyadically decreasing ladder of radii s the candidate domains are
    the connected components of {p in V : |phi(p) - q| <= s} with bounded
    complement holes filled; each component whose closure stays inside V and
    whose sampled boundary image keeps the safety margin from q contributes
    |deg(q, phi, component)|.  The returned bound is the maximum over the
    ladder and is monotone nondecreasing in ``refinement_depth``; the witness
    family realizing it (finest such scale) accompanies the bound.
    """
    if refinement_depth < 1:
        raise DomainError("refinement_depth must be at least 1")
    qq = _point(q)
    grid, vmask = rasterize_region(V, resolution=resolution)
    centers = grid.center_points()
    img = np.asarray(phi(centers), dtype=float)
    dist = np.hypot(img[:, 0] - qq[0], img[:, 1] - qq[1]).reshape(grid.ny, grid.nx)
    if initial_scale is None:
        finite = dist[vmask]
        if finite.size == 0:
            raise DomainError("V rasterizes to the empty set")
        initial_scale = float(np.max(finite)) * 0.5
    best = 0
    best_witness: list[IndicatorDomain] = []
    for level in range(refinement_depth):
        s = initial_scale * 0.5**level
        mask = (dist <= s) & vmask
        if not mask.any():
            continue
        filled = ndimage.binary_fill_holes(mask)
        labels, count = _components_of(filled)
        score = 0
        witness: list[IndicatorDomain] = []
        for comp in range(1, count + 1):
            comp_mask = labels == comp
            if _touches_border(comp_mask, vmask):
                continue
            try:
                deg = degree_of_region(phi, grid, comp_mask, qq, margin_factor=margin_factor)
            except MarginError:
                continue
            if deg != 0:
                score += abs(deg)
                witness.append(IndicatorDomain(grid=grid, mask=comp_mask, degree_at_q=deg, scale=s))
        if score >= best and witness:
            best = score
            best_witness = witness
    return best, best_witness


def validate_indicator_domain(dom: IndicatorDomain, phi, V, q,
                              margin_factor: float = 2.0) -> dict:
    """Re-check the four indicator conditions independently of the search."""
    qq = _point(q)
    _, count = _components_of(dom.mask)
    connected = count == 1
    grid, vmask = rasterize_region(V, resolution=max(dom.grid.nx, dom.grid.ny))
    closure_inside = not _touches_border(dom.mask, vmask) if grid.h == dom.grid.h else True
    margins_ok = True
    for loop in dom.contours():
        fine = refine_polyline(loop, dom.grid.h * 0.5, closed=True)
        image = np.asarray(phi(fine), dtype=float)
        steps = np.hypot(*np.diff(np.vstack([image, image[:1]]), axis=0).T)
        gap = float(np.min(np.hypot(image[:, 0] - qq[0], image[:, 1] - qq[1])))
        if gap <= margin_factor * float(np.max(steps)):
            margins_ok = False
    deg = degree_of_region(phi, dom.grid, dom.mask, qq, margin_factor=margin_factor)
    return {
        "connected": connected,
        "closure_inside": closure_inside,
        "margin_ok": margins_ok,
        "degree_nonzero": deg != 0,
        "degree": deg,
        "all_ok": connected and closure_inside and margins_ok and deg != 0,
    }


@dataclass(frozen=True)
class MultiplicityField:
    """Per-image-cell preimage statistics of a sampled map.

    ``counts`` holds the number of connected domain clusters mapping into
    each image cell, ``k_lower`` the certified multiplicity lower bound
    (where resolved), and ``divergent`` flags cells whose clusters collapse
    area onto a point at sample scale.
    """

    image_grid: Grid2D
    counts: np.ndarray
    k_lower: np.ndarray
    k_resolved: np.ndarray
    divergent: np.ndarray
    preimage_integral: float
    k_integral_lower: float
    a_k_areas: dict[int, float] = field(default_factory=dict)

    @property
    def any_divergent(self) -> bool:
        return bool(self.divergent.any())


def _cluster_domain_cells(dom_grid: Grid2D, dom_mask: np.ndarray,
                          cell_id: np.ndarray) -> np.ndarray:
    """Group domain cells by 4-adjacency within equal image-cell id.

    ``cell_id`` is per domain cell (-1 for cells to ignore); returns cluster
    labels (-1 where ignored).
    """
    ny, nx = dom_grid.ny, dom_grid.nx
    ids = cell_id.reshape(ny, nx)
    valid = (ids >= 0) & dom_mask
    flat_idx = np.arange(nx * ny).reshape(ny, nx)
    rows = []
    cols = []
    right = valid[:, :-1] & valid[:, 1:] & (ids[:, :-1] == ids[:, 1:])
    rows.append(flat_idx[:, :-1][right])
    cols.append(flat_idx[:, 1:][right])
    up = valid[:-1, :] & valid[1:, :] & (ids[:-1, :] == ids[1:, :])
    rows.append(flat_idx[:-1, :][up])
    cols.append(flat_idx[1:, :][up])
    n = nx * ny
    graph = sparse.coo_matrix(
        (np.ones(sum(len(r) for r in rows), dtype=np.int8),
         (np.concatenate(rows), np.concatenate(cols))), shape=(n, n))
    _, labels = csgraph.connected_components(graph, directed=False)
    labels = labels.reshape(ny, nx).copy()
    labels[~valid] = -1
    # renumber the surviving clusters densely
    used = np.unique(labels[labels >= 0])
    remap = np.full(labels.max() + 2, -1, dtype=int)
    remap[used] = np.arange(len(used))
    labels[labels >= 0] = remap[labels[labels >= 0]]
    return labels


def preimage_count_field(phi, domain, image_bbox=None,
                         domain_resolution: int = 512,
                         image_resolution: int = 128,
                         compute_k_lower: bool = True,
                         boundary_subdiv: int = 4,
                         collapse_cells: int = 64,
                         margin_factor: float = 2.0) -> MultiplicityField:
    """Count preimage clusters per image cell and integrate them.

    Every domain cell is assigned to the image cell containing the image of
    its center; 4-connected clusters of equal assignment are the concrete
    preimage components at sample scale.  A cluster of at least
    ``collapse_cells`` cells whose image diameter stays below two image-cell
    diagonals collapses area to a point and marks its cell divergent.  The
    integral of the count field excludes divergent cells.

    With ``compute_k_lower`` the degree of phi over every cluster is computed
    in one vectorized pass over all cluster boundary edges; cells where every
    cluster's margin is certified get k_lower = sum |deg| (resolved), others
    stay unresolved.
    """
    dom_grid, dom_mask = rasterize_region(domain, resolution=domain_resolution)
    centers = dom_grid.center_points()
    img = np.asarray(phi(centers), dtype=float)
    if image_bbox is None:
        sel = dom_mask.ravel()
        lo = img[sel].min(axis=0)
        hi = img[sel].max(axis=0)
        image_bbox = (lo[0], lo[1], hi[0], hi[1])
    img_grid = grid_over_bbox(image_bbox, image_resolution, pad=0.01)
    ix, iy = img_grid.cell_of(img)
    in_img = (ix >= 0) & (ix < img_grid.nx) & (iy >= 0) & (iy < img_grid.ny)
    cell_id = np.where(in_img & dom_mask.ravel(), iy * img_grid.nx + ix, -1)

    labels = _cluster_domain_cells(dom_grid, dom_mask, cell_id)
    lab_flat = labels.ravel()
    have = lab_flat >= 0
    n_clusters = int(lab_flat.max()) + 1 if have.any() else 0

    counts = np.zeros(img_grid.ny * img_grid.nx, dtype=np.int64)
    divergent = np.zeros(img_grid.ny * img_grid.nx, dtype=bool)
    k_lower = np.zeros(img_grid.ny * img_grid.nx, dtype=np.int64)
    k_resolved = np.zeros(img_grid.ny * img_grid.nx, dtype=bool)

    if n_clusters:
        cl_cell = np.full(n_clusters, -1, dtype=np.int64)
        cl_cell[lab_flat[have]] = cell_id[have]
        cl_sizes = np.bincount(lab_flat[have], minlength=n_clusters)
        np.add.at(counts, cl_cell, 1)

        # image extent per cluster decides the collapse sentinel
        big = np.full(n_clusters, -np.inf)
        for axis in range(2):
            hi = np.full(n_clusters, -np.inf)
            lo = np.full(n_clusters, np.inf)
            np.maximum.at(hi, lab_flat[have], img[have, axis])
            np.minimum.at(lo, lab_flat[have], img[have, axis])
            big = np.maximum(big, hi - lo)
        collapse = (cl_sizes >= collapse_cells) & (big <= 2.0 * np.sqrt(2.0) * img_grid.h)
        divergent[cl_cell[collapse]] = True

        if compute_k_lower:
            degs, certified = _cluster_degrees(
                phi, dom_grid, labels, n_clusters, cl_cell, img_grid,
                boundary_subdiv, margin_factor)
            ok_cell = np.ones(img_grid.ny * img_grid.nx, dtype=bool)
            np.logical_and.at(ok_cell, cl_cell, certified)
            np.add.at(k_lower, cl_cell[certified], np.abs(degs[certified]))
            touched = np.zeros_like(ok_cell)
            touched[cl_cell] = True
            k_resolved = touched & ok_cell & ~divergent
            k_lower[~k_resolved] = 0

    cell_area = img_grid.cell_area
    good = ~divergent
    preimage_integral = float(np.sum(counts[good]) * cell_area)
    k_integral_lower = float(np.sum(k_lower[k_resolved]) * cell_area)
    max_count = int(counts[good].max()) if good.any() and counts[good].size else 0
    a_k = {}
    for k in range(1, max_count + 1):
        a_k[k] = float(np.count_nonzero(counts[good] >= k)) * cell_area
    return MultiplicityField(
        image_grid=img_grid,
        counts=counts.reshape(img_grid.ny, img_grid.nx),
        k_lower=k_lower.reshape(img_grid.ny, img_grid.nx),
        k_resolved=k_resolved.reshape(img_grid.ny, img_grid.nx),
        divergent=divergent.reshape(img_grid.ny, img_grid.nx),
        preimage_integral=preimage_integral,
        k_integral_lower=k_integral_lower,
        a_k_areas=a_k,
    )


def _cluster_degrees(phi, dom_grid: Grid2D, labels: np.ndarray, n_clusters: int,
                     cl_cell: np.ndarray, img_grid: Grid2D,
                     boundary_subdiv: int, margin_factor: float):
    """Degree of phi over every cluster against its image-cell center, batched."""
    from .rasters import boundary_edges

    ny, nx = labels.shape
    # boundary edges of all clusters at once: an edge of cell c is boundary
    # when the neighbor has a different label
    padded = np.full((ny + 2, nx + 2), -2, dtype=labels.dtype)
    padded[1:-1, 1:-1] = labels
    edge_list = []
    owner = []
    specs = [  # (neighbor slice, corner offsets from / to) interior on left
        ((0, -2, 1, -1), (0, 0, 1, 0)),   # south neighbor differs: bottom edge
        ((2, None, 1, -1), (1, 1, 0, 1)),  # north: top edge reversed
        ((1, -1, 0, -2), (0, 1, 0, 0)),   # west: left edge downward
        ((1, -1, 2, None), (1, 0, 1, 1)),  # east: right edge upward
    ]
    for (r0, r1, c0, c1), (fx, fy, tx, ty) in specs:
        nb = padded[r0:r1, c0:c1]
        here = labels
        sel = (here >= 0) & (nb != here)
        iy, ix = np.nonzero(sel)
        edge_list.append(np.stack([ix + fx, iy + fy, ix + tx, iy + ty], axis=1))
        owner.append(here[iy, ix])
    edges = np.concatenate(edge_list, axis=0)
    owners = np.concatenate(owner, axis=0)
    if len(edges) == 0:
        return np.zeros(n_clusters, dtype=np.int64), np.zeros(n_clusters, dtype=bool)

    a = dom_grid.corner(edges[:, 0], edges[:, 1])
    b = dom_grid.corner(edges[:, 2], edges[:, 3])
    k = max(1, boundary_subdiv)
    ts = np.arange(k + 1) / k
    pts = a[:, None, :] + ts[None, :, None] * (b - a)[:, None, :]
    flat_pts = pts.reshape(-1, 2)
    img_pts = np.asarray(phi(flat_pts), dtype=float).reshape(len(edges), k + 1, 2)

    cx = img_grid.x0 + (cl_cell % img_grid.nx + 0.5) * img_grid.h
    cy = img_grid.y0 + (cl_cell // img_grid.nx + 0.5) * img_grid.h
    targets = np.column_stack([cx, cy])

    seg_a = img_pts[:, :-1, :].reshape(-1, 2)
    seg_b = img_pts[:, 1:, :].reshape(-1, 2)
    group = np.repeat(owners, k)
    from .rasters import winding_batched

    degs = winding_batched(seg_a, seg_b, group, targets, n_clusters)

    qa = targets[group]
    gap = np.hypot(seg_a[:, 0] - qa[:, 0], seg_a[:, 1] - qa[:, 1])
    step = np.hypot(seg_b[:, 0] - seg_a[:, 0], seg_b[:, 1] - seg_a[:, 1])
    min_gap = np.full(n_clusters, np.inf)
    np.minimum.at(min_gap, group, gap)
    max_step = np.zeros(n_clusters)
    np.maximum.at(max_step, group, step)
    certified = min_gap > margin_factor * np.maximum(max_step, 1e-300)
    return degs, certified


def classify_regular_points(phi, domain, eps: float, delta: float,
                            resolution: int = 256,
                            bucket_limit: int = 4000) -> dict:
    """Partition sampled domain points into regular / irregular / unresolved.

    A grid point p is irregular at scale (eps, delta) when another grid point
    p' with 2h < |p' - p| <= eps has |phi(p') - phi(p)| <= delta; points
    whose local image step exceeds delta cannot be tested at this resolution
    and are reported unresolved.  Candidate pairs come from bucketing image
    values at delta scale; oversized buckets whose domain extent exceeds eps
    mark all their points irregular without pair enumeration.
    """
    grid, mask = rasterize_region(domain, resolution=resolution)
    if eps < 4 * grid.h:
        raise PreconditionError("eps must span at least 4 grid cells")
    pts = grid.center_points()[mask.ravel()]
    img = np.asarray(phi(pts), dtype=float)
    n = len(pts)
    irregular = np.zeros(n, dtype=bool)

    # resolution audit: can a fiber neighbor be seen at delta at all?
    imgs_full = np.asarray(phi(grid.center_points()), dtype=float).reshape(grid.ny, grid.nx, 2)
    dx = np.zeros((grid.ny, grid.nx))
    dx[:, :-1] = np.hypot(*(imgs_full[:, 1:] - imgs_full[:, :-1]).transpose(2, 0, 1))
    dy = np.zeros((grid.ny, grid.nx))
    dy[:-1, :] = np.hypot(*(imgs_full[1:, :] - imgs_full[:-1, :]).transpose(2, 0, 1))
    step_map = np.maximum(np.maximum(dx, np.roll(dx, 1, axis=1)),
                          np.maximum(dy, np.roll(dy, 1, axis=0)))
    unresolved = step_map.ravel()[mask.ravel()] > delta

    bx = np.floor(img[:, 0] / delta).astype(np.int64)
    by = np.floor(img[:, 1] / delta).astype(np.int64)
    r_res = 2.0 * grid.h

    from collections import defaultdict

    buckets: dict[tuple[int, int], list[int]] = defaultdict(list)
    for idx in range(n):
        buckets[(int(bx[idx]), int(by[idx]))].append(idx)

    for (kx, ky), members in buckets.items():
        cand: list[int] = []
        for ox in (-1, 0, 1):
            for oy in (-1, 0, 1):
                cand.extend(buckets.get((kx + ox, ky + oy), ()))
        if len(members) * len(cand) > bucket_limit * bucket_limit:
            arr = pts[members]
            if float(np.max(arr.max(axis=0) - arr.min(axis=0))) > r_res:
                irregular[members] = True
            continue
        mi = np.asarray(members)
        ci = np.asarray(cand)
        dd = np.hypot(pts[mi][:, None, 0] - pts[ci][None, :, 0],
                      pts[mi][:, None, 1] - pts[ci][None, :, 1])
        vd = np.hypot(img[mi][:, None, 0] - img[ci][None, :, 0],
                      img[mi][:, None, 1] - img[ci][None, :, 1])
        hit = (dd > r_res) & (dd <= eps) & (vd <= delta)
        irregular[mi[np.any(hit, axis=1)]] = True

    regular = ~irregular & ~unresolved
    return {
        "points": pts,
        "regular": regular,
        "irregular": irregular & ~unresolved,
        "unresolved": unresolved & ~irregular,
        "grid": grid,
        "mask": mask,
    }


@dataclass(frozen=True)
class EbvReport:
    k_integral_lower: float
    divergence_flag: bool
    twisting_witness: dict | None
    deg_integrals: list[tuple[int, float]]
    zero_mean: list[tuple[int, bool]]
    pointwise_violations: int
    field: MultiplicityField


def _dyadic_inner_masks(grid: Grid2D, mask: np.ndarray, levels: list[int]) -> list[tuple[int, np.ndarray]]:
    """Inner approximations by unions of dyadic blocks fully inside the mask."""
    out = []
    for n in levels:
        block = max(1, min(grid.nx, grid.ny) // n)
        ok = np.zeros_like(mask)
        for by in range(0, grid.ny - block + 1, block):
            for bx in range(0, grid.nx - block + 1, block):
                if mask[by:by + block, bx:bx + block].all():
                    ok[by:by + block, bx:bx + block] = True
        out.append((n, ok))
    return out


def ebv_diagnostic(phi, domain, image_resolution: int = 128,
                   domain_resolution: int = 256,
                   levels: list[int] | None = None,
                   expect_zero_mean: bool = False,
                   zero_mean_rtol: float = 0.05) -> EbvReport:
    """Bounded-variation diagnostics for a sampled planar map.

    Combines three computations: the integral of the certified multiplicity
    lower bound over the image raster, the integrals of deg(q, phi, V_n) for
    a nested family of inner approximations V_n (unions of dyadic blocks),
    and the pointwise comparison |deg| <= k_lower on co-resolved cells.
    The degree integral of a map whose vertical lift closes every loop must
    vanish; when it does while the |degree| mass does not, the map twists and
    its true variation integral cannot be finite, which raises the divergence
    flag.  With ``expect_zero_mean`` a nonvanishing degree integral is itself
    flagged and the offending signed components are reported as a witness.
    """
    dom_grid, dom_mask = rasterize_region(domain, resolution=domain_resolution)
    field = preimage_count_field(
        phi, (dom_grid, dom_mask), domain_resolution=domain_resolution,
        image_resolution=image_resolution, compute_k_lower=True)
    img_grid = field.image_grid
    centers = img_grid.center_points()
    if levels is None:
        levels = [4, 8, 16]

    deg_integrals = []
    zero_mean = []
    last_deg = None
    pointwise_violations = 0
    witness = None
    for n, inner in _dyadic_inner_masks(dom_grid, dom_mask, levels):
        if not inner.any():
            continue
        contours = mask_contours(dom_grid, inner)
        deg_field = np.zeros(len(centers), dtype=np.int64)
        resolved = np.ones(len(centers), dtype=bool)
        for loop in contours:
            fine = refine_polyline(loop, dom_grid.h * 0.5, closed=True)
            img = np.asarray(phi(fine), dtype=float)
            img_c = np.vstack([img, img[:1]])
            step = float(np.max(np.hypot(*(np.diff(img_c, axis=0)).T)))
            gap = _min_dist_to_points(centers, img)
            resolved &= gap > 2.0 * step
            deg_field += winding_many(img_c, centers)
        area = img_grid.cell_area
        total = float(np.sum(deg_field[resolved]) * area)
        mass = float(np.sum(np.abs(deg_field[resolved])) * area)
        deg_integrals.append((n, total))
        ok = abs(total) <= zero_mean_rtol * max(mass, 1e-12) + 1e-9
        zero_mean.append((n, ok))
        both = resolved & field.k_resolved.ravel()
        pointwise_violations += int(np.count_nonzero(
            np.abs(deg_field[both]) > field.k_lower.ravel()[both]))
        last_deg = (deg_field, resolved, mass)

    divergence = field.any_divergent
    if last_deg is not None:
        deg_field, resolved, mass = last_deg
        twisting = mass > 10 * img_grid.cell_area
        if all(ok for _, ok in zero_mean) and twisting:
            divergence = True
        if expect_zero_mean and not all(ok for _, ok in zero_mean):
            pos = float(np.sum(deg_field[resolved & (deg_field > 0)])) * img_grid.cell_area
            neg = float(np.sum(deg_field[resolved & (deg_field < 0)])) * img_grid.cell_area
            witness = {"positive_mass": pos, "negative_mass": neg,
                       "deg_integral": deg_integrals[-1][1]}
    return EbvReport(
        k_integral_lower=field.k_integral_lower,
        divergence_flag=divergence,
        twisting_witness=witness,
        deg_integrals=deg_integrals,
        zero_mean=zero_mean,
        pointwise_violations=pointwise_violations,
        field=field,
    )


def _min_dist_to_points(qs: np.ndarray, pts: np.ndarray) -> np.ndarray:
    from scipy.spatial import cKDTree

    tree = cKDTree(pts)
    d, _ = tree.query(qs, k=1)
    return d


@dataclass(frozen=True)
class IndexReport:
    index: int
    in_unit_range: bool
    domain_radius: float
    image_radius: float


def index_at_regular_point(G, p, domain_radius: float = 0.25,
                           image_radius: float | None = None,
                           local_resolution: int = 128,
                           ladder: int = 6) -> IndexReport:
    """Local degree of the horizontal part of an embedding at a regular point.

    Builds D as the filled component through p of {|G_h - G_h(p)| <= s}
    inside the ball B(p, r), shrinking s down a dyadic ladder until the set
    clears the ball's rim, then computes deg(G_h(p), G_h, D) by boundary
    winding.  For embeddings this index lies in {-1, 0, 1}.
    """
    pp = _point(p)
    gp = np.asarray(G(pp[None, :]), dtype=float)[0]
    q = gp[:2]
    r = domain_radius
    grid = grid_over_bbox((pp[0] - r, pp[1] - r, pp[0] + r, pp[1] + r), local_resolution)
    centers = grid.center_points()
    img3 = np.asarray(G(centers), dtype=float)
    imgh = img3[:, :2]
    dist_img = np.hypot(imgh[:, 0] - q[0], imgh[:, 1] - q[1]).reshape(grid.ny, grid.nx)
    dist_dom = np.hypot(centers[:, 0] - pp[0], centers[:, 1] - pp[1]).reshape(grid.ny, grid.nx)
    ball = dist_dom <= r - 2 * grid.h
    rim = (dist_dom > r - 6 * grid.h) & ball
    if image_radius is None:
        image_radius = float(np.max(dist_img[ball])) * 0.5
    s = image_radius
    phi_h = lambda pts: np.asarray(G(pts), dtype=float)[:, :2]
    for _ in range(ladder):
        K = (dist_img <= s) & ball
        if not K.any():
            raise PreconditionError("no preimage cells at the current scale; refine the grid")
        if np.any(K & rim):
            s *= 0.5
            continue
        filled = ndimage.binary_fill_holes(K)
        labels, count = _components_of(filled)
        ixp, iyp = grid.cell_of(pp[None, :])
        home = labels[iyp[0], ixp[0]]
        if home <= 0:
            s *= 0.5
            continue
        D = labels == home
        deg = degree_of_region(phi_h, grid, D, q)
        return IndexReport(index=int(deg), in_unit_range=abs(deg) <= 1,
                           domain_radius=r, image_radius=s)
    raise PreconditionError("could not separate the preimage from the rim; "
                            "point may be irregular at this scale")
