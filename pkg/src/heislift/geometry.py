"""Heisenberg points, the quartic distance, projections and Holder estimation.

The ambient space is R^3 with coordinates (x, y, z) carrying the quartic
distance

    d(p, q)^4 = ((qx-px)^2 + (qy-py)^2)^2 + (qz - pz - (px*qy - py*qx)/2)^2

which is biLipschitz equivalent to the Carnot-Caratheodory distance but far
cheaper to evaluate.  The horizontal projection (x, y, z) -> (x, y) is
1-Lipschitz from this distance to the Euclidean plane.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .errors import DomainError

__all__ = [
    "HeisenbergPoint",
    "PlanarPoint",
    "HolderEstimate",
    "heisenberg_distance",
    "horizontal_projection",
    "left_translate",
    "dilate",
    "euclidean_distance",
    "estimate_holder",
]


@dataclass(frozen=True)
class HeisenbergPoint:
    x: float
    y: float
    z: float

    def __post_init__(self):
        if not np.all(np.isfinite([self.x, self.y, self.z])):
            raise DomainError(f"non-finite Heisenberg point {(self.x, self.y, self.z)}")

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z], dtype=float)


@dataclass(frozen=True)
class PlanarPoint:
    x: float
    y: float

    def __post_init__(self):
        if not np.all(np.isfinite([self.x, self.y])):
            raise DomainError(f"non-finite planar point {(self.x, self.y)}")

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y], dtype=float)


def _coords(p, dim: int) -> np.ndarray:
    """Coerce a point object / sequence / array to a float array of trailing dim."""
    if isinstance(p, (HeisenbergPoint, PlanarPoint)):
        a = p.as_array()
    else:
        a = np.asarray(p, dtype=float)
    if a.shape[-1] != dim:
        raise DomainError(f"expected coordinates of dimension {dim}, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise DomainError("non-finite coordinates")
    return a


def heisenberg_distance(p, q) -> float | np.ndarray:
    """Quartic Heisenberg distance between points (broadcasts over arrays).

    Evaluates the fourth root of

        ((dx^2 + dy^2))^2 + (dz - (px*qy - py*qx)/2)^2

    via two nested square roots of a hypot, which keeps intermediate
    quantities in range for coordinates up to ~1e150.
    """
    a = _coords(p, 3)
    b = _coords(q, 3)
    dx = b[..., 0] - a[..., 0]
    dy = b[..., 1] - a[..., 1]
    horiz_sq = dx * dx + dy * dy
    cross = a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]
    vert = b[..., 2] - a[..., 2] - 0.5 * cross
    d = np.sqrt(np.hypot(horiz_sq, vert))
    if d.ndim == 0:
        return float(d)
    return d


def euclidean_distance(p, q) -> float | np.ndarray:
    a = np.asarray(p, dtype=float)
    b = np.asarray(q, dtype=float)
    d = np.sqrt(np.sum((b - a) ** 2, axis=-1))
    if d.ndim == 0:
        return float(d)
    return d


def horizontal_projection(p):
    """Drop the vertical coordinate: (x, y, z) -> (x, y).

    1-Lipschitz from the Heisenberg distance to the Euclidean plane.
    """
    a = _coords(p, 3)
    out = a[..., :2]
    if isinstance(p, HeisenbergPoint):
        return PlanarPoint(float(out[0]), float(out[1]))
    return np.array(out, copy=True)


def left_translate(g, p):
    """Group translation by g; an exact isometry of the quartic distance.

    T_g(p) = (gx+px, gy+py, gz+pz + (gx*py - gy*px)/2).  The cross term is
    forced by requiring the distance's vertical defect to be invariant.
    """
    gg = _coords(g, 3)
    a = _coords(p, 3)
    out = np.empty(np.broadcast(gg, a).shape, dtype=float)
    out[..., 0] = gg[..., 0] + a[..., 0]
    out[..., 1] = gg[..., 1] + a[..., 1]
    out[..., 2] = gg[..., 2] + a[..., 2] + 0.5 * (gg[..., 0] * a[..., 1] - gg[..., 1] * a[..., 0])
    if isinstance(p, HeisenbergPoint) and out.ndim == 1:
        return HeisenbergPoint(*out)
    return out


def dilate(r: float, p):
    """Anisotropic dilation (x, y, z) -> (r x, r y, r^2 z); scales d by |r|."""
    a = _coords(p, 3)
    out = np.empty_like(a)
    out[..., 0] = r * a[..., 0]
    out[..., 1] = r * a[..., 1]
    out[..., 2] = r * r * a[..., 2]
    if isinstance(p, HeisenbergPoint) and out.ndim == 1:
        return HeisenbergPoint(*out)
    return out


@dataclass(frozen=True)
class HolderEstimate:
    """Empirical Holder data for a sampled map.

    alpha        -- the assumed order the constant refers to
    constant     -- max over admissible sample pairs of d_dst / d_src**alpha
    fitted_alpha -- least-squares slope of log d_dst against log d_src
    scale_range  -- (lo, hi) source-separation window used for both numbers
    """

    alpha: float
    constant: float
    fitted_alpha: float
    scale_range: tuple[float, float]

    def __post_init__(self):
        if self.constant < 0:
            raise DomainError("Holder constant must be nonnegative")


def _pair_indices(params: np.ndarray, scale_max: float) -> tuple[np.ndarray, np.ndarray]:
    tree = cKDTree(params if params.ndim == 2 else params[:, None])
    pairs = tree.query_pairs(scale_max, output_type="ndarray")
    if pairs.size == 0:
        return np.empty(0, dtype=int), np.empty(0, dtype=int)
    return pairs[:, 0], pairs[:, 1]


def estimate_holder(
    params,
    values,
    alpha: float,
    metric_src=None,
    metric_dst=None,
    scale_range: tuple[float, float] | None = None,
    window: float = 64.0,
) -> HolderEstimate:
    """Estimate the order-``alpha`` Holder constant of a sampled map.

    ``params`` are source sample points (scalars or planar points), ``values``
    the corresponding image points.  Both metrics default to Euclidean and
    must accept arrays of points.  Pairs are restricted to source separations
    inside ``scale_range`` (default [h, window*h] with h the smallest positive
    sample separation); Holder behaviour is a small-scale statement and large
    separations would only saturate the ratio.

    Only pairs with nonzero image distance enter the log-log slope fit.  When
    fewer than two such pairs exist (a constant map) the slope is reported
    as 1.0, the most regular admissible order.
    """
    P = np.asarray(params, dtype=float)
    V = np.asarray(values, dtype=float)
    if P.ndim == 1:
        P = P[:, None]
    if V.ndim == 1:
        V = V[:, None]
    if len(P) != len(V):
        raise DomainError("params and values must have equal length")
    if len(P) < 2:
        raise DomainError("need at least 2 samples")
    if not (0.0 < alpha <= 1.0):
        raise DomainError(f"alpha must lie in (0, 1], got {alpha}")

    if metric_src is None:
        metric_src = euclidean_distance
    if metric_dst is None:
        metric_dst = euclidean_distance

    nn_tree = cKDTree(P)
    nn_d, _ = nn_tree.query(P, k=2)
    h = float(np.min(nn_d[:, 1]))
    if h == 0.0:
        raise DomainError("samples contain coincident source points")
    if scale_range is None:
        scale_range = (h, window * h)
    lo, hi = float(scale_range[0]), float(scale_range[1])
    if not (0 < lo <= hi):
        raise DomainError(f"bad scale_range {scale_range}")

    ii, jj = _pair_indices(P, hi)
    if len(ii) == 0:
        raise DomainError("no sample pairs inside the scale window")
    d_src = np.asarray(metric_src(P[ii], P[jj]), dtype=float)
    keep = (d_src >= lo) & (d_src <= hi) & (d_src > 0)
    ii, jj, d_src = ii[keep], jj[keep], d_src[keep]
    if len(ii) == 0:
        raise DomainError("no sample pairs inside the scale window")
    d_dst = np.asarray(metric_dst(V[ii], V[jj]), dtype=float)

    constant = float(np.max(d_dst / d_src**alpha))

    pos = d_dst > 0
    if np.count_nonzero(pos) >= 2:
        slope = np.polyfit(np.log(d_src[pos]), np.log(d_dst[pos]), 1)[0]
        fitted_alpha = float(slope)
    else:
        fitted_alpha = 1.0
    return HolderEstimate(alpha=alpha, constant=constant, fitted_alpha=fitted_alpha, scale_range=(lo, hi))
