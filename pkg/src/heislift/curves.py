"""Sampled curves, Young integration, signed area and horizontal lifts.

Curves are finite time-ordered samples with fixed piecewise-linear
interpolation.  All integrals are left-endpoint Riemann-Stieltjes sums on the
given grid; for polylines the combination (integral x dy - integral y dx)/2
then agrees with the shoelace formula term by term, which makes the closed
fixtures exact up to roundoff.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, UnsupportedOrderError
from .geometry import estimate_holder, euclidean_distance

__all__ = [
    "SampledCurve",
    "LiftResult",
    "ClosureCheck",
    "young_integral",
    "signed_area",
    "young_constant",
    "horizontal_lift",
    "check_closed_lift",
    "generate_weierstrass_curve",
    "lift_convergence_profile",
]


@dataclass(frozen=True)
class SampledCurve:
    """A planar or Heisenberg-valued curve sampled on a strictly increasing grid."""

    times: np.ndarray
    points: np.ndarray
    closed: bool = False

    # interpolation between samples is always piecewise linear
    interpolation: str = field(default="linear", init=False)

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        p = np.asarray(self.points, dtype=float)
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "points", p)
        if t.ndim != 1 or len(t) < 2:
            raise DomainError("need at least 2 samples")
        if p.ndim != 2 or p.shape[0] != len(t) or p.shape[1] not in (2, 3):
            raise DomainError(f"points must be (n, 2) or (n, 3), got {p.shape}")
        if not np.all(np.isfinite(t)) or not np.all(np.isfinite(p)):
            raise DomainError("non-finite curve data")
        if np.any(np.diff(t) <= 0):
            raise DomainError("times must be strictly increasing")
        if self.closed:
            gap = float(np.max(np.abs(p[0] - p[-1])))
            if gap > 1e-12 * max(1.0, self.diameter()):
                raise DomainError(f"closed curve endpoints differ by {gap}")

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def x(self) -> np.ndarray:
        return self.points[:, 0]

    @property
    def y(self) -> np.ndarray:
        return self.points[:, 1]

    @property
    def z(self) -> np.ndarray:
        if self.dim != 3:
            raise DomainError("planar curve has no z samples")
        return self.points[:, 2]

    def __len__(self) -> int:
        return len(self.times)

    def diameter(self) -> float:
        lo = self.points.min(axis=0)
        hi = self.points.max(axis=0)
        return float(np.linalg.norm(hi - lo))

    def reversed(self) -> "SampledCurve":
        t = self.times
        rev_t = t[0] + t[-1] - t[::-1]
        return SampledCurve(rev_t, self.points[::-1].copy(), closed=self.closed)

    def planar(self) -> "SampledCurve":
        if self.dim == 2:
            return self
        return SampledCurve(self.times, self.points[:, :2].copy(), closed=self.closed)

    def subsample(self, step: int) -> "SampledCurve":
        if step < 1 or (len(self) - 1) % step != 0:
            raise DomainError(f"step {step} does not divide {len(self) - 1} intervals")
        return SampledCurve(self.times[::step], self.points[::step].copy(), closed=self.closed)


def young_integral(x, y) -> float:
    """Left-endpoint Riemann-Stieltjes sum of x against y on a shared grid.

    Returns sum_i x(t_i) * (y(t_{i+1}) - y(t_i)).  Linear in both arguments.
    """
    xa = np.asarray(x, dtype=float)
    ya = np.asarray(y, dtype=float)
    if xa.ndim != 1 or ya.ndim != 1:
        raise DomainError("integrand samples must be one-dimensional")
    if len(xa) != len(ya):
        raise DomainError(f"mismatched grids: {len(xa)} vs {len(ya)} samples")
    if len(xa) < 2:
        raise DomainError("need at least 2 samples")
    return float(np.sum(xa[:-1] * np.diff(ya)))


def signed_area(gamma: SampledCurve) -> float:
    """Signed area (integral x dy - integral y dx)/2 of a closed planar curve.

    Equals the shoelace sum of the sample polygon exactly up to roundoff.
    """
    if not gamma.closed:
        raise DomainError("signed_area requires a closed curve")
    g = gamma.planar()
    return 0.5 * (young_integral(g.x, g.y) - young_integral(g.y, g.x))


def young_constant(alpha: float) -> float:
    """Model constant C(alpha) = 1 / (1 - 2**(1 - 2*alpha)) for Young sums.

    Finite only for alpha > 1/2; used for error reporting, never asserted
    to be sharp.
    """
    if alpha <= 0.5:
        raise UnsupportedOrderError(f"Young constant undefined for alpha={alpha}")
    return 1.0 / (1.0 - 2.0 ** (1.0 - 2.0 * alpha))


@dataclass(frozen=True)
class LiftResult:
    """Horizontal lift of a planar curve: same grid, reconstructed z."""

    lifted: SampledCurve
    z_increments: np.ndarray
    error_bound: float


def horizontal_lift(gamma: SampledCurve, z0: float = 0.0, alpha: float = 1.0,
                    L: float | None = None) -> LiftResult:
    """Reconstruct the vertical coordinate of a planar curve cumulatively.

    z(t_i) = z0 + (1/2) sum_{j<i} (x_j dy_j - y_j dx_j).  Valid as an
    approximation of the continuum lift only for Holder orders above 1/2;
    the reported model error bound is D * n**(1-2*alpha) with
    D = L + C(alpha) * L^2 over the n sample intervals.
    """
    if not (0.5 < alpha <= 1.0):
        raise UnsupportedOrderError(f"horizontal lift requires alpha in (1/2, 1], got {alpha}")
    g = gamma.planar()
    if L is None:
        est = estimate_holder(g.times, g.points, alpha, metric_dst=euclidean_distance)
        L = est.constant
    if L < 0:
        raise DomainError("Holder constant must be nonnegative")
    inc = 0.5 * (g.x[:-1] * np.diff(g.y) - g.y[:-1] * np.diff(g.x))
    z = np.empty(len(g))
    z[0] = z0
    z[1:] = z0 + np.cumsum(inc)
    n = len(g) - 1
    bound = (L + young_constant(alpha) * L * L) * float(n) ** (1.0 - 2.0 * alpha)
    pts = np.column_stack([g.points, z])
    # flag closure only when the 3d endpoints agree at the curve's own tolerance
    closes = gamma.closed and float(np.max(np.abs(pts[0] - pts[-1]))) <= 1e-12 * max(
        1.0, float(np.linalg.norm(pts.max(axis=0) - pts.min(axis=0)))
    )
    lifted = SampledCurve(g.times, pts, closed=closes)
    return LiftResult(lifted=lifted, z_increments=inc, error_bound=bound)


@dataclass(frozen=True)
class ClosureCheck:
    defect: float
    closes: bool
    tolerance: float


def check_closed_lift(gamma: SampledCurve, tolerance: float | None = None) -> ClosureCheck:
    """Does the horizontal lift of a closed planar curve close up?

    The z-gain around the loop is twice the signed area, so the closure
    defect is exactly signed_area(gamma).  Default tolerance is 1e-9 times
    the curve diameter, appropriate for analytic inputs; rough curves should
    pass an explicit tolerance.
    """
    if not gamma.closed:
        raise DomainError("check_closed_lift requires a closed curve")
    defect = signed_area(gamma)
    if tolerance is None:
        tolerance = 1e-9 * max(1.0, gamma.diameter())
    return ClosureCheck(defect=defect, closes=abs(defect) <= tolerance, tolerance=tolerance)


def generate_weierstrass_curve(alpha: float, b: int = 2, terms: int = 16,
                               seed: int = 0, n_samples: int = 4097) -> SampledCurve:
    """Planar curve with prescribed Holder order from lacunary cosine series.

    x(t) and y(t) are independent sums over k < terms of
    b**(-alpha*k) * cos(2*pi*b**k*t + phase_k) with seeded uniform phases,
    sampled at n_samples uniform points of [0, 1].  Deterministic per seed.
    """
    if not (0.0 < alpha < 1.0):
        raise DomainError(f"alpha must lie in (0, 1), got {alpha}")
    if b < 2 or terms < 1:
        raise DomainError("need b >= 2 and terms >= 1")
    rng = np.random.default_rng(seed)
    phases = rng.uniform(0.0, 2.0 * np.pi, size=(2, terms))
    t = np.linspace(0.0, 1.0, n_samples)
    k = np.arange(terms)
    amp = float(b) ** (-alpha * k)
    freq = 2.0 * np.pi * float(b) ** k
    xy = np.empty((n_samples, 2))
    for axis in range(2):
        xy[:, axis] = np.sum(amp[None, :] * np.cos(freq[None, :] * t[:, None] + phases[axis][None, :]), axis=1)
    # the series has period 1; snap the endpoint so the curve closes exactly
    xy[-1] = xy[0]
    return SampledCurve(t, xy, closed=True)


def lift_convergence_profile(gamma: SampledCurve, alpha: float, L: float,
                             depths: list[int]) -> list[tuple[int, float, float]]:
    """Lift defect against the finest available grid, per resolution.

    For each n in ``depths`` (strictly increasing, each dividing the master
    interval count), lifts the subsampled curve and reports the largest
    deviation of its z samples from the full-resolution lift at shared times,
    paired with the model bound D * n**(1-2*alpha), D = L + C(alpha) L^2.
    """
    depths = list(depths)
    if any(b <= a for a, b in zip(depths, depths[1:])):
        raise DomainError("depths must be strictly increasing")
    n_master = len(gamma) - 1
    for n in depths:
        if n < 1 or n_master % n != 0:
            raise DomainError(f"depth {n} does not divide the master grid ({n_master} intervals)")
    ref = horizontal_lift(gamma, z0=0.0, alpha=alpha, L=L).lifted
    out = []
    C = young_constant(alpha)
    D = L + C * L * L
    for n in depths:
        step = n_master // n
        sub = gamma.subsample(step)
        lift_n = horizontal_lift(sub, z0=0.0, alpha=alpha, L=L).lifted
        defect = float(np.max(np.abs(lift_n.z - ref.z[::step])))
        out.append((n, defect, D * float(n) ** (1.0 - 2.0 * alpha)))
    return out
