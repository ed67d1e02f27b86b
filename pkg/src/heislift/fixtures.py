"""Analytic fixture curves, maps and surfaces used by tests and the CLI.

The surfaces are designed around what the probing machinery must witness:
the plane graph has no vertical structure at all, the complex-square surface
doubles its image, the pleated surface balances oppositely oriented folds so
period-aligned loops have zero signed image area, and the fold cascade nests
sign-mixed folding at three scales so the binary refinement has structure to
bite on at every level it visits.
"""

from __future__ import annotations

import numpy as np

from .curves import SampledCurve
from .errors import DomainError
from .surfaces import SurfaceSample

__all__ = [
    "circle_curve",
    "square_curve",
    "figure_eight_curve",
    "limacon_curve",
    "two_turn_curve",
    "random_polygon",
    "random_simple_polygon",
    "complex_power_map",
    "plane_surface",
    "complex_square_surface",
    "monotone_cubic_surface",
    "pleated_surface",
    "folded_annulus_surface",
    "fold_cascade_surface",
]


def circle_curve(n: int = 4096, radius: float = 1.0, turns: int = 1,
                 center=(0.0, 0.0)) -> SampledCurve:
    t = np.linspace(0.0, 1.0, n + 1)
    ang = 2.0 * np.pi * turns * t
    pts = np.column_stack([center[0] + radius * np.cos(ang),
                           center[1] + radius * np.sin(ang)])
    pts[-1] = pts[0]
    return SampledCurve(t, pts, closed=True)


def square_curve(side: float = 1.0, corner=(0.0, 0.0)) -> SampledCurve:
    x0, y0 = corner
    pts = np.array([
        [x0, y0], [x0 + side, y0], [x0 + side, y0 + side], [x0, y0 + side], [x0, y0],
    ])
    return SampledCurve(np.linspace(0.0, 1.0, 5), pts, closed=True)


def figure_eight_curve(n: int = 4096) -> SampledCurve:
    """Two congruent unit lobes of opposite orientation through the origin."""
    if n % 2:
        n += 1
    t = np.linspace(0.0, 1.0, n + 1)
    pts = np.empty((n + 1, 2))
    half = n // 2
    th = 2.0 * np.pi * np.arange(half + 1) / half
    pts[: half + 1, 0] = -1.0 + np.cos(th)
    pts[: half + 1, 1] = np.sin(th)
    pts[half:, 0] = 1.0 - np.cos(th)
    pts[half:, 1] = np.sin(th)
    pts[0] = pts[half] = pts[-1] = (0.0, 0.0)
    return SampledCurve(t, pts, closed=True)


def limacon_curve(n: int = 2048, inner: float = 1.0, outer: float = 2.0) -> SampledCurve:
    """r = inner + outer*cos(theta); for outer > inner the inner loop winds twice."""
    t = np.linspace(0.0, 1.0, n + 1)
    th = 2.0 * np.pi * t
    r = inner + outer * np.cos(th)
    pts = np.column_stack([r * np.cos(th), r * np.sin(th)])
    pts[-1] = pts[0]
    return SampledCurve(t, pts, closed=True)


def two_turn_curve(n: int = 2048, wobble: float = 0.3, phase: float = 0.7,
                   harmonics: tuple = ()) -> SampledCurve:
    """Double circuit of the origin with a radius wobble of period one.

    The two turns trace different radii except at finitely many angles, so
    the curve is in general position with winding 2 about the origin.
    """
    t = np.linspace(0.0, 1.0, n + 1)
    r = 1.0 + wobble * np.sin(2.0 * np.pi * t + phase)
    for k, (a, ph) in enumerate(harmonics, start=3):
        r = r + a * np.sin(2.0 * np.pi * k * t + ph)
    ang = 4.0 * np.pi * t
    pts = np.column_stack([r * np.cos(ang), r * np.sin(ang)])
    pts[-1] = pts[0]
    return SampledCurve(t, pts, closed=True)


def random_polygon(seed: int, max_vertices: int = 40) -> SampledCurve:
    """Seeded closed polygon, possibly self-intersecting."""
    rng = np.random.default_rng(seed)
    k = int(rng.integers(4, max_vertices + 1))
    pts = rng.uniform(-1.0, 1.0, size=(k, 2))
    pts = np.vstack([pts, pts[0]])
    return SampledCurve(np.linspace(0.0, 1.0, k + 1), pts, closed=True)


def random_simple_polygon(seed: int, max_vertices: int = 40) -> SampledCurve:
    """Seeded star-shaped (hence simple) polygon with radii bounded below."""
    rng = np.random.default_rng(seed)
    k = int(rng.integers(5, max_vertices + 1))
    ang = np.sort(rng.uniform(0.0, 2.0 * np.pi, k))
    if np.min(np.diff(ang)) < 1e-3:
        ang = np.linspace(0.0, 2.0 * np.pi, k, endpoint=False) + rng.uniform(0, 0.3)
    rad = rng.uniform(0.35, 1.0, k)
    pts = np.column_stack([rad * np.cos(ang), rad * np.sin(ang)])
    if rng.random() < 0.5:
        pts = pts[::-1]
    pts = np.vstack([pts, pts[0]])
    return SampledCurve(np.linspace(0.0, 1.0, k + 1), pts, closed=True)


def complex_power_map(k: int):
    """z -> z^k for k >= 0; negative exponents act through conjugation.

    conj(z)^|k| is continuous on the whole plane and has degree k at the
    origin, unlike the meromorphic power which blows up there.
    """

    def phi(pts):
        p = np.atleast_2d(np.asarray(pts, dtype=float))
        z = p[:, 0] + 1j * p[:, 1]
        if k >= 0:
            w = z**k
        else:
            w = np.conjugate(z) ** (-k)
        return np.column_stack([w.real, w.imag])

    return phi


def _surface_from(fn, u_range, v_range, nu, nv, alpha=0.5, seed=0) -> SurfaceSample:
    return SurfaceSample.from_function(fn, u_range, v_range, nu=nu, nv=nv,
                                       alpha=alpha, seed=seed)


def plane_surface(nu: int = 129, nv: int = 129) -> SurfaceSample:
    """The flat graph F(x, y) = (x, y, 0) on [-1, 1]^2."""

    def F(p):
        p = np.atleast_2d(np.asarray(p, dtype=float))
        return np.column_stack([p[:, 0], p[:, 1], np.zeros(len(p))])

    return _surface_from(F, (-1, 1), (-1, 1), nu, nv)


def complex_square_surface(nu: int = 129, nv: int = 129) -> SurfaceSample:
    """F(x, y) = (x^2 - y^2, 2xy, y) on a strip with y > 0 (injective there)."""

    def F(p):
        p = np.atleast_2d(np.asarray(p, dtype=float))
        x, y = p[:, 0], p[:, 1]
        return np.column_stack([x * x - y * y, 2 * x * y, y])

    return _surface_from(F, (-1, 1), (0.1, 1.1), nu, nv)


def monotone_cubic_surface(nu: int = 129, nv: int = 129) -> SurfaceSample:
    """F(x, y) = (x, y^3, y): horizontal part is injective with one flat line."""

    def F(p):
        p = np.atleast_2d(np.asarray(p, dtype=float))
        x, y = p[:, 0], p[:, 1]
        return np.column_stack([x, y**3, y])

    return _surface_from(F, (-1, 1), (-1, 1), nu, nv)


def pleated_surface(k: int = 8, nu: int = 2049, nv: int = 33) -> SurfaceSample:
    """Accordion surface F(u, v) = (u, v cos(2 pi k u), v) on [0,1] x [-1,1].

    The horizontal Jacobian is cos(2 pi k u): image loops of rectangles whose
    u-span is a whole number of periods enclose exactly balanced positive and
    negative winding, while their winding mass stays of the order of the
    rectangle area.
    """
    if k < 1:
        raise DomainError("need at least one pleat")

    def F(p):
        p = np.atleast_2d(np.asarray(p, dtype=float))
        u, v = p[:, 0], p[:, 1]
        return np.column_stack([u, v * np.cos(2 * np.pi * k * u), v])

    return _surface_from(F, (0, 1), (-1, 1), nu, nv)


def folded_annulus_surface(nu: int = 513, nv: int = 257) -> SurfaceSample:
    """Two radial sheets joined along a ridge: 2-to-1 over an annulus sector.

    F(u, v) = (rho(u) cos th(v), rho(u) sin th(v), u) with rho rising from 1
    to 1.5 and back; radii in (1, 1.5) are covered once by the rising and
    once by the falling sheet, with opposite orientations.
    """

    def F(p):
        p = np.atleast_2d(np.asarray(p, dtype=float))
        u, v = p[:, 0], p[:, 1]
        rho = 1.0 + 0.5 * np.sin(np.pi * u)
        th = 0.15 + 5.95 * v
        return np.column_stack([rho * np.cos(th), rho * np.sin(th), u])

    return _surface_from(F, (0, 1), (0, 1), nu, nv)


# fold cascade tuning: each wave out-slopes the envelope of the coarser ones
# (factor 2), integer frequency ratios make the tip values of every scale
# recur exactly once per period, and the ratio 8 lets the next wave fold
# fully inside the parabolic pockets around the previous scale's tips
_CASCADE_M = (4, 32, 256, 2048, 16384, 131072)
_CASCADE_EPS = (0.1194, 0.0298, 0.0112, 0.0042, 0.00157, 0.00059)
_CASCADE_PHASE = tuple((2.0 * np.pi * ((k * 0.381) % 1.0)) for k in range(6))


def fold_cascade_surface(nu: int = 2**21 + 1, nv: int = 3,
                         M=_CASCADE_M, eps=_CASCADE_EPS,
                         phases=_CASCADE_PHASE) -> SurfaceSample:
    """Sign-mixed two-sheet folding at six nested scales, exactly periodic.

    F(u, v) = (X(u), v, u) with X(u) = sum eps_k sin(2 pi M_k u + phase_k).
    The third coordinate separates the sheets, so F embeds.  All frequencies
    are multiples of the base one, so the fold-tip values of every scale
    repeat across the domain: the preimage of any image band whose edges sit
    at such tip values contains fat parabolic pockets wherever the band's
    scale folds back, and those pockets carry the next scale's folds.  That
    recurrence is what the recursive preimage refinement consumes.
    """

    def F(p):
        p = np.atleast_2d(np.asarray(p, dtype=float))
        u, v = p[:, 0], p[:, 1]
        x = np.zeros(len(p))
        for Mk, ek, ph in zip(M, eps, phases):
            x = x + ek * np.sin(2 * np.pi * Mk * u + ph)
        return np.column_stack([x, v, u])

    return _surface_from(F, (-0.02, 1.02), (0, 1), nu, nv)
