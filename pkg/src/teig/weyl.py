"""Weyl constant and its comparison with counted spectra.

    c = (2π)^{−d} Σ_ℓ ∫_Ω |{ξ : ⟨A(x)ξ, ξ⟩ < Σ_ℓ(x)}| dx,

and the phase-space volume is ω_d Σ_ℓ^{d/2} / √det A.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .coeff import CoefficientField, RadialProfile
from .disk_spectrum import CountingCurve, Spectrum
from .errors import EmptySpectrum, NotPositiveDefinite, QuadratureNotConverged

QUAD_TOL = 1e-8


def unit_ball_volume(d):
    return math.pi ** (d / 2) / math.gamma(d / 2 + 1)


def ellipsoid_volume(A, s):
    """Volume of {ξ : ⟨Aξ, ξ⟩ < s}."""
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("A must be square")
    if not s > 0:
        raise ValueError("s must be positive")
    if not np.allclose(A, A.T, rtol=1e-12, atol=0):
        raise NotPositiveDefinite("A is not symmetric")
    try:
        L = np.linalg.cholesky(A)
    except np.linalg.LinAlgError:
        raise NotPositiveDefinite("A is not positive definite") from None
    d = A.shape[0]
    sqrt_det = float(np.prod(np.diag(L)))
    return unit_ball_volume(d) * s ** (d / 2) / sqrt_det


def _volumes(fld, ell, r):
    """ellipsoid_volume(A(r), Σ_ℓ(r)) vectorised over radii."""
    d = fld.dim
    s = fld.sigma(ell, r)
    if np.any(s <= 0):
        raise NotPositiveDefinite("sigma must be positive")
    if fld.is_isotropic:
        a = fld.a_scalar(r)
        if np.any(a <= 0):
            raise NotPositiveDefinite("a(r) must be positive")
        return unit_ball_volume(d) * (s / a) ** (d / 2)
    det = np.linalg.det(fld.a)
    ellipsoid_volume(fld.a, 1.0)  # definiteness check
    return unit_ball_volume(d) * s ** (d / 2) / math.sqrt(det)


def _breakpoints(fld):
    pts = {0.0, fld.R}
    for p in (fld.a, fld.sigma1, fld.sigma2):
        if isinstance(p, RadialProfile):
            pts.update(b for b in p.breaks if 0 < b < fld.R)
    return sorted(pts)


def _composite(fn, edges, panels, points):
    x, w = np.polynomial.legendre.leggauss(points)
    total = 0.0
    for lo, hi in zip(edges, edges[1:]):
        cuts = np.linspace(lo, hi, panels + 1)
        mid = 0.5 * (cuts[1:] + cuts[:-1])
        half = 0.5 * (cuts[1:] - cuts[:-1])
        r = (mid[:, None] + half[:, None] * x).ravel()
        total += float(np.sum(np.repeat(half, points) * np.tile(w, panels) * fn(r)))
    return total


def _radial_integral(fn, fld, quadrature_points, max_panels=4096):
    edges = _breakpoints(fld)
    panels = 1
    prev = _composite(fn, edges, panels, quadrature_points)
    while panels < max_panels:
        panels *= 2
        cur = _composite(fn, edges, panels, quadrature_points)
        if abs(cur - prev) <= QUAD_TOL * max(abs(cur), 1e-300):
            return cur
        prev = cur
    raise QuadratureNotConverged(f"radial quadrature not converged with {panels} panels")


def weyl_terms(fld: CoefficientField, quadrature_points: int = 16):
    """The two ℓ-contributions to the Weyl constant (disk geometry, d = 2)."""
    if fld.dim != 2:
        raise ValueError("the disk geometry requires d = 2")
    pref = (2 * math.pi) ** (-fld.dim)
    return tuple(pref * _radial_integral(lambda r, ell=ell: _volumes(fld, ell, r) * 2 * math.pi * r,
                                         fld, quadrature_points) for ell in (1, 2))


def weyl_constant(fld: CoefficientField, quadrature_points: int = 16) -> float:
    """c for the disk of radius fld.R, integrating both terms jointly."""
    if fld.dim != 2:
        raise ValueError("the disk geometry requires d = 2")
    if quadrature_points < 1:
        raise ValueError("quadrature_points must be positive")

    def integrand(r):
        return (_volumes(fld, 1, r) + _volumes(fld, 2, r)) * 2 * math.pi * r

    return (2 * math.pi) ** (-fld.dim) * _radial_integral(integrand, fld, quadrature_points)


@dataclass
class WeylFit:
    c_analytic: float
    curve: CountingCurve
    ratios: np.ndarray
    slope: float


def top_decade_slope(t, counts):
    """Least-squares slope of log N against log t over [t_max/10, t_max]."""
    t = np.asarray(t, dtype=float)
    counts = np.asarray(counts, dtype=float)
    sel = (t >= t.max() / 10) & (counts > 0)
    if sel.sum() < 2:
        return math.nan
    return float(np.polyfit(np.log(t[sel]), np.log(counts[sel]), 1)[0])


def counting_fit(spec: Spectrum, fld: CoefficientField | None, t_grid, c_analytic: float | None = None,
                 d: int = 2) -> WeylFit:
    """N(t) on ``t_grid`` against c·t^{d/2}.

    ``c_analytic`` overrides the constant computed from ``fld``.
    """
    if len(spec) == 0:
        raise EmptySpectrum("counting fit needs a nonempty spectrum")
    t = np.asarray(sorted(float(x) for x in t_grid))
    if t.size == 0 or t[0] <= 0:
        raise ValueError("t_grid must hold positive values")
    if c_analytic is None:
        if fld is None:
            raise ValueError("need a field or an explicit constant")
        c_analytic = weyl_constant(fld)
    counts = spec.counting(t)
    model = c_analytic * t ** (d / 2)
    ratios = counts / model
    slope = top_decade_slope(t, counts)
    report = {"slope": slope, "rel_dev": (ratios - 1.0).tolist()}
    curve = CountingCurve(t.tolist(), counts.tolist(), float(c_analytic), report)
    return WeylFit(float(c_analytic), curve, ratios, slope)
