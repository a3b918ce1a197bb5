"""Scaled resolvent products, kernels, traces and Hilbert-Schmidt norms.

With k = ⌊d/2⌋ + 1, the (k+1)-th roots of unity ω_j, the angles
α = π/(4(k+1)), β = 5π/(4(k+1)) and λ* = t*·i, the shifted points

    λ_{j,θ,t} = λ* + ω_j t e^{iθ}

give the products T_{θ,t} = Π_j M_t T_{λ_{j,θ,t}} M_t⁻¹.  For frozen
constant coefficients the symbol of T_{α,t}T_{β,t} is

    Π_j (q + λ_{j,α,t})⁻¹ (q + λ_{j,β,t})⁻¹ = ((q + λ*)^{2(k+1)} − i t^{2(k+1)})⁻¹,

q = Σ⁻¹Aξ·ξ, whose diagonal kernel value is computed by ``trace_diag``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

from .cauchy_grid import RadialGrid, T_matrix
from .errors import NotInModifiedResolventSet, QuadratureNotConverged
from .weyl import ellipsoid_volume


@dataclass(frozen=True)
class SchemeConstants:
    d: int
    k: int
    omegas: np.ndarray
    alpha: float
    beta: float
    t_star: float
    lambda_star: complex

    def M_t(self, t):
        """Diagonal of the scaling pair (t^{1/2}, t^{−1/2})."""
        return math.sqrt(t), 1.0 / math.sqrt(t)

    def points(self, theta, t):
        """λ_{j,θ,t} for j = 1..k+1."""
        return self.lambda_star + self.omegas * t * np.exp(1j * theta)


def scheme(d: int, t_star: float = 100.0) -> SchemeConstants:
    if d < 2:
        raise ValueError("d must be at least 2")
    if not t_star > 0:
        raise ValueError("t_star must be positive")
    k = d // 2 + 1
    omegas = np.exp(2j * np.pi * np.arange(k + 1) / (k + 1))
    return SchemeConstants(d, k, omegas, math.pi / (4 * (k + 1)), 5 * math.pi / (4 * (k + 1)),
                           float(t_star), 1j * float(t_star))


def _q(A, sigma, xi):
    A = np.asarray(A, dtype=float)
    xi = np.asarray(xi, dtype=float)
    return float(xi @ A @ xi) / sigma


def product_factorization_check(d, A, sigma, t, xi, lambda_star=None, omegas=None) -> float:
    """Relative gap between the 2(k+1)-fold product and its closed form."""
    if not t > 0:
        raise ValueError("t must be positive")
    sc = scheme(d)
    lam_star = sc.lambda_star if lambda_star is None else complex(lambda_star)
    om = sc.omegas if omegas is None else np.asarray(omegas, dtype=complex)
    q = _q(A, sigma, xi)
    prod = 1.0 + 0j
    for theta in (sc.alpha, sc.beta):
        for w in om:
            prod *= q + lam_star + w * t * np.exp(1j * theta)
    closed = (q + lam_star) ** (2 * (sc.k + 1)) - 1j * t ** (2 * (sc.k + 1))
    return abs(prod - closed) / abs(closed)


# ---------------------------------------------------------------------------
# kernels


def _sqrtm_inv(B):
    w, V = np.linalg.eigh(B)
    return (V / np.sqrt(w)) @ V.T, float(np.prod(w))


def _wynn(s):
    """Wynn epsilon extrapolation of a sequence of partial sums."""
    e = [list(map(complex, s))]
    prev = [0j] * (len(s) + 1)
    best = e[0][-1]
    cur = e[0]
    level = 0
    while len(cur) > 1:
        nxt = []
        for i in range(len(cur) - 1):
            diff = cur[i + 1] - cur[i]
            if diff == 0:
                return cur[i + 1]
            nxt.append(prev[i + 1] + 1.0 / diff)
        prev, cur = cur, nxt
        level += 1
        if level % 2 == 0 and cur:
            best = cur[-1]
    return best


def _hankel_tail(s, lam, pieces=40):
    """∫₀^∞ J₀(ρs) ρ/(ρ² + λ) dρ, summed between zeros of J₀ and accelerated."""
    zeros = special.jn_zeros(0, pieces) / s
    f = lambda r: special.j0(r * s) * r / (r * r + lam)
    edges = np.concatenate([[0.0], zeros])
    partial, total, err = [], 0j, 0.0
    for a, b in zip(edges, edges[1:]):
        val, e = integrate.quad(f, a, b, complex_func=True, epsabs=0, epsrel=1e-12, limit=200)
        total += val
        err += abs(e)
        partial.append(total)
    best = _wynn(partial)
    return best, abs(best - _wynn(partial[:-6])) + err


def kernel_F(A, sigma, lam, z) -> complex:
    """F(z) = −(2π)^{−2} ∫ e^{iz·ξ} / (Σ⁻¹Aξ·ξ + λ) dξ for d = 2.

    The frequencies are rotated to principal axes (ξ = B^{−1/2}η with
    B = Σ⁻¹A) and the η-integral reduced to the Hankel-type integral
    2π ∫ J₀(ρ|ζ|) ρ/(ρ² + λ) dρ, ζ = B^{−1/2}z.
    """
    A = np.asarray(A, dtype=float)
    if A.shape != (2, 2):
        raise ValueError("kernel_F is implemented for d = 2")
    lam = complex(lam)
    if lam.imag == 0 and lam.real <= 0:
        raise ValueError("lambda must avoid the nonpositive real axis")
    z = np.asarray(z, dtype=float)
    Bm, detB = _sqrtm_inv(A / sigma)
    zeta = float(np.linalg.norm(Bm @ z))
    if zeta == 0:
        raise QuadratureNotConverged("the kernel integral diverges at z = 0 in d = 2")
    val, err = _hankel_tail(zeta, lam)
    if err > 1e-6 * abs(val):
        raise QuadratureNotConverged(f"kernel quadrature error {err:.2e} exceeds 1e-6 relative")
    return -val / (2 * math.pi * math.sqrt(detB))


def _sphere_area(d):
    return 2 * math.pi ** (d / 2) / math.gamma(d / 2)


def _radial_quad(fn, scale=1.0):
    """∫₀^∞ fn(s) ds, split at a few multiples of ``scale``."""
    cuts = [0.0, 0.25 * scale, 0.5 * scale, scale, 2 * scale, 8 * scale, math.inf]
    total, err = 0j, 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            for a, b in zip(cuts, cuts[1:]):
                v, e = integrate.quad(fn, a, b, complex_func=True, epsabs=0, epsrel=1e-12, limit=800)
                total += v
                err += abs(e)
        except integrate.IntegrationWarning as exc:
            raise QuadratureNotConverged(str(exc)) from None
    if not np.isfinite(total) or err > 1e-9 * abs(total):
        raise QuadratureNotConverged(f"radial quadrature error {err:.2e}")
    return total


def _prefactor(A, sigma, d):
    A = np.asarray(A, dtype=float)
    detB = np.linalg.det(A / sigma)
    return (2 * math.pi) ** (-d) * _sphere_area(d) / (2 * math.sqrt(detB))


def _sigmas(sigma):
    return [float(s) for s in np.atleast_1d(sigma)]


def trace_diag(A, sigma, t, d=2, t_star=1.0, form="scaled") -> complex:
    """Σ_ℓ of the diagonal kernel value of T_{α,t}T_{β,t} for frozen (A, Σ_ℓ).

    ``form="scaled"`` integrates t^{−2k−2+d/2}((q + λ*/t)^{2k+2} − i)⁻¹;
    ``form="product"`` integrates the unscaled 2(k+1)-fold product.
    ``sigma`` may hold one value per ℓ.
    """
    if t < 1:
        raise ValueError("t must be >= 1")
    sc = scheme(d, t_star)
    p = 2 * sc.k + 2
    lam = sc.lambda_star
    total = 0j
    for s_ell in _sigmas(sigma):
        pre = _prefactor(A, s_ell, d)
        if form == "scaled":
            mu = lam / t
            val = _radial_quad(lambda s: s ** (d / 2 - 1) / ((s + mu) ** p - 1j))
            total += pre * val * t ** (-p + d / 2)
        elif form == "product":
            pts = np.concatenate([sc.points(sc.alpha, t), sc.points(sc.beta, t)])

            def integrand(s):
                return s ** (d / 2 - 1) / np.prod(s + pts)

            total += pre * _radial_quad(integrand, scale=t)
        else:
            raise ValueError("form must be 'scaled' or 'product'")
    return complex(total)


def trace_limit_constant(A, sigma, d=2) -> complex:
    """lim t^{2k+2−d/2} trace_diag(t) = (2π)^{−d} Σ_ℓ ∫ dξ / (q_ℓ^{2k+2} − i)."""
    p = 2 * (d // 2 + 1) + 2
    total = 0j
    for s_ell in _sigmas(sigma):
        total += _prefactor(A, s_ell, d) * _radial_quad(lambda s: s ** (d / 2 - 1) / (s ** p - 1j))
    return complex(total)


def im_c_identity(A, sigma, d=2, angles=256):
    """Both sides of ∫ dξ/(q^{4k+4} + 1) = |{q < 1}|·(d/(8k+8))·π/sin(πd/(8k+8)), summed over ℓ.

    The left side is a genuine polar quadrature in ξ (trapezoid in angle,
    adaptive in radius); the right side uses the ellipsoid volume and the
    Beta integral ∫₀^∞ s^{p−1}/(1+s) ds = π/sin(πp).
    """
    if d != 2:
        raise ValueError("the quadrature side is implemented for d = 2")
    A = np.asarray(A, dtype=float)
    k = d // 2 + 1
    n = 4 * k + 4
    theta = 2 * np.pi * np.arange(angles) / angles
    dirs = np.stack([np.cos(theta), np.sin(theta)], axis=1)
    radial = _radial_quad(lambda s: 1.0 / (s ** n + 1.0)).real
    p = d / (8 * k + 8)
    lhs = rhs = 0.0
    for s_ell in _sigmas(sigma):
        q = np.einsum("ij,jk,ik->i", dirs, A, dirs) / s_ell
        # ρ dρ = ds/(2q) under s = ρ²q
        lhs += float(np.mean(1.0 / (2 * q)) * 2 * np.pi) * radial
        rhs += ellipsoid_volume(A, s_ell) * p * math.pi / math.sin(math.pi * p)
    return lhs, rhs, abs(lhs - rhs) / abs(rhs)


# ---------------------------------------------------------------------------
# discrete operators


@dataclass
class DiscreteHS:
    """Operator on weighted nodal values, stored in the orthonormalised
    frame W^{1/2} T W^{−1/2}; its Frobenius norm is the double norm."""

    matrix: np.ndarray
    double_norm: float

    @classmethod
    def from_operator(cls, T, weights):
        w = np.sqrt(np.asarray(weights, dtype=float))
        M = (w[:, None] * np.asarray(T)) / w[None, :]
        return cls(M, float(np.linalg.norm(M)))

    def trace(self):
        return complex(np.trace(self.matrix))

    def __matmul__(self, other):
        M = self.matrix @ other.matrix
        return DiscreteHS(M, float(np.linalg.norm(M)))


def scaled_product(fld, mode, sc: SchemeConstants, theta, t, N, gamma=0.1):
    """T_{θ,t} = Π_j M_t T_{λ_{j,θ,t}} M_t⁻¹ (j = k+1 applied last) for one mode."""
    grid = RadialGrid(N, fld.R)
    sf, sg = sc.M_t(t)
    scale = np.concatenate([np.full(N, sf), np.full(N, sg)])
    out = np.eye(2 * N, dtype=complex)
    for lam in sc.points(theta, t):
        T = T_matrix(fld, mode, lam, N, gamma=gamma)
        out = (scale[:, None] * T / scale[None, :]) @ out
    weights = np.concatenate([grid.weights, grid.weights])
    return DiscreteHS.from_operator(out, weights)


def hs_products(fld, lambda_star, t, modes, N, d=2, gamma=0.1, detail=None):
    """(double norm of T_{α,t}T_{β,t}, its trace), summed over ``modes``
    with angular multiplicity (1 for m = 0, 2 otherwise).

    Pass a list as ``detail`` to receive per-mode double norms of the
    α- and β-products.
    """
    sc = scheme(d, abs(complex(lambda_star)))
    if complex(lambda_star) != sc.lambda_star:
        raise ValueError("lambda_star must lie on the positive imaginary axis")
    norm_sq = 0.0
    trace = 0j
    for m in modes:
        mult = 1 if m == 0 else 2
        Ta = scaled_product(fld, m, sc, sc.alpha, t, N, gamma)
        Tb = scaled_product(fld, m, sc, sc.beta, t, N, gamma)
        P = Ta @ Tb
        norm_sq += mult * P.double_norm ** 2
        trace += mult * P.trace()
        if detail is not None:
            detail.append({"mode": m, "alpha": Ta.double_norm, "beta": Tb.double_norm,
                           "product": P.double_norm, "trace": P.trace()})
    return math.sqrt(norm_sq), complex(trace)


def modified_resolvent_check(T, t, theta_tilde, sc: SchemeConstants, cond_limit=1e12) -> float:
    """Relative Frobenius gap between T^{k+1}(I − γT^{k+1})⁻¹ and
    Π_j T(I − ω_j t e^{iθ}T)⁻¹, γ = t^{k+1}e^{iθ̃}, θ = θ̃/(k+1)."""
    T = np.asarray(T, dtype=complex)
    n = T.shape[0]
    I = np.eye(n)
    k1 = sc.k + 1
    gamma = t ** k1 * np.exp(1j * theta_tilde)
    Tk = np.linalg.matrix_power(T, k1)
    S = I - gamma * Tk
    if np.linalg.cond(S) > cond_limit:
        raise NotInModifiedResolventSet(f"I - gamma T^(k+1) is singular for gamma = {gamma}")
    lhs = Tk @ np.linalg.solve(S, I)
    z = t * np.exp(1j * theta_tilde / k1)
    rhs = I.astype(complex)
    for w in sc.omegas:
        F = I - w * z * T
        if np.linalg.cond(F) > cond_limit:
            raise NotInModifiedResolventSet(f"factor I - omega z T is singular for omega = {w}")
        rhs = rhs @ (T @ np.linalg.solve(F, I))
    return float(np.linalg.norm(lhs - rhs) / np.linalg.norm(lhs))


def admissible_t(sc: SchemeConstants, t, thetas, gamma, floor=10.0, step=10 ** (1 / 32), tries=64):
    """Smallest t' = t·step^n with every λ_{j,θ,t'} in the wedge |Im| ≥ γ|λ|, |λ| ≥ floor."""
    for _ in range(tries):
        pts = np.concatenate([sc.points(th, t) for th in thetas])
        if np.all(np.abs(pts) >= floor) and np.all(np.abs(pts.imag) >= gamma * np.abs(pts)):
            return t
        t *= step
    raise ValueError("no admissible t found")


def alpha_norm_scan(fld, mode, t_values, N, t_star=100.0, gamma=0.25, d=2):
    """Double norms of T_{α,t} for one mode; each t is first moved up to an
    admissible value.  Returns (t_used, norms, slope of log norm vs log t)."""
    sc = scheme(d, t_star)
    used, norms = [], []
    for t in t_values:
        t = admissible_t(sc, float(t), [sc.alpha], gamma)
        used.append(t)
        norms.append(scaled_product(fld, mode, sc, sc.alpha, t, N, gamma).double_norm)
    slope = float(np.polyfit(np.log(used), np.log(norms), 1)[0])
    return np.array(used), np.array(norms), slope
