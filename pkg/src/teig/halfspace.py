"""Symbol calculus for the constant-coefficient half-space Cauchy problem.

Freeze A, Σ₁, Σ₂ and λ, take the Fourier transform in the tangential
variables ξ′ and look for decaying modes û_ℓ(ξ′, t) = α_ℓ e^{η_ℓ t} of

    a û″ + 2ib û′ − (c + λΣ_ℓ) û = 0,          t > 0,

with a = ⟨A e_d, e_d⟩, b = Σ_j A_jd ξ′_j, c = ⟨A′ξ′, ξ′⟩.  The roots with
negative real part are η_ℓ = (−ib − √Δ_ℓ)/a where Δ_ℓ = −b² + a(c + λΣ_ℓ)
and √ has positive real part.  Matching the Cauchy data u₁ − u₂ = φ and
zero conormal flux on t = 0 fixes

    α₁ = φ̂ √Δ₂ / (√Δ₂ − √Δ₁),    α₂ = φ̂ √Δ₁ / (√Δ₂ − √Δ₁),

and the multiplier m_ℓ = √Δ_{ℓ+1} / (η_ℓ² (√Δ₂ − √Δ₁)) (indices mod 2).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateContrast, WedgeViolation


@dataclass(frozen=True)
class FrozenData:
    A: np.ndarray
    sigma1: float
    sigma2: float
    lam: complex
    xi_prime: np.ndarray
    gamma: float = 0.1
    Lambda: float = 4.0

    def __post_init__(self):
        A = np.array(self.A, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] < 2:
            raise ValueError("A must be a square matrix with d >= 2")
        if not np.allclose(A, A.T, rtol=1e-14, atol=0):
            raise ValueError("A must be symmetric")
        xi = np.atleast_1d(np.asarray(self.xi_prime, dtype=float))
        if xi.shape != (A.shape[0] - 1,):
            raise ValueError(f"xi_prime must have length d-1 = {A.shape[0] - 1}")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "xi_prime", xi)
        object.__setattr__(self, "lam", complex(self.lam))

    @property
    def dim(self):
        return self.A.shape[0]

    def check(self):
        lam = self.lam
        if abs(lam) < 1:
            raise WedgeViolation(f"|lambda| = {abs(lam):.3g} < 1")
        if abs(lam.imag) < self.gamma * abs(lam):
            raise WedgeViolation(f"|Im lambda| < {self.gamma:g}|lambda| for lambda = {lam}")
        if abs(self.sigma1 - self.sigma2) < 1.0 / self.Lambda:
            raise DegenerateContrast(f"|sigma1 - sigma2| = {abs(self.sigma1 - self.sigma2):.3g} "
                                     f"< 1/Lambda = {1.0 / self.Lambda:.3g}")


@dataclass(frozen=True)
class HalfSpaceSymbol:
    data: FrozenData
    a: float
    b: float
    c: float
    delta1: complex
    delta2: complex
    root1: complex
    root2: complex
    eta1: complex
    eta2: complex
    discriminant_positivity: float

    def delta(self, ell):
        return self.delta1 if ell == 1 else self.delta2

    def root(self, ell):
        return self.root1 if ell == 1 else self.root2

    def eta(self, ell):
        return self.eta1 if ell == 1 else self.eta2

    def sigma(self, ell):
        return self.data.sigma1 if ell == 1 else self.data.sigma2


def tangential_forms(A, xi_prime):
    """(a, b, c) for A and an array of tangential frequencies (..., d-1)."""
    A = np.asarray(A, dtype=float)
    xi = np.asarray(xi_prime, dtype=float)
    a = A[-1, -1]
    b = xi @ A[:-1, -1]
    c = np.einsum("...i,ij,...j->...", xi, A[:-1, :-1], xi)
    return a, b, c


def _roots(a, b, c, lam, sigma):
    delta = -b * b + a * (c + lam * sigma)
    delta = np.asarray(delta, dtype=complex)
    if np.any((delta.imag == 0) & (delta.real <= 0)):
        raise WedgeViolation("Delta on the branch cut of the square root")
    root = np.sqrt(delta)
    eta = (-1j * b - root) / a
    return delta, root, eta


def build_symbol(data: FrozenData) -> HalfSpaceSymbol:
    data.check()
    a, b, c = tangential_forms(data.A, data.xi_prime)
    d1, r1, e1 = _roots(a, b, c, data.lam, data.sigma1)
    d2, r2, e2 = _roots(a, b, c, data.lam, data.sigma2)
    return HalfSpaceSymbol(data, float(a), float(b), float(c), complex(d1), complex(d2),
                           complex(r1), complex(r2), complex(e1), complex(e2), float(a * c - b * b))


def amplitudes(sym: HalfSpaceSymbol, phi_hat):
    gap = sym.root2 - sym.root1
    if gap == 0:
        raise DegenerateContrast("sqrt(Delta_1) == sqrt(Delta_2)")
    return phi_hat * sym.root2 / gap, phi_hat * sym.root1 / gap


def mode_solution(sym: HalfSpaceSymbol, phi_hat, t):
    """(û₁, û₂) at depth t ≥ 0."""
    if np.any(np.asarray(t) < 0):
        raise ValueError("t must be nonnegative")
    a1, a2 = amplitudes(sym, phi_hat)
    return a1 * np.exp(sym.eta1 * t), a2 * np.exp(sym.eta2 * t)


def flux_residual(sym: HalfSpaceSymbol, phi_hat) -> complex:
    """Conormal flux of û₁ − û₂ at t = 0: a(α₁η₁ − α₂η₂) + ib(α₁ − α₂)."""
    a1, a2 = amplitudes(sym, phi_hat)
    return sym.a * (a1 * sym.eta1 - a2 * sym.eta2) + 1j * sym.b * (a1 - a2)


def characteristic_residual(sym: HalfSpaceSymbol, ell) -> complex:
    """a η² + 2ib η − (c + λΣ_ℓ), which vanishes for the decaying root."""
    eta = sym.eta(ell)
    return sym.a * eta * eta + 2j * sym.b * eta - (sym.c + sym.data.lam * sym.sigma(ell))


# ---------------------------------------------------------------------------
# multiplier


def multiplier_forms(A, sigma1, sigma2, lam, xi_prime, ell=1):
    """Both closed forms of m_ℓ over an array of ξ′ (shape (..., d-1)).

    Returns (quotient form, expanded form).  The expanded form avoids the
    difference √Δ₂ − √Δ₁ and is the one used for evaluation.
    """
    a, b, c = tangential_forms(A, xi_prime)
    sig = (sigma1, sigma2)
    d1, r1, e1 = _roots(a, b, c, lam, sigma1)
    d2, r2, e2 = _roots(a, b, c, lam, sigma2)
    roots = (r1, r2)
    etas = (e1, e2)
    own = ell - 1
    other = 1 - own
    quotient = roots[other] / (etas[own] ** 2 * (r2 - r1))
    expanded = (roots[other] * (r1 + r2) * (1j * b - roots[own]) ** 2
                / (a * lam * (sigma2 - sigma1) * (c + lam * sig[own]) ** 2))
    return quotient, expanded


def multiplier(data: FrozenData, xi_d: float = 0.0, ell: int = 1) -> complex:
    """m_ℓ(ξ′, ξ_d); the symbol does not depend on ξ_d.

    Raises ArithmeticError if the two closed forms disagree by more than
    1e-10 relative.
    """
    if ell not in (1, 2):
        raise ValueError("ell must be 1 or 2")
    data.check()
    q, e = multiplier_forms(data.A, data.sigma1, data.sigma2, data.lam, data.xi_prime, ell)
    q, e = complex(q), complex(e)
    if abs(q - e) > 1e-10 * abs(e):
        raise ArithmeticError(f"multiplier forms disagree: {q} vs {e}")
    return e


def multiplier_grid(A, sigma1, sigma2, lam, xi, ell=1):
    """m_ℓ at full frequencies ξ (shape (..., d)); only ξ′ = ξ[..., :-1] matters."""
    xi = np.asarray(xi, dtype=float)
    return multiplier_forms(A, sigma1, sigma2, lam, xi[..., :-1], ell)[1]


def derivative_bound(A, sigma1, sigma2, lam, order=1, points=17, extent=10.0, ell=1, rel_step=1e-4):
    """sup over a grid of |ξ|^j |∇^j m_ℓ(ξ)| (j = order ∈ {0, 1, 2}).

    Derivatives are central finite differences with step rel_step·max(1, |ξ|);
    the grid is ``points`` per axis on [-extent, extent]^d minus the origin.
    """
    A = np.asarray(A, dtype=float)
    d = A.shape[0]
    ax = np.linspace(-extent, extent, points)
    xi = np.stack(np.meshgrid(*([ax] * d), indexing="ij"), axis=-1).reshape(-1, d)
    norm = np.linalg.norm(xi, axis=1)
    xi, norm = xi[norm > 0], norm[norm > 0]
    m = lambda x: multiplier_grid(A, sigma1, sigma2, lam, x, ell)
    if order == 0:
        return float(np.max(np.abs(m(xi))))
    h = rel_step * np.maximum(1.0, norm)
    eye = np.eye(d)
    if order == 1:
        grad = np.stack([(m(xi + h[:, None] * eye[i]) - m(xi - h[:, None] * eye[i])) / (2 * h)
                         for i in range(d)], axis=-1)
        return float(np.max(norm * np.linalg.norm(grad, axis=-1)))
    if order == 2:
        hess = np.zeros((len(xi), d, d), complex)
        for i in range(d):
            for j in range(d):
                ei, ej = h[:, None] * eye[i], h[:, None] * eye[j]
                hess[:, i, j] = (m(xi + ei + ej) - m(xi + ei - ej) - m(xi - ei + ej)
                                 + m(xi - ei - ej)) / (4 * h * h)
        return float(np.max(norm ** 2 * np.sqrt(np.sum(np.abs(hess) ** 2, axis=(1, 2)))))
    raise ValueError("order must be 0, 1 or 2")
