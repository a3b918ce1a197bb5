"""Radial-mode discretisation of the reformulated Cauchy system.

With u = u₁ − u₂ and v = λu₂ the transmission problem becomes

    div(A∇u) − λΣ₁u − (Σ₁ − Σ₂)v = Σ₁ f,
    div(A∇v) − λΣ₂v             = Σ₂ g,       u = A∇u·ν = 0 on ∂Ω,

and T_λ : (f, g) ↦ (u, v).  For A = a(r)·I on a disk and angular mode m
each equation is collocated at the staggered nodes r_j = (j − ½)h,
j = 1..N−1, with the conservative stencil

    (1/(r_j h²)) [r_{j+½} a_{j+½}(w_{j+1} − w_j) − r_{j−½} a_{j−½}(w_j − w_{j−1})] − (m²/r_j²) a_j w_j,

(r_{1/2} = 0, so no value at the origin is needed).  Two boundary rows
impose u(R) = 0 and a(R)u′(R) = 0 with one-sided five-point extrapolation stencils;
the v block receives no boundary row.  The matrix is affine in λ:
M(λ) = K − λB.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .coeff import CoefficientField, wedge_membership
from .errors import RankTestAmbiguous, SingularSystem, UnsupportedAnisotropy, WedgeViolation

SCAN_FLOOR = 10.0
COND_LIMIT = 1e12
BACKWARD_LIMIT = 1e-10
BOUNDARY_POINTS = 5


@dataclass(frozen=True)
class RadialGrid:
    N: int
    R: float = 1.0

    @property
    def h(self):
        return self.R / self.N

    @property
    def nodes(self):
        return (np.arange(1, self.N + 1) - 0.5) * self.h

    @property
    def weights(self):
        """Midpoint weights for ∫₀^R f(r) r dr."""
        return self.nodes * self.h

    def inner(self, x, y):
        return np.sum(self.weights * x * np.conj(y))

    def norm(self, x):
        return math.sqrt(float(np.sum(self.weights * np.abs(x) ** 2)))


def _extrapolation_weights(grid, points=BOUNDARY_POINTS):
    """Weights on the last ``points`` nodes for the value and derivative at R."""
    x = grid.nodes[-points:] - grid.R
    value = np.empty(points)
    deriv = np.empty(points)
    for i in range(points):
        others = np.delete(x, i)
        den = np.prod(x[i] - others)
        value[i] = np.prod(-others) / den
        deriv[i] = sum(np.prod(-np.delete(others, k)) for k in range(points - 1)) / den
    return value, deriv


@dataclass
class ModeSystem:
    mode: int
    lam: complex
    grid: RadialGrid
    K: sp.csr_matrix
    B: sp.csr_matrix
    sigma1: np.ndarray
    sigma2: np.ndarray
    boundary_rows: tuple
    companion: bool = False

    @property
    def matrix(self):
        return (self.K - self.lam * self.B).tocsc()

    def rhs(self, f, g):
        N = self.grid.N
        f = np.broadcast_to(np.asarray(f, dtype=complex), (N,))
        g = np.broadcast_to(np.asarray(g, dtype=complex), (N,))
        s_u, s_v = (self.sigma2, self.sigma1) if self.companion else (self.sigma1, self.sigma2)
        b = np.zeros(2 * N, complex)
        b[: N - 1] = s_u[: N - 1] * f[: N - 1]
        b[N + 1:] = s_v[: N - 1] * g[: N - 1]
        return b


def _radial_operator(grid, a_fn, mode):
    """Rows j = 1..N−1 of the conservative radial operator (N−1 × N)."""
    N, h = grid.N, grid.h
    r = grid.nodes
    r_half = np.arange(0, N + 1) * h          # r_{j-1/2}, j = 1..N+1
    a_half = np.asarray(a_fn(r_half), dtype=float) * np.ones(N + 1)
    a_node = np.asarray(a_fn(r), dtype=float) * np.ones(N)
    flux = r_half * a_half                     # flux[0] = 0 at the origin
    rows, cols, vals = [], [], []
    for j in range(N - 1):
        left, right = flux[j], flux[j + 1]
        scale = 1.0 / (r[j] * h * h)
        diag = -(left + right) * scale - mode * mode * a_node[j] / (r[j] * r[j])
        rows += [j, j]
        cols += [j, j + 1]
        vals += [diag, right * scale]
        if j > 0:
            rows.append(j)
            cols.append(j - 1)
            vals.append(left * scale)
    return sp.csr_matrix((vals, (rows, cols)), shape=(N - 1, N))


def build_mode_system(fld: CoefficientField, mode: int, lam, N: int, companion: bool = False) -> ModeSystem:
    """Square 2N system for T_λ (or the companion system with Σ₁ ↔ Σ₂
    in the λ-terms and right sides)."""
    if not fld.is_isotropic:
        raise UnsupportedAnisotropy("radial solvers need A = a(r)·I")
    if N < 32:
        raise ValueError("N must be at least 32")
    if mode < 0:
        raise ValueError("mode must be nonnegative")
    grid = RadialGrid(N, fld.R)
    r = grid.nodes
    s1, s2 = fld.sigma(1, r), fld.sigma(2, r)
    a_fn = fld.a_scalar
    L = _radial_operator(grid, a_fn, mode)
    Z = sp.csr_matrix((N - 1, N))
    coupling = sp.diags(-(s1 - s2)[: N - 1], 0, shape=(N - 1, N))

    a_R = float(a_fn(np.array(fld.R)))
    wv, wd = _extrapolation_weights(grid)
    h = grid.h
    bc = sp.lil_matrix((2, 2 * N))
    nb = len(wv)
    bc[0, N - nb:N] = wv * a_R / (h * h)
    bc[1, N - nb:N] = wd * a_R / h

    K = sp.vstack([sp.hstack([L, coupling]), bc.tocsr(), sp.hstack([Z, L])]).tocsr()
    lam_u, lam_v = (s2, s1) if companion else (s1, s2)
    bdiag = np.concatenate([lam_u[: N - 1], [0.0, 0.0], lam_v[: N - 1]])
    bcols = np.concatenate([np.arange(N - 1), [0, 0], N + np.arange(N - 1)])
    B = sp.csr_matrix((bdiag, (np.arange(2 * N), bcols)), shape=(2 * N, 2 * N))
    B.eliminate_zeros()
    return ModeSystem(mode, complex(lam), grid, K, B, s1, s2, (N - 1, N), companion)


def _condition_estimate(M, lu):
    """‖M‖₁ · ‖M⁻¹‖₁ with ‖M⁻¹‖ from one inverse-power step."""
    n = M.shape[0]
    rng = np.random.default_rng(12345)
    x = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    x /= np.linalg.norm(x, 1)
    y = lu.solve(x)
    y /= np.linalg.norm(y, 1)
    z = lu.solve(y)
    norm_m = abs(M).sum(axis=0).max()
    return float(norm_m * np.linalg.norm(z, 1))


class ModeSolver:
    """Factorised M(λ) with residual-checked solves."""

    def __init__(self, system: ModeSystem):
        self.system = system
        self.M = system.matrix
        try:
            with np.errstate(all="ignore"):
                self.lu = spla.splu(self.M)
        except RuntimeError as exc:
            raise SingularSystem(f"factorisation failed at lambda = {system.lam}: {exc}", math.inf)
        self.condition = _condition_estimate(self.M, self.lu)
        if not np.isfinite(self.condition) or self.condition > COND_LIMIT:
            raise SingularSystem(f"condition estimate {self.condition:.3e} exceeds {COND_LIMIT:g} "
                                 f"at lambda = {system.lam}", self.condition)

    def solve(self, b):
        x = self.lu.solve(b)
        for _ in range(2):
            res = b - self.M @ x
            if self.backward_error(x, b, res) <= BACKWARD_LIMIT:
                return x
            x = x + self.lu.solve(res)
        res = b - self.M @ x
        err = self.backward_error(x, b, res)
        if err > BACKWARD_LIMIT:
            raise SingularSystem(f"backward error {err:.2e} after refinement", self.condition)
        return x

    def backward_error(self, x, b, res=None):
        if res is None:
            res = b - self.M @ x
        norm_m = abs(self.M).sum(axis=0).max()
        den = norm_m * np.linalg.norm(x, 1) + np.linalg.norm(b, 1)
        return float(np.linalg.norm(res, 1) / den) if den > 0 else 0.0


def _check_lambda(lam, gamma, floor):
    lam = complex(lam)
    if abs(lam) < floor:
        raise WedgeViolation(f"|lambda| = {abs(lam):.3g} below the scan floor {floor:g}")
    if gamma is not None and not wedge_membership(lam, gamma):
        raise WedgeViolation(f"lambda = {lam} outside the wedge |Im| >= {gamma:g}|lambda|")
    return lam


def apply_T(fld, mode, lam, N, f, g, gamma=0.1, floor=SCAN_FLOOR, companion=False):
    """(u, v) = T_λ(f, g) on the radial grid (samples at the N nodes).

    Set ``gamma=None`` to skip the wedge test (the system must still be
    well conditioned).
    """
    lam = _check_lambda(lam, gamma, floor)
    system = build_mode_system(fld, mode, lam, N, companion)
    x = ModeSolver(system).solve(system.rhs(f, g))
    return x[:N], x[N:]


def T_matrix(fld, mode, lam, N, gamma=0.1, floor=SCAN_FLOOR, companion=False):
    """Dense 2N×2N matrix of T_λ acting on stacked nodal values (f, g)."""
    lam = _check_lambda(lam, gamma, floor)
    system = build_mode_system(fld, mode, lam, N, companion)
    solver = ModeSolver(system)
    cols = np.eye(2 * N, dtype=complex)
    rhs = np.column_stack([system.rhs(cols[:N, k], cols[N:, k]) for k in range(2 * N)])
    out = solver.lu.solve(rhs)
    return out


def adjoint_residual(fld, mode, lam, N, trials=20, seed=0, swap=False, gamma=0.1):
    """Max relative defect of ⟨T_λ x, y⟩ = ⟨x, P T̃_λ̄ P⁻¹ y⟩ over random smooth pairs.

    P(f, g) = (Σ₁g, Σ₂f); ⟨·,·⟩ is the r dr quadrature inner product.
    ``swap=True`` replaces T̃_λ̄ by T_λ̄ (a negative control).
    """
    grid = RadialGrid(N, fld.R)
    r = grid.nodes
    s1, s2 = fld.sigma(1, r), fld.sigma(2, r)
    lam = complex(lam)
    sys_t = build_mode_system(fld, mode, _check_lambda(lam, gamma, SCAN_FLOOR), N)
    sys_c = build_mode_system(fld, mode, lam.conjugate(), N, companion=not swap)
    sol_t, sol_c = ModeSolver(sys_t), ModeSolver(sys_c)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        f, g, fs, gs = (_smooth_sample(rng, r / fld.R) for _ in range(4))
        xt = sol_t.solve(sys_t.rhs(f, g))
        u, v = xt[:N], xt[N:]
        # P⁻¹(f*, g*) = (g*/Σ₂, f*/Σ₁)
        xc = sol_c.solve(sys_c.rhs(gs / s2, fs / s1))
        ut, vt = xc[:N], xc[N:]
        pu, pv = s1 * vt, s2 * ut
        lhs = grid.inner(u, fs) + grid.inner(v, gs)
        rhs = grid.inner(f, pu) + grid.inner(g, pv)
        scale = (math.hypot(grid.norm(u), grid.norm(v)) * math.hypot(grid.norm(fs), grid.norm(gs))
                 + math.hypot(grid.norm(f), grid.norm(g)) * math.hypot(grid.norm(pu), grid.norm(pv)))
        if scale > 0:
            worst = max(worst, abs(lhs - rhs) / scale)
    return worst


def _smooth_sample(rng, x):
    """Random smooth complex profile on [0, 1]: a short cosine series."""
    k = np.arange(4)
    c = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    return np.cos(np.pi * np.outer(x, k)) @ c


# ---------------------------------------------------------------------------
# eigenvalues from the matrix family M(λ) = K − λB


def nonlinear_eig(fld, mode, contour, N, n_quad=128, probes=None, seed=0,
                  rank_tol=1e-8, gray=(1e-11, 1e-6)):
    """Eigenvalues inside the circle ``contour = (centre, radius)`` by a
    contour-integral (Beyn) method on M(λ), refined by two-sided Rayleigh
    quotient steps.  Returns a list of (λ, 1) sorted by |λ|.
    """
    centre, radius = complex(contour[0]), float(contour[1])
    if radius <= 0:
        raise ValueError("contour radius must be positive")
    base = build_mode_system(fld, mode, centre, N)
    K, B = base.K.tocsc(), base.B.tocsc()
    n = K.shape[0]
    L = probes or min(n, 12)
    rng = np.random.default_rng(seed)
    V = rng.standard_normal((n, L)) + 1j * rng.standard_normal((n, L))
    A0 = np.zeros((n, L), complex)
    A1 = np.zeros((n, L), complex)
    ref = 0.0
    for k in range(n_quad):
        z = np.exp(2j * np.pi * (k + 0.5) / n_quad)
        lam = centre + radius * z
        with np.errstate(all="ignore"):
            lu = spla.splu((K - lam * B).tocsc())
        X = lu.solve(V)
        w = radius * z / n_quad
        A0 += w * X
        A1 += w * lam * X
        ref = max(ref, radius * np.abs(X).max())
    U, s, Wh = np.linalg.svd(A0, full_matrices=False)
    rel = s / ref if ref > 0 else s
    if np.any((rel > gray[0]) & (rel < gray[1])):
        raise RankTestAmbiguous(f"singular values {rel} fall in the ambiguous band {gray}")
    k = int(np.sum(rel >= rank_tol))
    if k == 0:
        return []
    if k == L:
        raise RankTestAmbiguous("probe block saturated; increase probes")
    U, s, Wh = U[:, :k], s[:k], Wh[:k]
    Bk = U.conj().T @ A1 @ Wh.conj().T / s
    vals = sla.eigvals(Bk)
    out = []
    for lam in vals:
        lam = _rayleigh_refine(K, B, lam)
        if abs(lam - centre) < radius:
            out.append((complex(lam), 1))
    out.sort(key=lambda e: (abs(e[0]), e[0].imag))
    return out


def _rayleigh_refine(K, B, lam, steps=4):
    n = K.shape[0]
    rng = np.random.default_rng(1)
    x = rng.standard_normal(n) + 0j
    y = rng.standard_normal(n) + 0j
    for _ in range(steps):
        with np.errstate(all="ignore"):
            try:
                lu = spla.splu((K - lam * B).tocsc())
            except RuntimeError:
                return lam
        x = lu.solve(x)
        x /= np.linalg.norm(x)
        y = lu.solve(y, trans="H")
        y /= np.linalg.norm(y)
        den = y.conj() @ (B @ x)
        if den == 0 or not np.isfinite(den):
            return lam
        new = (y.conj() @ (K @ x)) / den
        if not np.isfinite(new):
            return lam
        if abs(new - lam) <= 1e-14 * abs(lam):
            return new
        lam = new
    return lam


# ---------------------------------------------------------------------------
# norms


def _d1(u, h):
    return np.gradient(u, h, edge_order=2)


def lambda_norm(u, lam, order, grid: RadialGrid, mode: int = 0):
    """Discrete W^{order,2}_λ norm of u(r)e^{imθ} with the r dr measure:

        ( Σ_{j ≤ order} ‖ |λ|^{(order−j)/2} ∇^j u ‖² )^{1/2}.
    """
    if order not in (0, 1, 2):
        raise ValueError("order must be 0, 1 or 2")
    u = np.asarray(u, dtype=complex)
    r, h, w = grid.nodes, grid.h, grid.weights
    lam_abs = abs(complex(lam))
    terms = [np.abs(u) ** 2]
    if order >= 1:
        du = _d1(u, h)
        terms.append(np.abs(du) ** 2 + (mode * np.abs(u) / r) ** 2)
    if order >= 2:
        d2u = _d1(du, h)
        cross = mode * (du / r - u / r ** 2)
        ang = du / r - mode * mode * u / r ** 2
        terms.append(np.abs(d2u) ** 2 + 2 * np.abs(cross) ** 2 + np.abs(ang) ** 2)
    total = sum(lam_abs ** (order - j) * np.sum(w * t) for j, t in enumerate(terms))
    return math.sqrt(float(total))
