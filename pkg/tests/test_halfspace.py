import cmath
import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from teig.errors import DegenerateContrast, WedgeViolation
from teig.halfspace import (FrozenData, amplitudes, build_symbol, characteristic_residual,
                            derivative_bound, flux_residual, mode_solution, multiplier,
                            multiplier_forms, multiplier_grid)


def random_data(rng, d=2, gamma=0.1):
    B = rng.normal(size=(d, d))
    A = B @ B.T + 0.5 * np.eye(d)
    s1 = rng.uniform(0.3, 3.0)
    s2 = s1 + rng.choice([-1, 1]) * rng.uniform(0.3, 2.0)
    s2 = abs(s2) if abs(s2) > 0.1 else s1 + 1.0
    if abs(s1 - s2) < 0.25:
        s2 = s1 + 0.5
    phi = rng.uniform(math.asin(gamma) + 1e-3, math.pi - math.asin(gamma) - 1e-3)
    phi = phi if rng.random() < 0.5 else -phi
    lam = 10 ** rng.uniform(0, 4) * cmath.exp(1j * phi)
    return FrozenData(A, s1, s2, lam, rng.normal(size=d - 1) * 10 ** rng.uniform(-2, 2), gamma)


def test_origin_symbol():
    sym = build_symbol(FrozenData(np.eye(2), 1.0, 2.0, 1j, [0.0]))
    assert (sym.a, sym.b, sym.c) == (1.0, 0.0, 0.0)
    assert sym.delta1 == pytest.approx(1j)
    assert sym.eta1 == pytest.approx(-cmath.exp(1j * math.pi / 4), abs=1e-15)
    assert sym.delta2 == pytest.approx(2j)
    assert sym.eta2 == pytest.approx(-math.sqrt(2) * cmath.exp(1j * math.pi / 4), abs=1e-15)


def test_anisotropic_forms():
    sym = build_symbol(FrozenData([[2.0, 1.0], [1.0, 3.0]], 1.0, 2.0, 10j, [1.0]))
    assert (sym.a, sym.b, sym.c) == (3.0, 1.0, 2.0)
    for ell, s in ((1, 1.0), (2, 2.0)):
        assert sym.delta(ell) == pytest.approx(-1 + 3 * (2 + 10j * s), rel=1e-15)
    assert sym.discriminant_positivity == pytest.approx(5.0)


def test_symbol_invariants_random():
    rng = np.random.default_rng(0)
    for _ in range(200):
        data = random_data(rng, d=int(rng.integers(2, 4)))
        sym = build_symbol(data)
        for ell in (1, 2):
            assert sym.root(ell).real > 0
            assert sym.eta(ell).real < 0
        assert sym.discriminant_positivity >= -1e-12 * (abs(sym.a * sym.c) + sym.b ** 2)


def test_wedge_and_contrast_errors():
    with pytest.raises(WedgeViolation):
        build_symbol(FrozenData(np.eye(2), 1.0, 2.0, 5.0 + 0.1j, [0.0]))
    with pytest.raises(WedgeViolation):
        build_symbol(FrozenData(np.eye(2), 1.0, 2.0, 0.5j, [0.0]))
    with pytest.raises(DegenerateContrast):
        build_symbol(FrozenData(np.eye(2), 1.0, 1.1, 10j, [0.0]))


def test_mode_solution_boundary_identity():
    sym = build_symbol(FrozenData(np.eye(2), 1.0, 2.0, 1j, [0.0]))
    u1, u2 = mode_solution(sym, 1.0, 0.0)
    assert u1 - u2 == pytest.approx(1.0, abs=1e-15)
    assert mode_solution(sym, 0.0, 2.0) == (0, 0)


def test_mode_solution_ode_oracle():
    sym = build_symbol(FrozenData(np.eye(2), 1.0, 2.0, 1j, [0.0]))
    a1, a2 = amplitudes(sym, 1.0)
    u1, u2 = mode_solution(sym, 1.0, 1.0)
    for ell, alpha, u in ((1, a1, u1), (2, a2, u2)):
        k = sym.c + sym.data.lam * sym.sigma(ell)

        def rhs(t, y):
            return [y[1], (k * y[0] - 2j * sym.b * y[1]) / sym.a]

        sol = solve_ivp(rhs, (0, 1), [alpha, alpha * sym.eta(ell)], rtol=1e-12, atol=1e-14,
                        method="DOP853")
        assert sol.y[0, -1] == pytest.approx(u, rel=1e-8)


def test_identities_random():
    rng = np.random.default_rng(1)
    for _ in range(1000):
        sym = build_symbol(random_data(rng))
        phi = complex(*rng.normal(size=2))
        a1, a2 = amplitudes(sym, phi)
        assert abs((a1 - a2) - phi) <= 1e-12 * max(abs(a1), abs(a2), abs(phi))
        scale = abs(a1 * sym.eta1) + abs(a2 * sym.eta2)
        assert abs(flux_residual(sym, phi)) <= 1e-12 * scale * sym.a
        for ell in (1, 2):
            ksc = abs(sym.c) + abs(sym.data.lam) * sym.sigma(ell) + sym.b ** 2
            assert abs(characteristic_residual(sym, ell)) <= 1e-12 * ksc


def test_flux_zero_data():
    sym = build_symbol(FrozenData(np.eye(2), 1.0, 2.0, 1j, [0.3]))
    assert flux_residual(sym, 0.0) == 0


def test_decay_in_depth():
    rng = np.random.default_rng(2)
    for _ in range(50):
        sym = build_symbol(random_data(rng))
        mags = [np.abs(mode_solution(sym, 1.0, t)) for t in (0, 1, 2, 4)]
        for a, b in zip(mags, mags[1:]):
            assert np.all(b <= a * (1 + 1e-15))


def test_multiplier_value():
    m = multiplier(FrozenData(np.eye(2), 1.0, 2.0, 1j, [0.0]))
    assert m == pytest.approx(-1j / (1 - 1 / math.sqrt(2)), rel=1e-14)


def test_multiplier_forms_agree():
    rng = np.random.default_rng(3)
    for _ in range(300):
        data = random_data(rng)
        for ell in (1, 2):
            q, e = multiplier_forms(data.A, data.sigma1, data.sigma2, data.lam, data.xi_prime, ell)
            assert abs(q - e) <= 1e-10 * abs(e)


def test_multiplier_independent_of_normal_frequency():
    data = FrozenData([[2.0, 0.5], [0.5, 1.0]], 1.0, 3.0, 20j, [0.7])
    assert multiplier(data, 0.0) == multiplier(data, 123.0)


def test_multiplier_bounded_by_low_frequency_constant():
    xi = np.stack(np.meshgrid(np.linspace(-30, 30, 61), np.linspace(-30, 30, 61)), -1).reshape(-1, 2)
    sup = lambda lam: np.max(np.abs(lam * multiplier_grid(np.eye(2), 1.0, 2.0, lam, xi)))
    assert sup(100j) <= 2 * sup(10j)


def test_multiplier_decay_slope():
    ax = np.linspace(-3, 3, 7)
    xi = np.stack(np.meshgrid(ax, ax), -1).reshape(-1, 2)
    lams = [1j * 10.0 ** p for p in (1, 2, 3, 4)]
    for ell in (1, 2):
        mags = np.array([np.abs(multiplier_grid(np.eye(2), 1.0, 2.0, lam, xi, ell)) for lam in lams])
        for col in mags.T:
            slope = np.polyfit(np.log([abs(l) for l in lams]), np.log(col), 1)[0]
            assert slope == pytest.approx(-1.0, abs=0.05)


def test_derivative_bounds_scale_like_inverse_lambda():
    # on grids scaled with |λ|^{1/2} the sup of |λ| |ξ|^j |∇^j m| is λ-independent
    for order in (0, 1, 2):
        vals = [abs(lam) * derivative_bound(np.eye(2), 1.0, 2.0, lam, order, points=9,
                                            extent=3 * abs(lam) ** 0.5) for lam in (10j, 1000j)]
        assert vals[1] == pytest.approx(vals[0], rel=1e-3)
        assert np.isfinite(vals[0]) and vals[0] > 0


def test_three_dimensional_smoke():
    data = FrozenData(np.diag([1.0, 2.0, 1.5]), 1.0, 2.0, 5j, [0.3, -0.2])
    sym = build_symbol(data)
    assert abs(flux_residual(sym, 1.0)) < 1e-12
    assert derivative_bound(data.A, 1.0, 2.0, 5j, 1, points=5) > 0
