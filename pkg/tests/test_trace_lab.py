import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from teig.coeff import CoefficientField
from teig.errors import NotInModifiedResolventSet, QuadratureNotConverged
from teig.trace_lab import (
    DiscreteHS, admissible_t, alpha_norm_scan, hs_products, im_c_identity, kernel_F,
    modified_resolvent_check, product_factorization_check, scaled_product, scheme, trace_diag,
    trace_limit_constant,
)

I2 = np.eye(2)
A_ANISO = np.array([[2.0, 0.3], [0.3, 1.0]])


def _rand_spd(rng):
    M = rng.standard_normal((2, 2))
    return M @ M.T + 0.5 * I2


# ---------------------------------------------------------------------------
# scheme


def test_scheme_d2():
    sc = scheme(2)
    assert sc.k == 2
    assert sc.alpha == pytest.approx(math.pi / 12, rel=1e-15)
    assert sc.beta == pytest.approx(5 * math.pi / 12, rel=1e-15)
    assert sc.lambda_star == 100j
    assert sc.M_t(4.0) == (2.0, 0.5)


@pytest.mark.parametrize("d", [2, 3, 4, 5, 8])
def test_scheme_identities(d):
    sc = scheme(d, 7.0)
    assert sc.k == d // 2 + 1
    assert np.all(np.abs(sc.omegas ** (sc.k + 1) - 1) <= 1e-14)
    gaps = np.abs(sc.omegas[:, None] - sc.omegas[None, :])
    assert np.all(gaps[~np.eye(sc.k + 1, dtype=bool)] > 0.1)
    s = np.exp(1j * sc.alpha * (sc.k + 1)) + np.exp(1j * sc.beta * (sc.k + 1))
    assert abs(s) <= 1e-15
    pts = sc.points(0.3, 2.0)
    assert np.allclose(pts, 7j + sc.omegas * 2.0 * np.exp(0.3j), rtol=0, atol=1e-14)


def test_scheme_d3():
    assert scheme(3).k == 2


def test_scheme_errors():
    with pytest.raises(ValueError):
        scheme(1)
    with pytest.raises(ValueError):
        scheme(2, 0.0)


# ---------------------------------------------------------------------------
# factorisation


def test_factorization_at_origin():
    assert product_factorization_check(2, I2, 1.0, 1.0, [0.0, 0.0], lambda_star=1j) <= 1e-13


def test_factorization_random():
    rng = np.random.default_rng(0)
    for _ in range(20):
        xi = rng.standard_normal(2) * 10
        assert product_factorization_check(2, _rand_spd(rng), 1 + rng.random(), 1e3, xi) <= 1e-12


def test_factorization_negative_control():
    om = scheme(2).omegas.copy()
    om[1] += 1e-3
    assert product_factorization_check(2, I2, 1.0, 1e3, [0.3, 2.0], omegas=om) > 1e-6


# ---------------------------------------------------------------------------
# kernels


def _k0_series(x):
    """K₀ from its ascending series, in 40-digit arithmetic."""
    x = mp.mpmathify(x)
    q = (x / 2) ** 2
    term, harm = mp.mpf(1), mp.mpf(0)
    i0, tail = mp.mpf(0), mp.mpf(0)
    for k in range(200):
        if k:
            term *= q / (k * k)
            harm += mp.mpf(1) / k
        i0 += term
        tail += term * harm
    return -(mp.log(x / 2) + mp.euler) * i0 + tail


@pytest.fixture(autouse=True)
def _mp_precision():
    with mp.workdps(40):
        yield


@pytest.mark.parametrize("lam,z", [(4.0, (0.7, 0.2)), (1.0, (0.1, 0.05)), (9.0, (1.0, -1.2))])
def test_kernel_matches_k0(lam, z):
    exact = -_k0_series(math.sqrt(lam) * math.hypot(*z)) / (2 * mp.pi)
    assert kernel_F(I2, 1.0, lam, z) == pytest.approx(complex(exact), rel=1e-5)


def test_kernel_complex_anisotropic():
    lam, sigma, z = 10 + 5j, 2.0, np.array([0.5, -0.2])
    B = A_ANISO / sigma
    w, V = np.linalg.eigh(B)
    zeta = math.sqrt(z @ np.linalg.inv(B) @ z)
    exact = -_k0_series(mp.sqrt(mp.mpc(lam)) * zeta) / (2 * mp.pi * math.sqrt(np.prod(w)))
    assert kernel_F(A_ANISO, sigma, lam, z) == pytest.approx(complex(exact), rel=1e-5)


def test_kernel_scaling():
    z = np.array([0.4, 0.3])
    for lam in (4.0, 30j, 20 * np.exp(2j)):
        a = kernel_F(A_ANISO, 1.5, 4 * lam, z / 2)
        b = kernel_F(A_ANISO, 1.5, lam, z)
        assert a == pytest.approx(b, rel=1e-5)


def test_kernel_errors():
    with pytest.raises(QuadratureNotConverged):
        kernel_F(I2, 1.0, 4.0, [0.0, 0.0])
    with pytest.raises(ValueError):
        kernel_F(I2, 1.0, -4.0, [0.1, 0.0])
    with pytest.raises(ValueError):
        kernel_F(np.eye(3), 1.0, 4.0, [0.1, 0.0, 0.0])


# ---------------------------------------------------------------------------
# diagonal traces


def test_limit_integral():
    oracle = complex(mp.quad(lambda s: 1 / (s ** 6 - 1j), [0, 1, mp.inf]))
    full = math.pi * oracle                         # ∫_{R²} dξ/(|ξ|^12 − i)
    assert trace_limit_constant(I2, 1.0) == pytest.approx(full / (2 * math.pi) ** 2, rel=1e-10)


def test_limit_constant_scalings():
    base = trace_limit_constant(I2, 1.0)
    assert trace_limit_constant(np.diag([4.0, 1.0]), 1.0) == pytest.approx(base / 2, rel=1e-10)
    assert trace_limit_constant(I2, 4.0) == pytest.approx(4 * base, rel=1e-10)
    assert trace_limit_constant(I2, [1.0, 4.0]) == pytest.approx(5 * base, rel=1e-10)


def test_trace_ratio_at_1e3():
    c = trace_limit_constant(A_ANISO, [1.0, 4.0])
    t = 1e3
    assert abs(trace_diag(A_ANISO, [1.0, 4.0], t) * t ** 5 / c - 1) <= 0.01


def test_product_and_scaled_forms_agree():
    for A, s in ((I2, 1.0), (A_ANISO, [1.0, 4.0])):
        a = trace_diag(A, s, 1.0, form="scaled")
        b = trace_diag(A, s, 1.0, form="product")
        assert abs(a - b) <= 1e-8 * abs(a)
    a = trace_diag(A_ANISO, 2.0, 50.0, t_star=3.0, form="scaled")
    b = trace_diag(A_ANISO, 2.0, 50.0, t_star=3.0, form="product")
    assert abs(a - b) <= 1e-8 * abs(a)


def test_trace_decay_is_cauchy():
    vals = [trace_diag(A_ANISO, [1.0, 4.0], t) * t ** 5 for t in (1e2, 3e2, 1e3)]
    assert abs(vals[2] - vals[1]) < abs(vals[1] - vals[0])


def test_trace_diag_errors():
    with pytest.raises(ValueError):
        trace_diag(I2, 1.0, 0.5)
    with pytest.raises(ValueError):
        trace_diag(I2, 1.0, 2.0, form="other")


# ---------------------------------------------------------------------------
# Im(c)


def test_im_c_identity_unit():
    lhs, rhs, gap = im_c_identity(I2, 1.0)
    assert rhs == pytest.approx(math.pi * (1 / 12) * math.pi / math.sin(math.pi / 12), rel=1e-14)
    oracle = float(mp.pi * mp.quad(lambda s: 1 / (s ** 12 + 1), [0, 1, mp.inf]))
    assert lhs == pytest.approx(oracle, rel=1e-10)
    assert gap <= 1e-6


def test_im_c_identity_scalings():
    lhs0, rhs0, _ = im_c_identity(I2, 1.0)
    lhs, rhs, gap = im_c_identity(np.diag([4.0, 1.0]), 1.0)
    assert lhs == pytest.approx(lhs0 / 2, rel=1e-10) and rhs == pytest.approx(rhs0 / 2, rel=1e-14)
    lhs, rhs, gap = im_c_identity(I2, 4.0)
    assert lhs == pytest.approx(4 * lhs0, rel=1e-10) and rhs == pytest.approx(4 * rhs0, rel=1e-14)


def test_im_c_identity_random():
    rng = np.random.default_rng(5)
    for _ in range(5):
        s = 1 + 3 * rng.random(2)
        assert im_c_identity(_rand_spd(rng), s)[2] <= 1e-6


def test_im_c_identity_requires_d2():
    with pytest.raises(ValueError):
        im_c_identity(np.eye(3), 1.0, d=3)


# ---------------------------------------------------------------------------
# modified resolvent


def test_modified_resolvent_diagonal():
    gap = modified_resolvent_check(np.diag([0.5, 0.25]), 2.0, math.pi / 3, scheme(2))
    assert gap <= 1e-13


def test_modified_resolvent_random():
    sc = scheme(2)
    for seed in range(10):
        rng = np.random.default_rng(seed)
        T = rng.standard_normal((20, 20)) + 1j * rng.standard_normal((20, 20))
        T /= np.linalg.norm(T, 2)
        assert modified_resolvent_check(T, 0.8, 2 * math.pi * rng.random(), sc) <= 1e-11


def test_modified_resolvent_negative_control():
    # γ = 8 = 1/0.5³ makes I − γT³ singular
    with pytest.raises(NotInModifiedResolventSet):
        modified_resolvent_check(np.diag([0.5, 0.25]), 2.0, 0.0, scheme(2))


# ---------------------------------------------------------------------------
# discrete Hilbert-Schmidt operators


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10 ** 6), n=st.integers(2, 12))
def test_double_norm_submultiplicative(seed, n):
    rng = np.random.default_rng(seed)
    w = rng.random(n) + 0.1
    a = DiscreteHS.from_operator(rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n)), w)
    b = DiscreteHS.from_operator(rng.standard_normal((n, n)), w)
    assert (a @ b).double_norm <= a.double_norm * b.double_norm * (1 + 1e-12)
    assert (a @ b).trace() == pytest.approx((b @ a).trace(), rel=1e-12, abs=1e-12)


def test_double_norm_is_weighted_kernel_norm():
    rng = np.random.default_rng(2)
    T = rng.standard_normal((6, 6))
    w = rng.random(6) + 0.5
    hs = DiscreteHS.from_operator(T, w)
    # kernel K_ij = T_ij / w_j, so ∬|K|² = Σ w_i w_j |K_ij|²
    K = T / w[None, :]
    assert hs.double_norm ** 2 == pytest.approx(np.sum(w[:, None] * w[None, :] * K ** 2), rel=1e-13)
    assert hs.trace() == pytest.approx(np.trace(T), rel=1e-13)


# ---------------------------------------------------------------------------
# operator products


def test_admissible_t_moves_into_wedge():
    sc = scheme(2, 100.0)
    t = admissible_t(sc, 100.0, [sc.alpha, sc.beta], 0.1)
    assert t >= 100.0
    pts = np.concatenate([sc.points(sc.alpha, t), sc.points(sc.beta, t)])
    assert np.all(np.abs(pts.imag) >= 0.1 * np.abs(pts))


def test_hs_trace_is_diagonal_sum(field14):
    sc = scheme(2, 100.0)
    t = admissible_t(sc, 150.0, [sc.alpha, sc.beta], 0.1)
    Ta = scaled_product(field14, 1, sc, sc.alpha, t, 48)
    Tb = scaled_product(field14, 1, sc, sc.beta, t, 48)
    P = Ta @ Tb
    assert P.trace() == np.sum(np.diag(Ta.matrix @ Tb.matrix))
    detail = []
    norm, trace = hs_products(field14, 100j, t, [0, 1], 48, detail=detail)
    assert trace == pytest.approx(detail[0]["trace"] + 2 * detail[1]["trace"], rel=1e-14)
    assert detail[1]["trace"] == pytest.approx(P.trace(), rel=1e-12)
    assert norm == pytest.approx(math.hypot(detail[0]["product"], math.sqrt(2) * detail[1]["product"]),
                                 rel=1e-12)


def test_hs_products_rejects_bad_lambda_star(field14):
    with pytest.raises(ValueError):
        hs_products(field14, 100 + 1j, 200.0, [0], 48)


def test_alpha_norm_decay(field14):
    used, norms, slope = alpha_norm_scan(field14, 0, [120.0, 300.0, 1000.0], 64)
    assert np.all(np.diff(used) > 0)
    assert slope <= -2.3


@pytest.mark.slow
def test_trace_ratio_trend(field14):
    sc = scheme(2, 100.0)
    ratios = []
    for t0 in (200.0, 700.0):
        t = admissible_t(sc, t0, [sc.alpha, sc.beta], 0.1)
        ref = math.pi * trace_diag(I2, [1.0, 4.0], t, t_star=100.0)
        _, tr = hs_products(field14, 100j, t, range(40), 64)
        ratios.append(abs(tr / ref))
    assert abs(ratios[1] - 1) <= 0.2
    assert abs(ratios[1] - 1) < abs(ratios[0] - 1)
