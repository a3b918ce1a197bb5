import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from teig.coeff import (CoefficientField, RadialProfile, field_from_json, load_profile, validate,
                        wedge_membership)
from teig.errors import (ContrastViolation, EllipticityViolation, NonSymmetric, ProfileNotFound,
                         ZeroLambda)


def test_sigma14_passes():
    rep = validate(CoefficientField(a="identity", sigma1=1.0, sigma2=4.0, Lambda=4.0))
    assert rep.passed
    assert rep["smoothness"].passed is None


def test_equal_sigmas_violate_contrast():
    with pytest.raises(ContrastViolation) as exc:
        validate(CoefficientField(sigma1=1.0, sigma2=1.0))
    assert exc.value.report["boundary_contrast"].passed is False


def test_strong_anisotropy_violates_ellipticity():
    with pytest.raises(EllipticityViolation):
        validate(CoefficientField(a=np.diag([10.0, 1.0]), Lambda=4.0))


def test_nonsymmetric_matrix():
    with pytest.raises(NonSymmetric):
        validate(CoefficientField(a=[[1.0, 0.5], [0.0, 1.0]]))


def test_sigma_out_of_bounds():
    with pytest.raises(EllipticityViolation):
        validate(CoefficientField(sigma2=5.0, Lambda=4.0))


def test_report_without_raising():
    rep = validate(CoefficientField(sigma2=RadialProfile([1.0, 0.0, 3.0])), raise_on_failure=False)
    # sigma2(1) = 4 but sigma2(0) = 1 = sigma1(0): contrast only matters at R
    assert rep.passed
    rep = validate(CoefficientField(sigma2=RadialProfile([4.0, 0.0, -3.0])), raise_on_failure=False)
    bad = rep["boundary_contrast"]
    assert bad.passed is False and bad.worst_r == 1.0 and bad.worst_value == pytest.approx(0.0)


def test_samples_precondition():
    with pytest.raises(ValueError):
        validate(CoefficientField(), samples=1)


@given(st.floats(4.0, 100.0))
def test_validate_monotone_in_Lambda(lam):
    fld = CoefficientField(sigma2=RadialProfile([2.0, 0.0, 2.0]), contrast_floor=0.25)
    assert validate(fld).passed
    assert validate(fld.with_Lambda(lam)).passed


def test_wedge_examples():
    assert wedge_membership(1j, 0.5)
    assert not wedge_membership(1.0, 0.5)
    assert not wedge_membership(1 + 1j, 0.9)


def test_wedge_errors():
    with pytest.raises(ZeroLambda):
        wedge_membership(0, 0.5)
    with pytest.raises(ValueError):
        wedge_membership(1j, 1.5)


@given(st.complex_numbers(min_magnitude=1e-3, max_magnitude=1e3, allow_nan=False, allow_infinity=False),
       st.floats(1e-3, 1e3), st.floats(0.01, 0.99))
def test_wedge_scale_invariant(lam, s, gamma):
    ratio = abs(lam.imag) / abs(lam)
    if abs(ratio - gamma) < 1e-9:
        return
    assert wedge_membership(lam, gamma) == wedge_membership(s * lam, gamma)


def test_profile_roundtrip(tmp_path):
    fld = CoefficientField(sigma2=RadialProfile([[2.0, 1.0], [3.0]], [0.0, 0.5, 2.0]))
    p = tmp_path / "m.json"
    p.write_text(json.dumps(fld.to_json()))
    back = load_profile(p)
    r = np.linspace(0, 1, 11)
    np.testing.assert_array_equal(back.sigma(2, r), fld.sigma(2, r))
    assert back.sigma(2, 0.4) == pytest.approx(2.4)
    assert back.sigma(2, 0.6) == 3.0


def test_preset_json():
    fld = field_from_json({"R": 1.0, "a": "identity", "sigma1": 1.0, "sigma2": 4.0, "Lambda": 4.0})
    assert fld.disk_medium().sigma2 == 4.0
    assert fld.is_isotropic


def test_missing_profile_names_path(tmp_path):
    missing = tmp_path / "nope.json"
    with pytest.raises(ProfileNotFound, match="nope.json"):
        load_profile(missing)


def test_matrix_field_sets_dimension():
    fld = CoefficientField(a=np.eye(3))
    assert fld.dim == 3 and not fld.is_isotropic
    assert fld.A(np.array([0.1, 0.2])).shape == (2, 3, 3)
