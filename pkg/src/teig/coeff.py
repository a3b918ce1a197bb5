"""Media: radially symmetric coefficient fields and their validation.

A medium on the disk of radius R is (A(r), Σ₁(r), Σ₂(r)) with a single
principal part A shared by both equations.  ``validate`` checks the
structural hypotheses on a sample grid:

* symmetry of A,
* uniform ellipticity  Λ⁻¹|ξ|² ≤ ⟨Aξ,ξ⟩ ≤ Λ|ξ|²,
* bounds  Λ⁻¹ ≤ Σ_ℓ ≤ Λ,
* boundary contrast  |Σ₁(R) − Σ₂(R)| ≥ contrast_floor,
* shared principal part (structural: there is only one A),
* smoothness (declared, not certifiable from samples).
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ContrastViolation, EllipticityViolation, NonSymmetric, ProfileNotFound, ZeroLambda


class RadialProfile:
    """Piecewise polynomial in r; coefficients ascending in powers of r.

    ``breaks`` has one more entry than ``coeffs``; piece i applies on
    [breaks[i], breaks[i+1]).  A single polynomial is RadialProfile([c0, c1, ...]).
    """

    def __init__(self, coeffs, breaks=None):
        coeffs = [list(map(float, c)) for c in (coeffs if breaks is not None else [coeffs])]
        if breaks is None:
            breaks = [0.0, math.inf]
        breaks = [float(b) for b in breaks]
        if len(breaks) != len(coeffs) + 1 or any(b1 <= b0 for b0, b1 in zip(breaks, breaks[1:])):
            raise ValueError("breaks must be increasing with one more entry than pieces")
        self.coeffs = coeffs
        self.breaks = breaks

    @classmethod
    def constant(cls, value):
        return cls([float(value)])

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        idx = np.clip(np.searchsorted(self.breaks, r, side="right") - 1, 0, len(self.coeffs) - 1)
        out = np.zeros_like(r)
        for i, c in enumerate(self.coeffs):
            sel = idx == i
            if np.any(sel):
                out[sel] = np.polynomial.polynomial.polyval(r[sel], c)
        return out if out.ndim else float(out)

    def to_json(self):
        if len(self.coeffs) == 1 and self.breaks == [0.0, math.inf]:
            c = self.coeffs[0]
            return c[0] if len(c) == 1 else {"coeffs": c}
        return {"coeffs": self.coeffs, "breaks": self.breaks}

    @classmethod
    def from_json(cls, spec):
        if isinstance(spec, (int, float)):
            return cls.constant(spec)
        if isinstance(spec, dict):
            return cls(spec["coeffs"], spec.get("breaks"))
        raise ValueError(f"cannot read radial profile from {spec!r}")

    @property
    def is_constant(self):
        return len(self.coeffs) == 1 and len(self.coeffs[0]) == 1


def _as_profile(x):
    if isinstance(x, RadialProfile):
        return x
    if callable(x):
        return x
    return RadialProfile.constant(x)


@dataclass(frozen=True)
class CoefficientField:
    """Radially symmetric medium on the disk of radius R.

    ``a`` is a scalar profile (A = a(r)·I) or a constant d×d matrix;
    ``sigma1``/``sigma2`` are scalar profiles.  Numbers are promoted to
    constant profiles and any vectorised callable of r is accepted.
    """

    R: float = 1.0
    a: object = 1.0
    sigma1: object = 1.0
    sigma2: object = 4.0
    Lambda: float = 4.0
    contrast_floor: float | None = None
    dim: int = 2

    def __post_init__(self):
        if not self.R > 0:
            raise ValueError("R must be positive")
        if not self.Lambda >= 1:
            raise ValueError("Lambda must be >= 1")
        a = self.a
        if isinstance(a, str):
            if a != "identity":
                raise ValueError(f"unknown principal part {a!r}")
            a = 1.0
        if isinstance(a, (list, tuple, np.ndarray)):
            a = np.array(a, dtype=float)
            if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 2:
                raise ValueError("matrix principal part must be square with d >= 2")
            object.__setattr__(self, "dim", a.shape[0])
        else:
            a = _as_profile(a)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "sigma1", _as_profile(self.sigma1))
        object.__setattr__(self, "sigma2", _as_profile(self.sigma2))
        if self.contrast_floor is None:
            object.__setattr__(self, "contrast_floor", 1.0 / self.Lambda)
        if not self.contrast_floor > 0:
            raise ValueError("contrast_floor must be positive")

    @property
    def is_isotropic(self):
        return not isinstance(self.a, np.ndarray)

    def A(self, r):
        """A(r) as an array of shape r.shape + (d, d)."""
        r = np.asarray(r, dtype=float)
        if isinstance(self.a, np.ndarray):
            return np.broadcast_to(self.a, r.shape + self.a.shape).copy()
        vals = np.asarray(self.a(r), dtype=float) * np.ones_like(r)
        return vals[..., None, None] * np.eye(self.dim)

    def a_scalar(self, r):
        if not self.is_isotropic:
            raise ValueError("principal part is not a multiple of the identity")
        return np.asarray(self.a(r), dtype=float) * np.ones_like(np.asarray(r, dtype=float))

    def sigma(self, ell, r):
        f = self.sigma1 if ell == 1 else self.sigma2
        return np.asarray(f(r), dtype=float) * np.ones_like(np.asarray(r, dtype=float))

    def with_Lambda(self, Lambda):
        return CoefficientField(self.R, self.a, self.sigma1, self.sigma2, Lambda,
                                self.contrast_floor, self.dim)

    def disk_medium(self):
        """The constant-coefficient DiskMedium, if this field is one."""
        from .disk_spectrum import DiskMedium

        parts = [self.a, self.sigma1, self.sigma2]
        if not all(isinstance(p, RadialProfile) and p.is_constant for p in parts):
            raise ValueError("field does not have constant isotropic coefficients")
        a0, s1, s2 = (p.coeffs[0][0] for p in parts)
        return DiskMedium(self.R, s1, s2, a0)

    def to_json(self):
        def enc(p):
            if isinstance(p, np.ndarray):
                return p.tolist()
            if isinstance(p, RadialProfile):
                return p.to_json()
            raise ValueError("callable coefficients cannot be serialised")

        a = "identity" if isinstance(self.a, RadialProfile) and self.a.to_json() == 1.0 else enc(self.a)
        return {"R": self.R, "a": a, "sigma1": enc(self.sigma1), "sigma2": enc(self.sigma2),
                "Lambda": self.Lambda, "contrast_floor": self.contrast_floor}


def field_from_json(data) -> CoefficientField:
    a = data.get("a", "identity")
    if isinstance(a, dict):
        a = RadialProfile.from_json(a)
    return CoefficientField(
        R=float(data.get("R", 1.0)),
        a=a,
        sigma1=RadialProfile.from_json(data.get("sigma1", 1.0)),
        sigma2=RadialProfile.from_json(data.get("sigma2", 4.0)),
        Lambda=float(data.get("Lambda", 4.0)),
        contrast_floor=data.get("contrast_floor"),
    )


def load_profile(path) -> CoefficientField:
    path = Path(path)
    if not path.is_file():
        raise ProfileNotFound(f"profile not found: {path}")
    with path.open() as fh:
        return field_from_json(json.load(fh))


PRESET_SIGMA14 = {"R": 1.0, "a": "identity", "sigma1": 1.0, "sigma2": 4.0, "Lambda": 4.0}


# ---------------------------------------------------------------------------
# validation


@dataclass
class HypothesisCheck:
    name: str
    passed: bool | None
    worst_r: float | None = None
    worst_value: float | None = None
    detail: str = ""


@dataclass
class ValidationReport:
    checks: list = field(default_factory=list)

    @property
    def passed(self):
        return all(c.passed is not False for c in self.checks)

    def __getitem__(self, name):
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def failures(self):
        return [c for c in self.checks if c.passed is False]


def validate(fld: CoefficientField, samples: int = 512, raise_on_failure: bool = True) -> ValidationReport:
    """Check the structural hypotheses on ``samples`` radii in [0, R]."""
    if samples < 2:
        raise ValueError("samples must be >= 2")
    r = np.linspace(0.0, fld.R, samples)
    lam_inv = 1.0 / fld.Lambda
    rep = ValidationReport()

    A = fld.A(r)
    asym = np.abs(A - np.swapaxes(A, -1, -2)).max(axis=(-1, -2))
    scale = np.abs(A).max(axis=(-1, -2))
    rel = asym / np.where(scale > 0, scale, 1.0)
    i = int(np.argmax(rel))
    rep.checks.append(HypothesisCheck("symmetry", bool(rel[i] <= 1e-14), float(r[i]), float(rel[i]),
                                      "relative asymmetry of A"))

    ev = np.linalg.eigvalsh(0.5 * (A + np.swapaxes(A, -1, -2)))
    lo, hi = ev[:, 0], ev[:, -1]
    margin = np.minimum(lo - lam_inv, fld.Lambda - hi)
    i = int(np.argmin(margin))
    rep.checks.append(HypothesisCheck(
        "ellipticity", bool(margin[i] >= 0), float(r[i]), float(lo[i] if lo[i] - lam_inv < fld.Lambda - hi[i] else hi[i]),
        f"eigenvalues of A must lie in [{lam_inv:g}, {fld.Lambda:g}]"))

    for ell in (1, 2):
        s = fld.sigma(ell, r)
        margin = np.minimum(s - lam_inv, fld.Lambda - s)
        i = int(np.argmin(margin))
        rep.checks.append(HypothesisCheck(
            f"sigma{ell}_bounds", bool(margin[i] >= 0), float(r[i]), float(s[i]),
            f"sigma{ell} must lie in [{lam_inv:g}, {fld.Lambda:g}]"))

    gap = abs(float(fld.sigma(1, fld.R)) - float(fld.sigma(2, fld.R)))
    rep.checks.append(HypothesisCheck("boundary_contrast", gap >= fld.contrast_floor, fld.R, gap,
                                      f"|sigma1(R) - sigma2(R)| must be >= {fld.contrast_floor:g}"))
    rep.checks.append(HypothesisCheck("shared_principal_part", True, None, None,
                                      "both equations use the single field A"))

    # smoothness cannot be certified from samples; record the largest
    # second difference of each coefficient as a diagnostic only
    h = r[1] - r[0]
    curv = 0.0
    for g in (lambda x: fld.A(x)[..., 0, 0], lambda x: fld.sigma(1, x), lambda x: fld.sigma(2, x)):
        v = g(r)
        if v.size >= 3:
            curv = max(curv, float(np.abs(np.diff(v, 2)).max() / h ** 2))
    rep.checks.append(HypothesisCheck("smoothness", None, None, curv,
                                      "declared; max second difference reported"))

    if raise_on_failure:
        errors = {"symmetry": NonSymmetric, "ellipticity": EllipticityViolation,
                  "sigma1_bounds": EllipticityViolation, "sigma2_bounds": EllipticityViolation,
                  "boundary_contrast": ContrastViolation}
        for c in rep.failures():
            raise errors[c.name](f"{c.name} violated ({c.detail}); worst value {c.worst_value:.6g} "
                                 f"at r = {c.worst_r:.6g}", rep)
    return rep


def wedge_membership(lam: complex, gamma: float) -> bool:
    """True iff |Im λ| ≥ γ|λ|."""
    if not 0 < gamma < 1:
        raise ValueError("gamma must lie in (0, 1)")
    lam = complex(lam)
    if lam == 0:
        raise ZeroLambda("wedge membership is undefined at lambda = 0")
    return abs(lam.imag) >= gamma * abs(lam)
