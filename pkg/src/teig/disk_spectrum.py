"""Transmission spectrum of a disk with constant isotropic coefficients.

Separating variables, mode m of the transmission problem on the disk of
radius R (A = a0·I, constant Σ₁ ≠ Σ₂) has an eigenvalue λ exactly when

    D_m(λ) = w₁ j_m(w₂) j_{m+1}(w₁) − w₂ j_m(w₁) j_{m+1}(w₂),
    w_ℓ = −λ Σ_ℓ R² / a0,

vanishes, with j_m the entire Bessel normalisation from ``specfun``.
D_m is entire in λ, so zeros are counted with the argument principle and
located by Newton's method inside isolating sectors.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import contour
from .errors import EmptySpectrum
from .specfun import ScaledComplex, entire_j_block


@dataclass(frozen=True)
class DiskMedium:
    R: float = 1.0
    sigma1: float = 1.0
    sigma2: float = 4.0
    a0: float = 1.0

    def __post_init__(self):
        for name in ("R", "sigma1", "sigma2", "a0"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.sigma1 == self.sigma2:
            raise ValueError("sigma1 and sigma2 must differ on the boundary")

    @property
    def kappa(self):
        s = self.R ** 2 / self.a0
        return -self.sigma1 * s, -self.sigma2 * s

    def as_dict(self):
        return {"R": self.R, "sigma1": self.sigma1, "sigma2": self.sigma2, "a0": self.a0}


def _det_terms(medium, modes, lam, derivative):
    modes = np.asarray(modes, dtype=np.int64)
    lam = np.asarray(lam, dtype=complex)
    modes, lam = np.broadcast_arrays(modes, lam)
    k1, k2 = medium.kappa
    w1, w2 = k1 * lam, k2 * lam
    count = 3 if derivative else 2
    j = entire_j_block(np.concatenate([modes.ravel(), modes.ravel()]),
                       np.concatenate([w1.ravel(), w2.ravel()]), count)
    n = modes.size
    first = [x[:n] for x in j]
    second = [x[n:] for x in j]
    return w1.ravel(), w2.ravel(), first, second, modes.shape


def char_det_block(medium, modes, lam, derivative=False):
    """D_m(λ) (and dD_m/dλ) over broadcast arrays of modes and λ."""
    w1, w2, (a1, b1, *c1), (a2, b2, *c2), shape = _det_terms(medium, modes, lam, derivative)
    t1 = a2 * b1 * w1
    t2 = a1 * b2 * w2
    d = t1 - t2
    d = ScaledComplex._wrap(d.mantissa.reshape(shape), d.exponent.reshape(shape))
    if not derivative:
        return d
    k1, k2 = medium.kappa
    # j_m' = -j_{m+1}/2 with respect to w
    da1, db1 = b1 * (-0.5 * k1), c1[0] * (-0.5 * k1)
    da2, db2 = b2 * (-0.5 * k2), c2[0] * (-0.5 * k2)
    dd = (a2 * b1 * k1 + da2 * b1 * w1 + a2 * db1 * w1
          - a1 * b2 * k2 - da1 * b2 * w2 - a1 * db2 * w2)
    dd = ScaledComplex._wrap(dd.mantissa.reshape(shape), dd.exponent.reshape(shape))
    return d, dd


def char_det(medium: DiskMedium, mode: int, lam) -> ScaledComplex:
    """Characteristic function D_mode(λ) as a ScaledComplex."""
    if mode < 0:
        raise ValueError("mode must be nonnegative")
    return char_det_block(medium, mode, lam)


def _hook_evaluators(func, dfunc):
    def as_scaled(v):
        return v if isinstance(v, ScaledComplex) else ScaledComplex(v)

    def evaluate(keys, lam):
        return as_scaled(func(lam))

    def evaluate_d(keys, lam):
        if dfunc is not None:
            return as_scaled(func(lam)), as_scaled(dfunc(lam))
        h = 1e-6 * np.maximum(1.0, np.abs(lam))
        fd = (np.asarray(func(lam + h), complex) - np.asarray(func(lam - h), complex)) / (2 * h)
        return as_scaled(func(lam)), as_scaled(fd)

    return evaluate, evaluate_d


def _evaluators(medium):
    def evaluate(keys, lam):
        return char_det_block(medium, keys, lam)

    def evaluate_d(keys, lam):
        return char_det_block(medium, keys, lam, derivative=True)

    return evaluate, evaluate_d


def _check_annulus(annulus):
    t0, t1 = map(float, annulus)
    if not 0 < t0 < t1:
        raise ValueError("annulus must satisfy 0 < t0 < t1")
    return t0, t1


def count_zeros(medium, mode, annulus, func=None):
    """Number of zeros of D_mode (with order) in t0 < |λ| <= t1.

    ``func`` replaces D_mode by any entire function of λ (vectorised);
    ``medium`` and ``mode`` are then ignored.
    """
    t0, t1 = _check_annulus(annulus)
    evd = _hook_evaluators(func, None)[1] if func is not None else _evaluators(medium)[1]
    return contour.count_annulus([mode], t0, t1, evd)[mode].count


@dataclass
class LocateReport:
    count: int
    annulus: tuple
    nudges: int
    fallbacks: list = field(default_factory=list)


def locate_zeros(medium, mode, annulus, func=None, dfunc=None, report=None):
    """Zeros of D_mode in t0 < |λ| <= t1 as a list of (λ, order).

    With ``func`` (and optionally its derivative ``dfunc``) any entire
    function can be searched instead.  Pass a list as ``report`` to
    receive a LocateReport.
    """
    t0, t1 = _check_annulus(annulus)
    if func is not None:
        ev, evd = _hook_evaluators(func, dfunc)
    else:
        ev, evd = _evaluators(medium)
    res = contour.locate_annulus([mode], t0, t1, evd)[mode]
    if report is not None:
        report.append(LocateReport(res.count, (res.t0, res.t1), res.nudges, res.fallbacks))
    return res.zeros


# ---------------------------------------------------------------------------
# spectrum


@dataclass(frozen=True)
class SpectrumEntry:
    lam: complex
    mult: int
    mode: int


@dataclass
class Spectrum:
    entries: list
    lambda_floor: float
    medium: DiskMedium | None = None
    t_max: float | None = None
    mode_counts: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.entries)

    def lambdas(self):
        return np.array([e.lam for e in self.entries], dtype=complex)

    def mults(self):
        return np.array([e.mult for e in self.entries], dtype=np.int64)

    def counting(self, t):
        """N(t): multiplicity-weighted number of entries with |λ| <= t."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        mags = np.abs(self.lambdas())
        order = np.argsort(mags)
        cum = np.concatenate([[0], np.cumsum(self.mults()[order])])
        return cum[np.searchsorted(mags[order], t, side="right")]

    def to_dict(self):
        return {
            "medium": self.medium.as_dict() if self.medium else {},
            "entries": [{"re": e.lam.real, "im": e.lam.imag, "mult": e.mult, "mode": e.mode}
                        for e in self.entries],
            "lambda_floor": self.lambda_floor,
        }

    @classmethod
    def from_dict(cls, data):
        med = DiskMedium(**data["medium"]) if data.get("medium") else None
        entries = [SpectrumEntry(complex(e["re"], e["im"]), int(e["mult"]), int(e["mode"]))
                   for e in data["entries"]]
        return cls(entries, float(data["lambda_floor"]), med)


@dataclass
class CountingCurve:
    t_values: list
    counts: list
    weyl_constant: float
    fit_report: dict = field(default_factory=dict)

    def __post_init__(self):
        if any(b <= a for a, b in zip(self.t_values, self.t_values[1:])):
            raise ValueError("t_values must be increasing")
        if any(b < a for a, b in zip(self.counts, self.counts[1:])):
            raise ValueError("counts must be nondecreasing")


def worker_count():
    env = os.environ.get("TEIG_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def _chunks(seq, n):
    n = max(1, n)
    size = math.ceil(len(seq) / n) if seq else 0
    return [seq[i:i + size] for i in range(0, len(seq), size)] if size else []


def _map(fn, chunks, threads):
    if threads <= 1 or len(chunks) <= 1:
        return [fn(c) for c in chunks]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, chunks))


def mode_counts(medium, t0, t1, threads=None, batch=24):
    """Per-mode zero counts in t0 < |λ| <= t1 for modes 0..M, where
    M is followed by three consecutive modes without zeros."""
    evd = _evaluators(medium)[1]
    threads = threads or worker_count()
    counts = {}
    m = 0
    while True:
        block = list(range(m, m + batch))
        parts = _map(lambda ks: contour.count_annulus(ks, t0, t1, evd), _chunks(block, threads), threads)
        for part in parts:
            for k, res in part.items():
                counts[k] = res.count
        m += batch
        top = max((k for k, c in counts.items() if c > 0), default=-1)
        if all(counts.get(top + i, None) == 0 for i in (1, 2, 3)):
            return {k: c for k, c in sorted(counts.items()) if k <= top + 3}


def assemble_spectrum(medium, t_max, lambda_floor=1.0, threads=None, chunk_modes=16):
    """All eigenvalues with lambda_floor < |λ| <= t_max.

    Modes are cut off once three consecutive modes have no zeros in the
    annulus; multiplicity is the zero order times 2 for modes m >= 1
    (the e^{±imθ} pair).
    """
    if not 0 < lambda_floor < t_max:
        raise ValueError("need 0 < lambda_floor < t_max")
    threads = threads or worker_count()
    counts = mode_counts(medium, lambda_floor, t_max, threads)
    live = [m for m, c in counts.items() if c > 0]
    evd = _evaluators(medium)[1]
    chunks = [live[i:i + chunk_modes] for i in range(0, len(live), chunk_modes)]
    parts = _map(lambda ks: contour.locate_annulus(ks, lambda_floor, t_max, evd), chunks, threads)
    entries = []
    for part in parts:
        for m, res in part.items():
            for lam, order in res.zeros:
                if lambda_floor < abs(lam) <= t_max:
                    entries.append(SpectrumEntry(lam, order * (1 if m == 0 else 2), m))
    entries.sort(key=lambda e: (e.mode, e.lam.real, e.lam.imag))
    return Spectrum(entries, float(lambda_floor), medium, float(t_max), counts)


def wedge_report(spec, shells):
    """Max |Im λ|/|λ| over geometric shells [t, 2t) ending at the top entry.

    Returns a list of ((t_lo, t_hi), max_ratio) ordered by increasing t;
    empty shells report 0.
    """
    lams = spec.lambdas() if isinstance(spec, Spectrum) else np.asarray(spec, dtype=complex)
    if lams.size == 0:
        raise EmptySpectrum("wedge report needs a nonempty spectrum")
    if shells < 1:
        raise ValueError("shells must be positive")
    mags = np.abs(lams)
    ratio = np.abs(lams.imag) / mags
    top = mags.max()
    hi_edge = 2.0 ** math.floor(math.log2(top)) * 2.0
    out = []
    for j in range(shells, 0, -1):
        lo, hi = hi_edge / 2.0 ** j, hi_edge / 2.0 ** (j - 1)
        sel = (mags >= lo) & (mags < hi)
        out.append(((lo, hi), float(ratio[sel].max()) if sel.any() else 0.0))
    return out
