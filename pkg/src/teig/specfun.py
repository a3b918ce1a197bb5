"""Overflow-safe complex Bessel functions of integer order.

Values are carried as ``mantissa * 2**exponent`` so that J_m(z) can be
formed along contours where |Im z| runs into the hundreds.  Two entry
points matter:

* ``bessel_j(m, z)``   -- J_m(z)
* ``entire_j(m, w)``   -- the entire normalisation j_m(w) with
  J_m(z) = z**m * j_m(z**2), together with j_{m+1}(w)

Both accept arrays; the batched workhorse used by the disk solver is
``entire_j_block``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import AccuracyLoss

ACCURACY_LIMIT = 1e-9

_LN2_HI = 6.93147180369123816490e-01
_LN2_LO = 1.90821492927058770002e-10
_SHIFT_CLIP = 4000
_RESCALE_BITS = 300
_RESCALE_AT = 2.0 ** _RESCALE_BITS


def _ldexp(m, k):
    return np.ldexp(m.real, k) + 1j * np.ldexp(m.imag, k)


def _normalize(m, e):
    a = np.abs(m)
    if not np.all(np.isfinite(a)):
        raise FloatingPointError("non-finite mantissa in ScaledComplex")
    _, ex = np.frexp(a)
    zero = a == 0
    shift = np.where(zero, 0, ex.astype(np.int64) - 1)
    m = _ldexp(m, -shift)
    e = np.where(zero, 0, e + shift)
    return m, e


class ScaledComplex:
    """Complex value(s) stored as ``mantissa * 2**exponent``.

    The mantissa satisfies 1 <= |mantissa| < 2, except for zero which is
    stored as (0, 0).  Instances are immutable and may hold arrays.
    """

    __slots__ = ("mantissa", "exponent")

    def __init__(self, mantissa, exponent=0):
        m = np.asarray(mantissa, dtype=complex)
        e = np.asarray(exponent, dtype=np.int64)
        m, e = np.broadcast_arrays(m, e)
        self.mantissa, self.exponent = _normalize(m, e)

    @classmethod
    def _wrap(cls, m, e):
        obj = object.__new__(cls)
        obj.mantissa = m
        obj.exponent = e
        return obj

    @classmethod
    def exp(cls, z):
        """exp(z) without overflow."""
        z = np.asarray(z, dtype=complex)
        k = np.rint(z.real / _LN2_HI)
        r = (z.real - k * _LN2_HI) - k * _LN2_LO
        return cls(np.exp(r + 1j * z.imag), k.astype(np.int64))

    @staticmethod
    def where(cond, a, b):
        a, b = _coerce(a), _coerce(b)
        return ScaledComplex._wrap(np.where(cond, a.mantissa, b.mantissa),
                                   np.where(cond, a.exponent, b.exponent))

    @property
    def shape(self):
        return self.mantissa.shape

    def __len__(self):
        return len(self.mantissa)

    def __getitem__(self, idx):
        return ScaledComplex._wrap(self.mantissa[idx], self.exponent[idx])

    def __repr__(self):
        return f"ScaledComplex({self.mantissa!r}, {self.exponent!r})"

    def __mul__(self, other):
        other = _coerce(other)
        return ScaledComplex(self.mantissa * other.mantissa,
                             self.exponent + other.exponent)

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = _coerce(other)
        if np.any(other.mantissa == 0):
            raise ZeroDivisionError("division by a zero ScaledComplex")
        return ScaledComplex(self.mantissa / other.mantissa,
                             self.exponent - other.exponent)

    def __rtruediv__(self, other):
        return _coerce(other) / self

    def __add__(self, other):
        other = _coerce(other)
        ma, mb = self.mantissa, other.mantissa
        ea = np.where(ma == 0, other.exponent, self.exponent)
        eb = np.where(mb == 0, ea, other.exponent)
        top = np.maximum(ea, eb)
        m = (_ldexp(ma, np.maximum(ea - top, -_SHIFT_CLIP))
             + _ldexp(mb, np.maximum(eb - top, -_SHIFT_CLIP)))
        return ScaledComplex(m, top)

    __radd__ = __add__

    def __neg__(self):
        return ScaledComplex._wrap(-self.mantissa, self.exponent)

    def __sub__(self, other):
        return self + (-_coerce(other))

    def __rsub__(self, other):
        return _coerce(other) + (-self)

    def __pow__(self, n):
        """Integer power by repeated squaring; ``n`` may be an array."""
        n = np.asarray(n, dtype=np.int64)
        if np.any(n < 0):
            return 1.0 / (self ** (-n))
        result = ScaledComplex(np.ones(np.broadcast(n, self.mantissa).shape))
        base = self
        while np.any(n > 0):
            odd = (n & 1) == 1
            result = ScaledComplex.where(odd, result * base, result)
            n = n >> 1
            if np.any(n > 0):
                base = base * base
        return result

    def conj(self):
        return ScaledComplex._wrap(np.conj(self.mantissa), self.exponent)

    def abs(self):
        return ScaledComplex._wrap(np.abs(self.mantissa).astype(complex), self.exponent)

    def log2abs(self):
        """log2 |value|; -inf for zero."""
        a = np.abs(self.mantissa)
        with np.errstate(divide="ignore"):
            return np.where(a == 0, -np.inf, np.log2(np.where(a == 0, 1.0, a)) + self.exponent)

    def angle(self):
        return np.angle(self.mantissa)

    def to_complex(self):
        """Plain complex value; overflows to inf and underflows to 0."""
        with np.errstate(over="ignore", under="ignore"):
            out = _ldexp(self.mantissa, np.clip(self.exponent, -_SHIFT_CLIP, _SHIFT_CLIP))
        return out[()] if out.ndim == 0 else out

    def __complex__(self):
        return complex(self.to_complex())


def _coerce(x):
    return x if isinstance(x, ScaledComplex) else ScaledComplex(x)


def _factorial_table(nmax):
    mant = np.empty(nmax + 1)
    expo = np.empty(nmax + 1, dtype=np.int64)
    f = 1
    for n in range(nmax + 1):
        if n:
            f *= n
        b = f.bit_length() - 1
        mant[n] = f / (1 << b)
        expo[n] = b
    return mant, expo


_FACT_MAX = 2048
_FACT_MANT, _FACT_EXP = _factorial_table(_FACT_MAX)


def factorial_scaled(n):
    """n! as a ScaledComplex (correctly rounded mantissa)."""
    n = np.asarray(n, dtype=np.int64)
    return ScaledComplex._wrap(_FACT_MANT[n].astype(complex), _FACT_EXP[n])


@dataclass(frozen=True)
class EntireBesselPair:
    order: int
    value: ScaledComplex
    next: ScaledComplex


# ---------------------------------------------------------------------------
# evaluation paths


def _series_entire(orders, w, count):
    """j_{orders+q}(w) for q < count by the power series."""
    x = -0.25 * w
    out = []
    for q in range(count):
        n = orders + q
        term = np.ones_like(x)
        total = np.ones_like(x)
        for k in range(1, 400):
            term = term * x / (k * (n + k))
            total = total + term
            if np.all(np.abs(term) <= 1e-18 * np.abs(total)):
                break
        else:
            raise AccuracyLoss("power series failed to converge")
        out.append(ScaledComplex(total / _FACT_MANT[n], -n - _FACT_EXP[n]))
    return out


def _start_order(orders, z, count):
    az = np.abs(z)
    base = np.maximum(orders + count, az)
    return np.ceil(base + 9.0 * np.cbrt(np.maximum(az, 1.0)) + 24).astype(np.int64)


def _miller(orders, z, count, start):
    """J_{orders+q}(z), q < count, by normalised backward recurrence.

    The recurrence for each point starts at order ``start`` with (0, 1)
    and is normalised at the end with the Jacobi-Anger sum
    exp(-iz) = J_0 + 2 sum (-i)^n J_n (or its mirror for Im z < 0).
    """
    npts = z.size
    perm = np.argsort(-start, kind="stable")
    z = z[perm]
    start = start[perm]
    orders = orders[perm]

    upper = z.imag >= 0
    two_over_z = 2.0 / z
    top = int(start[0])
    step_rot = np.where(upper, 1j, -1j)
    sp = np.zeros(npts, complex)

    c = np.zeros(npts, complex)
    p = np.zeros(npts, complex)
    s = np.zeros(npts, complex)
    e = np.zeros(npts, np.int64)
    cap_m = np.zeros((count, npts), complex)
    cap_e = np.zeros((count, npts), np.int64)

    # number of active points at each order: start is sorted descending
    active_at = np.searchsorted(-start, -np.arange(top + 1), side="right")

    cap_buckets = []
    for q in range(count):
        tgt = orders + q
        srt = np.argsort(tgt, kind="stable")
        vals, first = np.unique(tgt[srt], return_index=True)
        groups = np.split(srt, first[1:])
        cap_buckets.append(dict(zip(vals.tolist(), groups)))

    k_prev = 0
    for n in range(top, -1, -1):
        k = int(active_at[n])
        if k > k_prev:
            c[k_prev:k] = 1.0
            sp[k_prev:k] = np.where(upper[k_prev:k], (-1j) ** (n % 4), 1j ** (n % 4))
            k_prev = k
        for q in range(count):
            idx = cap_buckets[q].get(n)
            if idx is not None:
                cap_m[q, idx] = c[idx]
                cap_e[q, idx] = e[idx]
        cv = c[:k]
        if n == 0:
            s[:k] += cv
            break
        s[:k] += 2.0 * sp[:k] * cv
        new = (n * two_over_z[:k]) * cv - p[:k]
        p[:k] = cv
        c[:k] = new
        sp[:k] *= step_rot[:k]
        if n % 8 == 0:
            big = np.abs(new) > _RESCALE_AT
            if big.any():
                j = np.flatnonzero(big)
                c[j] = _ldexp(c[j], -_RESCALE_BITS)
                p[j] = _ldexp(p[j], -_RESCALE_BITS)
                s[j] = _ldexp(s[j], -_RESCALE_BITS)
                e[j] += _RESCALE_BITS

    norm = ScaledComplex.exp(np.where(upper, -1j * z, 1j * z)) / ScaledComplex(s, e)
    inv = np.empty_like(perm)
    inv[perm] = np.arange(npts)
    return [(ScaledComplex(cap_m[q], cap_e[q]) * norm)[inv] for q in range(count)]


def _miller_checked(orders, z, count):
    """Backward recurrence at two truncation levels; returns values and error."""
    n1 = _start_order(orders, z, count)
    n2 = n1 + 16 + (n1 // 8)
    both = _miller(np.concatenate([orders, orders]), np.concatenate([z, z]),
                   count, np.concatenate([n1, n2]))
    npts = z.size
    lo = [b[:npts] for b in both]
    hi = [b[npts:] for b in both]
    ref = np.max([h.log2abs() for h in hi], axis=0)
    diff = np.max([(a - b).log2abs() for a, b in zip(lo, hi)], axis=0)
    with np.errstate(invalid="ignore"):
        err = np.exp2(diff - ref)
    err = np.where(np.isfinite(ref), err, 0.0)
    return hi, err


def _as_arrays(order, arg):
    order = np.asarray(order, dtype=np.int64)
    arg = np.asarray(arg, dtype=complex)
    order, arg = np.broadcast_arrays(order, arg)
    if np.any(order < 0):
        raise ValueError("order must be nonnegative")
    return order.ravel().copy(), arg.ravel().copy(), order.shape


def _raise_if_inaccurate(err):
    worst = float(np.max(err)) if err.size else 0.0
    if worst > ACCURACY_LIMIT:
        raise AccuracyLoss(f"estimated relative error {worst:.2e} exceeds {ACCURACY_LIMIT:g}")


def entire_j_block(orders, w, count=2, return_error=False):
    """j_{m+q}(w) for q = 0..count-1 over arrays of (m, w).

    Returns a list of ``count`` ScaledComplex arrays shaped like the
    broadcast of ``orders`` and ``w``.
    """
    orders, w, shape = _as_arrays(orders, w)
    npts = w.size
    series = np.abs(w) <= 4.0 * (orders + 1)
    out_m = np.zeros((count, npts), complex)
    out_e = np.zeros((count, npts), np.int64)
    err = np.zeros(npts)

    si = np.flatnonzero(series)
    if si.size:
        vals = _series_entire(orders[si], w[si], count)
        for q, v in enumerate(vals):
            out_m[q, si], out_e[q, si] = v.mantissa, v.exponent

    ri = np.flatnonzero(~series)
    if ri.size:
        z = np.sqrt(w[ri])
        vals, err[ri] = _miller_checked(orders[ri], z, count)
        zs = ScaledComplex(z)
        zpow = zs ** orders[ri]
        for q, v in enumerate(vals):
            jv = v / zpow
            out_m[q, ri], out_e[q, ri] = jv.mantissa, jv.exponent
            zpow = zpow * zs

    _raise_if_inaccurate(err)
    res = [ScaledComplex._wrap(out_m[q].reshape(shape), out_e[q].reshape(shape))
           for q in range(count)]
    if return_error:
        return res, err.reshape(shape)
    return res


def bessel_j_block(orders, z, count=1):
    """J_{m+q}(z) for q = 0..count-1 over arrays of (m, z)."""
    orders, z, shape = _as_arrays(orders, z)
    npts = z.size
    w = z * z
    series = np.abs(w) <= 4.0 * (orders + 1)
    out_m = np.zeros((count, npts), complex)
    out_e = np.zeros((count, npts), np.int64)
    err = np.zeros(npts)

    si = np.flatnonzero(series)
    if si.size:
        vals = _series_entire(orders[si], w[si], count)
        zs = ScaledComplex(z[si])
        zpow = zs ** orders[si]
        for q, v in enumerate(vals):
            jv = v * zpow
            out_m[q, si], out_e[q, si] = jv.mantissa, jv.exponent
            zpow = zpow * zs

    ri = np.flatnonzero(~series)
    if ri.size:
        vals, err[ri] = _miller_checked(orders[ri], z[ri], max(count, 2))
        for q in range(count):
            out_m[q, ri], out_e[q, ri] = vals[q].mantissa, vals[q].exponent

    _raise_if_inaccurate(err)
    return [ScaledComplex._wrap(out_m[q].reshape(shape), out_e[q].reshape(shape))
            for q in range(count)]


def bessel_j(order, z):
    """J_order(z) as a ScaledComplex."""
    return bessel_j_block(order, z, 1)[0]


def entire_j(order, w):
    """(j_m(w), j_{m+1}(w)) with J_m(z) = z**m j_m(z**2)."""
    value, nxt = entire_j_block(order, w, 2)
    return EntireBesselPair(int(order), value, nxt)
