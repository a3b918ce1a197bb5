"""Argument-principle zero search on annular sectors.

A sector {r0 < |λ| < r1, p0 < arg λ < p1} is bounded by two arcs and two
rays.  Every edge carries its own adaptively refined samples of arg f,
so an edge shared by neighbouring sectors (or inherited by children
after a split) is never re-evaluated.  The number of zeros in a sector
is the summed phase increment of its edges divided by 2π.

Functions are supplied in batched form::

    evaluate_d(keys, lam) -> (ScaledComplex, ScaledComplex)   # f, f'

where ``keys`` labels independent functions (angular modes for the disk)
so that many searches share each vectorised evaluation.  The logarithmic
derivative f'/f is sampled alongside arg f: on every segment the
trapezoidal prediction of Δ log f must match the observed change, which
rules out phase aliasing (whole turns hidden between two samples).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ContourThroughZero, NonConvergence, PhaseTrackingUnstable

TWO_PI = 2.0 * math.pi
PHASE_STEP = 0.5 * math.pi
LOG_STEP = 4.0
PREDICT_TOL = 0.5
NEAR_ZERO = 1e-6
MAX_ROUNDS = 60
NUDGE = 2e-4
MAX_NUDGES = 5
SPLIT_FRACTIONS = (0.4629, 0.5371, 0.4113, 0.5887, 0.3719, 0.6281)
SECTOR_EDGES = tuple(-0.25 * math.pi + 0.5 * math.pi * j for j in range(5))


def _wrap(x):
    return (x + math.pi) % TWO_PI - math.pi


class Edge:
    """Arc (fixed radius) or ray (fixed angle) with sampled phase."""

    __slots__ = ("key", "kind", "fixed", "a", "b", "s", "phase", "logabs", "dlog",
                 "checked", "done", "near_zero")

    def __init__(self, key, kind, fixed, a, b):
        self.key = key
        self.kind = kind
        self.fixed = fixed
        self.a = a
        self.b = b
        self.s = None
        self.phase = None
        self.logabs = None
        self.dlog = None
        self.checked = None
        self.done = False
        self.near_zero = False

    def at(self, s):
        x = self.a + np.asarray(s) * (self.b - self.a)
        if self.kind == "arc":
            return self.fixed * np.exp(1j * x)
        return x * np.exp(1j * self.fixed)

    def velocity(self, s):
        """dλ/ds along the edge."""
        lam = self.at(s)
        if self.kind == "arc":
            return 1j * lam * (self.b - self.a)
        return np.exp(1j * self.fixed) * (self.b - self.a) * np.ones_like(lam)

    @property
    def length(self):
        span = abs(self.b - self.a)
        return self.fixed * span if self.kind == "arc" else span

    @property
    def scale(self):
        return self.fixed if self.kind == "arc" else max(self.a, self.b)

    def increment(self):
        return float(np.sum(_wrap(np.diff(self.phase))))

    def moment(self):
        """Sum over segments of λ_mid · Δ log f, i.e. ∫ λ d(log f)."""
        lam = self.at(self.s)
        dlog = np.diff(self.logabs) + 1j * _wrap(np.diff(self.phase))
        return complex(np.sum(0.5 * (lam[1:] + lam[:-1]) * dlog))

    def insert(self, s, phase, logabs, dlog):
        s_all = np.concatenate([self.s, s])
        order = np.argsort(s_all, kind="stable")
        self.s = s_all[order]
        self.phase = np.concatenate([self.phase, phase])[order]
        self.logabs = np.concatenate([self.logabs, logabs])[order]
        self.dlog = np.concatenate([self.dlog, dlog])[order]

    def bad_segments(self):
        dphi = _wrap(np.diff(self.phase))
        dmag = np.diff(self.logabs)
        g = self.dlog * self.velocity(self.s)
        pred = 0.5 * (g[1:] + g[:-1]) * np.diff(self.s)
        return ((np.abs(dphi) >= PHASE_STEP) | (np.abs(dmag) > LOG_STEP)
                | (np.abs(pred.imag - dphi) > PREDICT_TOL)
                | (np.abs(pred.real - dmag) > PREDICT_TOL))

    def split(self, s_star):
        """Two sub-edges meeting at the (already sampled) parameter s_star."""
        k = int(np.searchsorted(self.s, s_star))
        if k >= len(self.s) or self.s[k] != s_star:
            raise ValueError("split point must be a sample")
        mid = self.a + s_star * (self.b - self.a)
        lo = Edge(self.key, self.kind, self.fixed, self.a, mid)
        hi = Edge(self.key, self.kind, self.fixed, mid, self.b)
        lo.s = self.s[: k + 1] / s_star
        lo.s[-1] = 1.0
        hi.s = (self.s[k:] - s_star) / (1.0 - s_star)
        hi.s[0] = 0.0
        lo.phase, lo.logabs, lo.dlog = self.phase[: k + 1], self.logabs[: k + 1], self.dlog[: k + 1]
        hi.phase, hi.logabs, hi.dlog = self.phase[k:], self.logabs[k:], self.dlog[k:]
        for e in (lo, hi):
            e.checked = e.increment()
        return lo, hi


def _sample(evaluate_d, requests):
    """Evaluate f and f'/f on [(edge, s_array), ...] in one batch."""
    if not requests:
        return []
    keys = np.concatenate([np.full(len(s), e.key, dtype=np.int64) for e, s in requests])
    lam = np.concatenate([e.at(s) for e, s in requests])
    val, der = evaluate_d(keys, lam)
    phase = np.angle(val.mantissa)
    logabs = val.log2abs() * math.log(2.0)
    zero = val.mantissa == 0
    with np.errstate(all="ignore"):
        ratio = der.mantissa / np.where(zero, 1.0, val.mantissa)
        dlog = np.where(zero, np.inf, ratio * np.exp2(np.clip(der.exponent - val.exponent, -2000, 2000)))
    out, i = [], 0
    for e, s in requests:
        j = slice(i, i + len(s))
        out.append((phase[j], logabs[j], dlog[j]))
        i += len(s)
    return out


def refine(edges, evaluate_d, initial=17):
    """Sample edges until consecutive phases differ by < π/2 and a full
    bisection pass leaves every increment unchanged.

    Edges that would need segments shorter than NEAR_ZERO * |λ| are
    marked ``near_zero`` and left unfinished.
    """
    fresh = [e for e in edges if e.s is None]
    reqs = [(e, np.linspace(0.0, 1.0, initial)) for e in fresh]
    for (e, s), (ph, la, dl) in zip(reqs, _sample(evaluate_d, reqs)):
        e.s, e.phase, e.logabs, e.dlog = s, ph, la, dl
    active = [e for e in edges if not e.done and not e.near_zero]
    for _ in range(MAX_ROUNDS):
        reqs = []
        still = []
        for e in active:
            if np.any(~np.isfinite(e.logabs)) or np.any(~np.isfinite(e.dlog)):
                e.near_zero = True
                continue
            bad = e.bad_segments()
            ds = np.diff(e.s)
            if bad.any():
                if np.any(ds[bad] * e.length < NEAR_ZERO * e.scale):
                    e.near_zero = True
                    continue
                reqs.append((e, 0.5 * (e.s[:-1] + e.s[1:])[bad]))
                still.append(e)
                continue
            inc = e.increment()
            if e.checked is not None and abs(inc - e.checked) < 1e-6:
                e.done = True
                continue
            e.checked = inc
            reqs.append((e, 0.5 * (e.s[:-1] + e.s[1:])))
            still.append(e)
        if not reqs:
            return
        for (e, s), (ph, la, dl) in zip(reqs, _sample(evaluate_d, reqs)):
            e.insert(s, ph, la, dl)
        active = still
    raise PhaseTrackingUnstable(f"phase tracking did not settle on {len(active)} edge(s)")


@dataclass
class Box:
    key: int
    r0: float
    r1: float
    p0: float
    p1: float
    inner: Edge
    outer: Edge
    left: Edge
    right: Edge
    tries: int = 0
    order: int = 0

    def count(self):
        w = (self.outer.increment() - self.inner.increment()
             - self.right.increment() + self.left.increment()) / TWO_PI
        n = int(round(w))
        if abs(w - n) > 0.05 or n < 0:
            raise PhaseTrackingUnstable(f"non-integer winding {w:.4f}")
        return n

    def estimate(self):
        """Single-zero location from the first argument-principle moment."""
        m = (self.outer.moment() - self.inner.moment()
             - self.right.moment() + self.left.moment())
        z = m / (2j * math.pi)
        return z if self.contains(z) else self.center

    @property
    def center(self):
        return 0.5 * (self.r0 + self.r1) * np.exp(0.5j * (self.p0 + self.p1))

    @property
    def diameter(self):
        return math.hypot(self.r1 - self.r0, self.r1 * (self.p1 - self.p0))

    def contains(self, lam):
        r, p = abs(lam), np.angle(lam)
        p = self.p0 + (p - self.p0) % TWO_PI
        return self.r0 <= r <= self.r1 and p <= self.p1


@dataclass
class KeyResult:
    key: int
    t0: float
    t1: float
    count: int
    zeros: list = field(default_factory=list)
    fallbacks: list = field(default_factory=list)
    nudges: int = 0


def _circle(key, r):
    return [Edge(key, "arc", r, SECTOR_EDGES[j], SECTOR_EDGES[j + 1]) for j in range(4)]


def _setup(keys, t0, t1, evaluate_d, with_rays):
    """Sample the bounding circles (and sector rays), nudging radii away
    from zeros.  Returns {key: (t0, t1, inner_arcs, outer_arcs, rays, nudges)}.
    """
    state = {}
    pending = {k: 0 for k in keys}
    while pending:
        built = {}
        for k, nudge in pending.items():
            a = t0 * (1.0 - NUDGE * nudge)
            b = t1 * (1.0 + NUDGE * nudge)
            inner, outer = _circle(k, a), _circle(k, b)
            rays = [Edge(k, "ray", SECTOR_EDGES[j] + 1e-3 * nudge, a, b) for j in range(4)] if with_rays else []
            if with_rays:
                for arcs in (inner, outer):
                    for j, e in enumerate(arcs):
                        e.a = SECTOR_EDGES[j] + 1e-3 * nudge
                        e.b = SECTOR_EDGES[j + 1] + 1e-3 * nudge
            built[k] = (a, b, inner, outer, rays, nudge)
        refine([e for v in built.values() for e in v[2] + v[3] + v[4]], evaluate_d)
        pending = {}
        for k, v in built.items():
            if any(e.near_zero for e in v[2] + v[3] + v[4]):
                if v[5] + 1 > MAX_NUDGES:
                    raise ContourThroughZero(f"key {k}: contour passes within {NEAR_ZERO:g}·t of a zero "
                                             f"after {MAX_NUDGES} nudges")
                pending[k] = v[5] + 1
            else:
                state[k] = v
    return state


def _annulus_count(inner, outer):
    w = (sum(e.increment() for e in outer) - sum(e.increment() for e in inner)) / TWO_PI
    n = int(round(w))
    if abs(w - n) > 0.05 or n < 0:
        raise PhaseTrackingUnstable(f"non-integer winding {w:.4f}")
    return n


def count_annulus(keys, t0, t1, evaluate_d):
    """Zeros (with order) in t0 < |λ| <= t1 per key, by the argument principle."""
    state = _setup(list(keys), t0, t1, evaluate_d, with_rays=False)
    return {k: KeyResult(k, v[0], v[1], _annulus_count(v[2], v[3]), nudges=v[5])
            for k, v in state.items()}


def _newton(boxes, evaluate_d, tol=1e-12, maxit=60):
    """Damped Newton from each box centre; returns (lam, converged, inside)."""
    keys = np.array([b.key for b in boxes], dtype=np.int64)
    lam = np.array([b.estimate() if b.order == 1 else b.center for b in boxes])
    home = lam.copy()
    cap = np.array([b.diameter for b in boxes])
    mult = np.array([max(1, b.order) for b in boxes], dtype=float)
    conv = np.zeros(len(boxes), bool)
    failed = np.zeros(len(boxes), bool)
    for _ in range(maxit):
        live = np.flatnonzero(~conv)
        if live.size == 0:
            break
        f, df = evaluate_d(keys[live], lam[live])
        zero = f.mantissa == 0
        with np.errstate(all="ignore"):
            ok = df.mantissa != 0
            step = np.zeros(live.size, complex)
            if ok.any():
                step[ok] = (f[ok] / df[ok]).to_complex() * mult[live][ok]
        step = np.where(zero, 0.0, step)
        mag = np.abs(step)
        big = mag > cap[live]
        step[big] *= cap[live][big] / mag[big]
        lam[live] = lam[live] - step
        done = (np.abs(step) <= tol * np.abs(lam[live])) | zero
        conv[live[done]] = True
        lost = np.abs(lam[live] - home[live]) > 2.0 * cap[live]
        failed[live[lost & ~done]] = True
        conv[live[lost]] = True
    inside = np.array([b.contains(z) for b, z in zip(boxes, lam)])
    return lam, conv & ~failed, inside


def _split(box, frac, radial):
    k = box.key
    if radial:
        rs = box.r0 + frac * (box.r1 - box.r0)
        new = Edge(k, "arc", rs, box.p0, box.p1)
        cuts = [(box.left, frac), (box.right, frac)]
    else:
        ps = box.p0 + frac * (box.p1 - box.p0)
        new = Edge(k, "ray", ps, box.r0, box.r1)
        cuts = [(box.inner, frac), (box.outer, frac)]
    return new, cuts


def _children(box, new, halves, radial):
    (a_lo, a_hi), (b_lo, b_hi) = halves
    if radial:
        rs = new.fixed
        lo = Box(box.key, box.r0, rs, box.p0, box.p1, box.inner, new, a_lo, b_lo)
        hi = Box(box.key, rs, box.r1, box.p0, box.p1, new, box.outer, a_hi, b_hi)
    else:
        ps = new.fixed
        lo = Box(box.key, box.r0, box.r1, box.p0, ps, a_lo, b_lo, box.left, new)
        hi = Box(box.key, box.r0, box.r1, ps, box.p1, a_hi, b_hi, new, box.right)
    return lo, hi


def locate_annulus(keys, t0, t1, evaluate_d, max_levels=200):
    """Locate all zeros in t0 < |λ| <= t1 per key.

    Sectors are split until each holds one zero that Newton's method
    finds inside it; clusters smaller than 1e-10·|λ| are reported with
    their total order.
    """
    state = _setup(list(keys), t0, t1, evaluate_d, with_rays=True)
    results = {}
    boxes = []
    for k, (a, b, inner, outer, rays, nudge) in state.items():
        results[k] = KeyResult(k, a, b, _annulus_count(inner, outer), nudges=nudge)
        off = 1e-3 * nudge
        for j in range(4):
            boxes.append(Box(k, a, b, SECTOR_EDGES[j] + off, SECTOR_EDGES[j + 1] + off,
                             inner[j], outer[j], rays[j], rays[(j + 1) % 4]))

    for _ in range(max_levels):
        work = []
        for bx in boxes:
            n = bx.count()
            if n > 0:
                bx.order = n
                work.append(bx)
        if not work:
            break
        # Newton on single-zero boxes and on tiny clusters
        tiny = [bx for bx in work if bx.diameter < 1e-10 * bx.r1]
        single = [bx for bx in work if bx.order == 1 and bx not in tiny]
        trial = single + tiny
        solved = set()
        if trial:
            lam, conv, inside = _newton(trial, evaluate_d)
            for bx, z, c, ins in zip(trial, lam, conv, inside):
                if c and ins:
                    results[bx.key].zeros.append((complex(z), bx.order))
                    solved.add(id(bx))
                elif bx.diameter < 1e-10 * bx.r1:
                    results[bx.key].zeros.append((complex(bx.center), bx.order))
                    results[bx.key].fallbacks.append(complex(bx.center))
                    solved.add(id(bx))
        todo = [bx for bx in work if id(bx) not in solved]
        boxes = _split_level(todo, evaluate_d)
    else:
        raise NonConvergence("zero localisation exceeded the subdivision budget")

    for res in results.values():
        res.zeros.sort(key=lambda z: (z[0].real, z[0].imag))
        found = sum(o for _, o in res.zeros)
        if found != res.count:
            raise PhaseTrackingUnstable(
                f"key {res.key}: located order {found} differs from winding count {res.count}")
    return results


def _split_level(todo, evaluate_d):
    """Split every box once; retries other fractions when the new edge
    passes too close to a zero."""
    out = []
    subs = []
    pending = todo
    while pending:
        plans = []
        for bx in pending:
            if bx.tries >= len(SPLIT_FRACTIONS):
                raise ContourThroughZero("cannot place a subdivision edge away from zeros")
            frac = SPLIT_FRACTIONS[bx.tries]
            radial = (bx.r1 - bx.r0) >= 0.5 * (bx.r0 + bx.r1) * (bx.p1 - bx.p0)
            new, cuts = _split(bx, frac, radial)
            plans.append((bx, new, cuts, radial))
        # sample cut points on existing edges
        reqs = []
        for _, _, cuts, _ in plans:
            for e, frac in cuts:
                reqs.append((e, np.array([frac])))
        for (e, s), (ph, la, dl) in zip(reqs, _sample(evaluate_d, reqs)):
            if not np.any(e.s == s[0]):
                e.insert(s, ph, la, dl)
        refine([p[1] for p in plans], evaluate_d)
        pending = []
        for bx, new, cuts, radial in plans:
            if new.near_zero or any(not np.isfinite(e.logabs[e.s == f]).all() for e, f in cuts):
                bx.tries += 1
                pending.append(bx)
                continue
            halves = [e.split(f) for e, f in cuts]
            subs.extend(sub for h in halves for sub in h)
            lo, hi = _children(bx, new, halves, radial)
            out.extend([lo, hi])
    # cut points can spoil an otherwise resolved segment
    refine(subs, evaluate_d)
    if any(e.near_zero for e in subs):
        raise ContourThroughZero("a subdivision vertex lies on a zero")
    return out
