"""The mass-preserving fiber s -> 2 E[s o u] and its stationary points.

Everything here works on the three coefficients (A, B_p, B_q) of a field, using
the exact scaling laws A[s o u] = s A[u] and B_r[s o u] = s^{r eta_r} B_r[u].
A grid is touched only when a root is turned back into a field.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .exceptions import (BracketFailure, BranchUnavailable, DomainError, RegimeUnsupported,
                         RegimeViolation)
from .field import RadialField, RieszKernel, breakdown, scale_field

ROOT_TOL = 1e-10
S_MIN, S_MAX = 1e-8, 1e8
DEGENERATE_TOL = 1e-9


@dataclass(frozen=True)
class FiberCoeffs:
    A: float
    B_p: float
    B_q: float
    p: float
    q: float
    eta_p: float
    eta_q: float
    mu: float

    def __post_init__(self):
        if not (self.A > 0 and self.B_p > 0 and self.B_q >= 0):
            raise DomainError("fiber coefficients need A > 0, B_p > 0, B_q >= 0")

    @property
    def pe(self) -> float:
        return self.p * self.eta_p

    @property
    def qe(self) -> float:
        return self.q * self.eta_q

    @classmethod
    def from_parts(cls, A, B_p, B_q, params) -> "FiberCoeffs":
        return cls(float(A), float(B_p), float(B_q), float(params.p), float(params.q),
                   params.eta_p, params.eta_q, float(params.mu))

    def scaled(self, s: float) -> "FiberCoeffs":
        """Coefficients of s o u from those of u."""
        return FiberCoeffs(self.A * s, self.B_p * s ** self.pe, self.B_q * s ** self.qe,
                           self.p, self.q, self.eta_p, self.eta_q, self.mu)


@dataclass
class FiberRoots:
    branch: str  # two_roots | single_max | none
    s_plus: float | None = None
    s_diamond: float | None = None
    s_minus: float | None = None
    f_plus: float | None = None
    f_diamond: float | None = None
    f_minus: float | None = None
    flags: list = field(default_factory=list)

    @property
    def s_max(self) -> float | None:
        return self.s_minus

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in ("branch", "s_plus", "s_diamond", "s_minus",
                                               "f_plus", "f_diamond", "f_minus", "flags")}


def fiber_from_field(u: RadialField, params, kernel: RieszKernel) -> FiberCoeffs:
    bd = breakdown(u, params, kernel)
    return FiberCoeffs.from_parts(bd.A, bd.B_p, bd.B_q, params)


def _check_s(s):
    s = np.asarray(s, dtype=float)
    if np.any(s <= 0):
        raise DomainError("fiber is defined for s > 0 only")
    return s


def f_eval(c: FiberCoeffs, s):
    s = _check_s(s)
    out = s * c.A - (c.mu / c.q) * s ** c.qe * c.B_q - s ** c.pe * c.B_p / c.p
    return float(out) if out.ndim == 0 else out


def f_prime(c: FiberCoeffs, s):
    s = _check_s(s)
    out = c.A - c.eta_p * s ** (c.pe - 1) * c.B_p - c.mu * c.eta_q * s ** (c.qe - 1) * c.B_q
    return float(out) if out.ndim == 0 else out


def f_second(c: FiberCoeffs, s):
    s = _check_s(s)
    out = (-c.eta_p * (c.pe - 1) * s ** (c.pe - 2) * c.B_p
           + c.mu * c.eta_q * (1 - c.qe) * s ** (c.qe - 2) * c.B_q)
    return float(out) if out.ndim == 0 else out


def s_diamond(c: FiberCoeffs) -> float:
    """Unique zero of f'' when q e_q < 1 < p e_p and mu > 0."""
    if not (c.qe < 1 < c.pe and c.mu > 0 and c.B_q > 0):
        raise RegimeUnsupported("s_diamond exists only for mass-subcritical q with mu > 0")
    ratio = c.eta_q * (1 - c.qe) * c.B_q / (c.eta_p * (c.pe - 1) * c.B_p)
    # mu enters f'' through mu * B_q
    return (c.mu * ratio) ** (1.0 / (c.pe - c.qe))


def _solve_monotone(g, dg, lo, hi, increasing: bool, tol: float, trace: list):
    """Root of a monotone g on [lo, hi] by log-bisection polished with Newton."""
    glo, ghi = g(lo), g(hi)
    if glo == 0:
        return lo
    if ghi == 0:
        return hi
    if (glo < 0) == (ghi < 0):
        raise BracketFailure(f"no sign change on [{lo:g}, {hi:g}]", trace)
    for _ in range(200):
        mid = math.sqrt(lo * hi)
        gm = g(mid)
        trace.append((mid, gm))
        if (gm < 0) == increasing:
            lo = mid
        else:
            hi = mid
        if hi / lo - 1 < 1e-6:
            break
    s = math.sqrt(lo * hi)
    for _ in range(50):
        d = dg(s)
        if d == 0 or not math.isfinite(d):
            break
        step = g(s) / d
        s_new = s - step
        if not (lo <= s_new <= hi):
            break
        s = s_new
        if abs(step) <= 1e-12 * s:
            break
    # bisection fallback if Newton wandered to a worse point
    if abs(g(s)) > tol:
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            gm = g(mid)
            if (gm < 0) == increasing:
                lo = mid
            else:
                hi = mid
            s = 0.5 * (lo + hi)
            if abs(g(s)) <= tol or hi - lo <= 4 * np.finfo(float).eps * hi:
                break
    return s


def _grow_bracket(g, start: float, direction: float, want_negative: bool, trace: list,
                  s_ref: float = 1.0):
    s = start
    while S_MIN * s_ref <= s <= S_MAX * s_ref:
        s *= direction
        v = g(s)
        trace.append((s, v))
        if (v < 0) == want_negative:
            return s
    raise BracketFailure("no sign change of f' within [1e-8, 1e8] times the natural scale",
                         trace)


def natural_scale(c: FiberCoeffs) -> float:
    """Root of the leading part, A = eta_p s^{p eta_p - 1} B_p."""
    return (c.A / (c.eta_p * c.B_p)) ** (1.0 / (c.pe - 1))


def find_roots(c: FiberCoeffs, params=None) -> FiberRoots:
    """Stationary points of the fiber.

    Mass-subcritical q with mu > 0 gives a local minimum s_plus and a local
    maximum s_minus around s_diamond, or nothing when f'(s_diamond) <= 0.
    A mass-critical q has the closed-form maximiser.  Otherwise f' is strictly
    decreasing and there is a single maximum.
    """
    tol = ROOT_TOL * c.A
    g = lambda s: f_prime(c, s)
    dg = lambda s: f_second(c, s)
    trace: list = []
    if not c.pe > 1:
        raise RegimeUnsupported("the leading exponent must be mass supercritical")
    if c.mu > 0 and c.B_q > 0 and c.qe < 1:
        sd = s_diamond(c)
        fd = g(sd)
        out = FiberRoots("none", s_diamond=sd, f_diamond=f_eval(c, sd))
        if fd <= DEGENERATE_TOL * c.A:
            if abs(fd) <= DEGENERATE_TOL * c.A:
                out.flags.append("degenerate: f'(s_diamond) ~ 0")
            return out
        # f' <= A - mu eta_q s^{q eta_q - 1} B_q and f' <= A - eta_p s^{p eta_p - 1} B_p
        lo = min((c.mu * c.eta_q * c.B_q / c.A) ** (1.0 / (1 - c.qe)), sd)
        hi = max(natural_scale(c), sd)
        # the bounds are exact; rounding can leave f' = +0 there
        for _ in range(60):
            if g(lo) < 0:
                break
            lo *= 0.5
        for _ in range(60):
            if g(hi) < 0:
                break
            hi *= 2.0
        s_plus = _solve_monotone(g, dg, lo, sd, True, tol, trace)
        s_minus = _solve_monotone(g, dg, sd, hi, False, tol, trace)
        out.branch = "two_roots"
        out.s_plus, out.s_minus = s_plus, s_minus
        out.f_plus, out.f_minus = f_eval(c, s_plus), f_eval(c, s_minus)
        return out
    if abs(c.qe - 1) < 1e-12:
        num = c.A - c.mu * c.eta_q * c.B_q
        if num <= 0:
            return FiberRoots("none")
        s = (num / (c.eta_p * c.B_p)) ** (1.0 / (c.pe - 1))
        return FiberRoots("single_max", s_minus=s, f_minus=f_eval(c, s))
    # f' strictly decreasing from a positive limit at 0+
    ref = natural_scale(c)
    if g(ref) > 0:
        lo, hi = ref, _grow_bracket(g, ref, 2.0, True, trace, ref)
    else:
        hi, lo = ref, _grow_bracket(g, ref, 0.5, False, trace, ref)
    s = _solve_monotone(g, dg, lo, hi, False, tol, trace)
    return FiberRoots("single_max", s_minus=s, f_minus=f_eval(c, s))


def default_branch(roots: FiberRoots) -> str:
    return "minus" if roots.branch in ("two_roots", "single_max") else "none"


def select_root(roots: FiberRoots, branch: str) -> float:
    if branch == "auto":
        branch = "minus"
    if roots.branch == "none":
        if any(f.startswith("degenerate") for f in roots.flags):
            raise RegimeViolation("f'(s_diamond) is numerically zero; branch undecidable")
        raise BranchUnavailable("the fiber has no stationary point")
    if branch == "plus":
        if roots.branch != "two_roots":
            raise BranchUnavailable("plus branch needs two fiber roots")
        return roots.s_plus
    if branch in ("minus", "single"):
        return roots.s_minus
    raise ValueError(f"unknown branch {branch!r}")


def project_to_pohozaev(u: RadialField, params, kernel: RieszKernel, branch: str = "auto"):
    """Dilate u onto the Pohozaev set along its fiber; returns (field, s)."""
    c = fiber_from_field(u, params, kernel)
    s = select_root(find_roots(c, params), branch)
    return scale_field(u, s), s


def fiber_profile(c: FiberCoeffs, s_min: float = 1e-3, s_max: float = 1e3, n: int = 400):
    s = np.geomspace(s_min, s_max, n)
    return s, f_eval(c, s), f_prime(c, s), f_second(c, s)


def write_fiber_csv(c: FiberCoeffs, path: str | Path, **kw) -> None:
    s, f, fp, fpp = fiber_profile(c, **kw)
    with Path(path).open("w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["s", "f", "f_prime", "f_second"])
        for row in zip(s, f, fp, fpp):
            wr.writerow([repr(float(v)) for v in row])
