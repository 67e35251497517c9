"""Problem parameters, exponent arithmetic and regime classification.

Exponents ``p`` and ``q`` may be given as floats or as :class:`fractions.Fraction`.
When both operands of a comparison are exact the comparison is exact; otherwise
a tolerance of ``1e-12`` is used.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from numbers import Real
from pathlib import Path
from typing import Union

from .exceptions import InvalidParams, RegimeUnsupported

Number = Union[float, Fraction]

CMP_TOL = 1e-12

EXPONENT_NAMES = ("two_alpha", "two_sharp", "two_star")


def _exact(x) -> Fraction | None:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int) and not isinstance(x, bool):
        return Fraction(x)
    return None


def _cmp(x, y) -> int:
    """Three-way comparison, exact for rationals and tolerant for floats."""
    fx, fy = _exact(x), _exact(y)
    if fx is not None and fy is not None:
        return (fx > fy) - (fx < fy)
    d = float(x) - float(y)
    if abs(d) <= CMP_TOL * max(1.0, abs(float(x)), abs(float(y))):
        return 0
    return 1 if d > 0 else -1


def lt(x, y) -> bool:
    return _cmp(x, y) < 0


def le(x, y) -> bool:
    return _cmp(x, y) <= 0


def eq(x, y) -> bool:
    return _cmp(x, y) == 0


def _alpha_exact(alpha) -> Fraction:
    # Floats convert exactly to their binary value.
    return alpha if isinstance(alpha, Fraction) else Fraction(alpha)


def two_alpha(N: int, alpha) -> Fraction:
    return (N + _alpha_exact(alpha)) / N


def two_sharp(N: int, alpha) -> Fraction:
    return (N + _alpha_exact(alpha) + 2) / N


def two_star(N: int, alpha) -> Fraction:
    return (N + _alpha_exact(alpha)) / (N - 2)


def eta(N: int, alpha, r) -> float:
    """Scaling exponent (N r - N - alpha) / (2 r); exact when r is rational."""
    fr = _exact(r)
    if fr is not None:
        return float((N * fr - N - _alpha_exact(alpha)) / (2 * fr))
    r = float(r)
    return (N * r - N - float(alpha)) / (2.0 * r)


@dataclass(frozen=True)
class Exponents:
    N: int
    alpha: float
    two_alpha: float
    two_sharp: float
    two_star: float

    def eta(self, r) -> float:
        return eta(self.N, self.alpha, r)


@dataclass(frozen=True)
class ProblemParams:
    """Tuple (N, alpha, mu, p, q, a) of one normalized Choquard problem."""

    N: int
    alpha: float
    mu: float
    p: Number
    q: Number
    a: float = 1.0

    def __post_init__(self):
        validate(self)

    @property
    def eta_p(self) -> float:
        return eta(self.N, self.alpha, self.p)

    @property
    def eta_q(self) -> float:
        return eta(self.N, self.alpha, self.q)

    @property
    def p_eta_p(self) -> float:
        return _product(self.N, self.alpha, self.p)

    @property
    def q_eta_q(self) -> float:
        return _product(self.N, self.alpha, self.q)

    def replace(self, **changes) -> "ProblemParams":
        kw = dict(N=self.N, alpha=self.alpha, mu=self.mu, p=self.p, q=self.q, a=self.a)
        kw.update(changes)
        return ProblemParams(**kw)

    def to_dict(self) -> dict:
        def enc(x):
            if isinstance(x, Fraction):
                return f"{x.numerator}/{x.denominator}"
            return float(x)

        return {"N": self.N, "alpha": float(self.alpha), "mu": float(self.mu),
                "p": enc(self.p), "q": enc(self.q), "a": float(self.a)}


def _product(N, alpha, r) -> float:
    """r * eta(r) = (N r - N - alpha) / 2."""
    fr = _exact(r)
    if fr is not None:
        return float((N * fr - N - _alpha_exact(alpha)) / 2)
    return (N * float(r) - N - float(alpha)) / 2.0


def validate(params: ProblemParams) -> None:
    N, alpha = params.N, params.alpha
    if not isinstance(N, int) or isinstance(N, bool) or N < 3:
        raise InvalidParams(f"N must be an integer >= 3, got {N!r}")
    if not (0 < float(alpha) < N):
        raise InvalidParams(f"alpha must lie in (0, N), got {alpha!r}")
    if not float(params.a) > 0:
        raise InvalidParams(f"a must be positive, got {params.a!r}")
    if not math.isfinite(float(params.mu)):
        raise InvalidParams("mu must be finite")
    lo, hi = two_alpha(N, alpha), two_star(N, alpha)
    p, q = params.p, params.q
    if not (lt(lo, q) and lt(q, p) and le(p, hi)):
        raise InvalidParams(
            f"need (N+alpha)/N < q < p <= (N+alpha)/(N-2); got q={float(q):.6g}, "
            f"p={float(p):.6g}, bounds ({float(lo):.6g}, {float(hi):.6g}]")


def derive_exponents(params: ProblemParams) -> Exponents:
    validate(params)
    N, alpha = params.N, params.alpha
    return Exponents(N=N, alpha=float(alpha),
                     two_alpha=float(two_alpha(N, alpha)),
                     two_sharp=float(two_sharp(N, alpha)),
                     two_star=float(two_star(N, alpha)))


@dataclass(frozen=True)
class RegimeTag:
    perturbation: str  # mass_subcritical | mass_critical | mass_supercritical
    leading: str       # hls_subcritical | hls_critical
    sign: str          # focusing | defocusing | homogeneous

    def __str__(self):
        return f"{self.perturbation}/{self.leading}/{self.sign}"


def classify_regime(params: ProblemParams) -> RegimeTag:
    validate(params)
    N, alpha = params.N, params.alpha
    c = _cmp(params.q, two_sharp(N, alpha))
    pert = {-1: "mass_subcritical", 0: "mass_critical", 1: "mass_supercritical"}[c]
    lead = "hls_critical" if eq(params.p, two_star(N, alpha)) else "hls_subcritical"
    mu = float(params.mu)
    sign = "focusing" if mu > 0 else ("defocusing" if mu < 0 else "homogeneous")
    return RegimeTag(pert, lead, sign)


def xi_threshold(params: ProblemParams, cg_p: float | None, cg_q: float | None,
                 s_h: float | None = None) -> float:
    """Right-hand side of the basic smallness assumption; ``inf`` when unconditional.

    ``cg_p`` is ignored when p is HLS critical and ``s_h`` is only read in that
    case.  The convention 0**0 = 1 is used at the mass-critical q.
    """
    validate(params)
    N, alpha, mu = params.N, params.alpha, float(params.mu)
    p, q = params.p, params.q
    sharp, star = two_sharp(N, alpha), two_star(N, alpha)
    qe, pe = params.q_eta_q, params.p_eta_p
    eq_, ep = params.eta_q, params.eta_p
    q_low = le(q, sharp) and lt(sharp, p)
    p_crit = eq(p, star)
    if q_low and mu <= 0 and p_crit:
        raise RegimeUnsupported("no threshold branch for mu <= 0 with HLS-critical p")
    if mu > 0 and lt(sharp, q):
        return math.inf
    if not q_low:
        raise RegimeUnsupported(
            f"no threshold branch for mu={mu:g}, q={float(q):.6g}, p={float(p):.6g}")
    if q_low and mu > 0 and not p_crit:
        t2 = (pe - 1) / (eq_ * cg_q * (pe - qe))
        if eq(q, sharp):
            return t2 ** (pe - 1)  # t1 ** 0 = 1, C_G(p) not needed
        t1 = (1 - qe) / (ep * cg_p * (pe - qe))
        return t1 ** (1 - qe) * t2 ** (pe - 1)
    if q_low and mu <= 0 and not p_crit:
        t1 = 1.0 / (eq_ * cg_q)
        t2 = (1 - ep) / ((ep - eq_) * cg_p)
        return t1 ** (1 - qe) * t2 ** (pe - 1)
    # mu > 0, p = two_star (p * eta_p = p)
    pf = float(p)
    t1 = (1 - qe) / (s_h ** (-pf) * (pf - qe))
    t2 = (pf - 1) / (eq_ * cg_q * (pf - qe))
    return t1 ** (1 - qe) * t2 ** (pf - 1)


def assumption_lhs(params: ProblemParams) -> float:
    a, mu = float(params.a), abs(float(params.mu))
    qe, pe = params.q_eta_q, params.p_eta_p
    x = (mu * a ** (2 * float(params.q) * (1 - params.eta_q))) ** (pe - 1)
    y = (a ** (2 * float(params.p) * (1 - params.eta_p))) ** (1 - qe)
    return x * y


def check_assumption_basic(params: ProblemParams, cg_p, cg_q, s_h=None) -> bool:
    xi = xi_threshold(params, cg_p, cg_q, s_h)
    return assumption_lhs(params) < xi


def critical_mass(params: ProblemParams, cg_p, cg_q, s_h=None) -> float:
    """The a1 at which the basic assumption becomes an equality (mu > 0, q subcritical)."""
    xi = xi_threshold(params, cg_p, cg_q, s_h)
    if math.isinf(xi):
        return math.inf
    qe, pe = params.q_eta_q, params.p_eta_p
    mu = float(params.mu)
    # lhs(a) = mu^(pe-1) * a^k
    k = (2 * float(params.q) * (1 - params.eta_q) * (pe - 1)
         + 2 * float(params.p) * (1 - params.eta_p) * (1 - qe))
    return (xi / mu ** (pe - 1)) ** (1.0 / k)


def mass_critical_threshold(params: ProblemParams, cg_q: float) -> float:
    """Critical coupling mu* with mu* a^(2q-2) = 1 / (eta_q C_G(q)) for q = two_sharp."""
    return 1.0 / (params.eta_q * cg_q * float(params.a) ** (2 * float(params.q) - 2))


def theorem_applicability(params: ProblemParams, cg_p, cg_q, s_h=None) -> list[str]:
    """Tags of the existence/nonexistence statements whose hypotheses hold."""
    validate(params)
    N, alpha, mu = params.N, float(params.alpha), float(params.mu)
    p, q = params.p, params.q
    ta, sharp, star = two_alpha(N, alpha), two_sharp(N, params.alpha), two_star(N, params.alpha)
    qf = float(q)
    p_crit = eq(p, star)
    tags: list[str] = []

    def basic():
        try:
            return check_assumption_basic(params, cg_p, cg_q, s_h)
        except RegimeUnsupported:
            return False

    if mu > 0 and lt(ta, q) and lt(q, sharp) and lt(sharp, p):
        if basic():
            tags.append("1(i)")
            if not p_crit or _thm1_critical_side(N, alpha, qf, float(sharp)):
                tags.append("1(ii)")
            tags.append("2")
    if mu > 0 and eq(q, sharp) and lt(q, p):
        if not (N == 3 and p_crit and not (0 < alpha < 1)):
            tags.append("3(i)" if basic() else "3(ii)")
    if mu > 0 and lt(sharp, q) and p_crit:
        if not (N == 3 and not (0 < alpha < min(qf - 1, 3))):
            tags.append("4")
    if mu < 0 and le(q, sharp) and lt(sharp, p):
        if not p_crit:
            if basic():
                tags.append("5(i)")
        elif max(N - 4, 0) < alpha < N and 2 <= qf:
            tags.append("5(ii)")
    if mu > 0 and p_crit and {"1(i)", "3(i)", "4"} & set(tags):
        tags.append("6(i)" if lt(q, sharp) else "6(ii)")
    return tags


def _thm1_critical_side(N: int, alpha: float, q: float, sharp: float) -> bool:
    if N >= 6:
        lo = max((2 * N - 2 + alpha) / (2 * N - 4), (N + alpha - 2) / (N - 2))
        return 0 < alpha < N - 2 and lo < q < sharp
    if N == 5 and 0 < alpha < 3 and max(4 * alpha / 3, (7 + 2 * alpha) / 6) < q < sharp:
        return True
    if 3 <= N <= 5:
        return max(N - 2, 2 * N - 6) <= alpha < N and 2 <= q < sharp
    return False


def parse_exponent(value, N: int, alpha) -> Number:
    if isinstance(value, str):
        name = value.strip()
        if name in EXPONENT_NAMES:
            return {"two_alpha": two_alpha, "two_sharp": two_sharp,
                    "two_star": two_star}[name](N, alpha)
        if "/" in name:
            return Fraction(name)
        return float(name)
    if isinstance(value, Real):
        return value if isinstance(value, (Fraction, int)) else float(value)
    raise InvalidParams(f"cannot interpret exponent {value!r}")


def params_from_dict(doc: dict) -> ProblemParams:
    try:
        N = int(doc["N"])
        alpha = float(doc["alpha"])
        return ProblemParams(N=N, alpha=alpha, mu=float(doc["mu"]),
                             p=parse_exponent(doc["p"], N, alpha),
                             q=parse_exponent(doc["q"], N, alpha),
                             a=float(doc.get("a", 1.0)))
    except KeyError as exc:
        raise InvalidParams(f"missing parameter {exc.args[0]!r}") from None
    except (TypeError, ValueError, ZeroDivisionError) as exc:
        if isinstance(exc, InvalidParams):
            raise
        raise InvalidParams(str(exc)) from None


def load_params(path: str | Path) -> ProblemParams:
    return params_from_dict(json.loads(Path(path).read_text()))
