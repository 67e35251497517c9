"""Sharp constants: Riesz normalisation, HLS, Sobolev, S_H and Gagliardo-Nirenberg."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np
from scipy import integrate
from scipy.special import gamma

from .exceptions import InvalidParams, QuadratureFailure, RegimeUnsupported
from .params import lt, two_alpha, two_star


def _check_alpha(N: int, alpha: float) -> None:
    if not (isinstance(N, (int, np.integer)) and N >= 1):
        raise InvalidParams(f"N must be a positive integer, got {N!r}")
    if not 0 < float(alpha) < N:
        raise InvalidParams(f"alpha must lie in (0, N), got {alpha!r}")


def riesz_constant(N: int, alpha: float) -> float:
    _check_alpha(N, alpha)
    a = float(alpha)
    return float(gamma((N - a) / 2) / (math.pi ** (N / 2) * 2 ** a * gamma(a / 2)))


def hls_constant(N: int, alpha: float) -> float:
    """Sharp HLS constant for the diagonal exponent 2N/(N+alpha)."""
    _check_alpha(N, alpha)
    a = float(alpha)
    return float(math.pi ** ((N - a) / 2) * gamma(a / 2) / gamma((N + a) / 2)
                 * (gamma(N / 2) / gamma(N)) ** (-a / N))


def sobolev_quotient(N: int, epsilon: float) -> float:
    """||grad u||_2^2 / ||u||_{2*}^2 for the exact bubble of width epsilon."""
    if N < 3:
        raise InvalidParams("the Sobolev constant needs N >= 3")
    ts = 2 * N / (N - 2)
    e2 = epsilon * epsilon
    # common constants cancel between numerator and denominator powers, so use c = 1
    du2 = lambda r: (N - 2) ** 2 * r ** 2 / (e2 + r * r) ** N * r ** (N - 1)
    up = lambda r: (e2 + r * r) ** (-(N - 2) / 2 * ts) * r ** (N - 1)
    kw = dict(epsabs=0.0, epsrel=1e-13, limit=400)
    A = sum(integrate.quad(du2, lo, hi, **kw)[0] for lo, hi in ((0, epsilon), (epsilon, np.inf)))
    L = sum(integrate.quad(up, lo, hi, **kw)[0] for lo, hi in ((0, epsilon), (epsilon, np.inf)))
    omega = 2 * math.pi ** (N / 2) / math.gamma(N / 2)
    return omega * A / (omega * L) ** (2 / ts)


def sobolev_constant(N: int, eps_pair: tuple[float, float] = (1.0, 0.5)) -> float:
    v1, v2 = (sobolev_quotient(N, e) for e in eps_pair)
    if abs(v1 - v2) > 1e-6 * abs(v1):
        raise QuadratureFailure(f"Sobolev quotient not scale invariant: {v1} vs {v2}")
    return v1


def s_h_constant(N: int, alpha: float) -> float:
    _check_alpha(N, alpha)
    return sobolev_constant(N) / (riesz_constant(N, alpha) * hls_constant(N, alpha)) ** (
        (N - 2) / (N + float(alpha)))


def critical_level(N: int, alpha: float, s_h: float | None = None) -> float:
    """The compactness-loss level (alpha+2)/(2(N+alpha)) * S_H^{(N+alpha)/(alpha+2)}."""
    a = float(alpha)
    if s_h is None:
        s_h = s_h_constant(N, alpha)
    return (a + 2) / (2 * (N + a)) * s_h ** ((N + a) / (a + 2))


def exponent_key(r) -> str:
    if isinstance(r, Fraction):
        return f"{r.numerator}/{r.denominator}" if r.denominator != 1 else str(r.numerator)
    r = float(r)
    frac = Fraction(r).limit_denominator(1000)
    if abs(float(frac) - r) < 1e-14:
        return exponent_key(frac)
    return repr(r)


def cache_key(N: int, alpha: float, r) -> str:
    return f"{N}:{float(alpha):g}:{exponent_key(r)}"


class ConstantsCache:
    """JSON-backed map "N:alpha:r" -> {value, method, residual, grid}."""

    def __init__(self, path: str | Path | None = None):
        self.path = Path(path) if path is not None else None
        self.entries: dict = {}
        if self.path is not None and self.path.exists():
            self.entries = json.loads(self.path.read_text())

    def get(self, N, alpha, r, grid_descriptor: dict | None = None):
        ent = self.entries.get(cache_key(N, alpha, r))
        if ent is None:
            return None
        if grid_descriptor is not None and ent.get("grid") != grid_descriptor:
            return None
        return ent

    def put(self, N, alpha, r, entry: dict) -> None:
        self.entries[cache_key(N, alpha, r)] = entry
        if self.path is not None:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            self.path.write_text(json.dumps(self.entries, indent=2, sort_keys=True))


def gn_constant(N: int, alpha: float, r, grid=None, cache: ConstantsCache | None = None,
                solver=None, return_info: bool = False):
    """C_G(N, alpha, r) = r / ||W_r||_2^{2r-2} from the computed ground state.

    ``solver`` defaults to :class:`choquard.solvers.GroundStateSolver`; any
    object with the same constructor and ``fit`` contract can be supplied.
    """
    _check_alpha(N, alpha)
    if not (lt(two_alpha(N, alpha), r) and lt(r, two_star(N, alpha))):
        raise RegimeUnsupported(f"GN constant needs two_alpha < r < two_star, got r={r}")
    from .field import RadialGrid
    from .solvers import GroundStateSolver

    grid = grid if grid is not None else RadialGrid(N)
    desc = grid.descriptor()
    if cache is not None:
        hit = cache.get(N, alpha, r, desc)
        if hit is not None:
            return (hit["value"], dict(hit, cached=True)) if return_info else hit["value"]
    cls = solver if solver is not None else GroundStateSolver
    est = cls(N=N, alpha=alpha, r=r, grid=grid).fit()
    info = {"value": float(est.gn_constant_), "method": "ground_state",
            "residual": float(est.residual_), "iterations": int(est.n_iter_), "grid": desc}
    if cache is not None:
        cache.put(N, alpha, r, info)
    return (info["value"], dict(info, cached=False)) if return_info else info["value"]


@dataclass
class ConstantsTable:
    N: int
    alpha: float
    riesz_A: float
    hls_C: float
    sobolev_S: float
    s_h: float
    cg: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)

    def consistency_defect(self) -> float:
        expect = self.sobolev_S / (self.riesz_A * self.hls_C) ** ((self.N - 2) / (self.N + self.alpha))
        return abs(self.s_h - expect) / expect

    def to_dict(self) -> dict:
        return {"N": self.N, "alpha": self.alpha, "riesz_A": self.riesz_A, "hls_C": self.hls_C,
                "sobolev_S": self.sobolev_S, "s_h": self.s_h,
                "cg": {exponent_key(k) if not isinstance(k, str) else k: v for k, v in self.cg.items()},
                "provenance": self.provenance}


def build_table(N: int, alpha: float, r_list=(), grid=None,
                cache: ConstantsCache | None = None) -> ConstantsTable:
    A = riesz_constant(N, alpha)
    C = hls_constant(N, alpha)
    S = sobolev_constant(N)
    s_h = S / (A * C) ** ((N - 2) / (N + float(alpha)))
    prov = {"riesz_A": "closed_form", "hls_C": "closed_form", "sobolev_S": "quadrature",
            "s_h": "closed_form"}
    cg = {}
    for r in r_list:
        val, info = gn_constant(N, alpha, r, grid=grid, cache=cache, return_info=True)
        cg[exponent_key(r)] = val
        prov[f"cg[{exponent_key(r)}]"] = {k: info[k] for k in ("method", "residual", "grid")}
    return ConstantsTable(N, float(alpha), A, C, S, s_h, cg, prov)
