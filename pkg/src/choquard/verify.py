"""Executable checks: GN inequality, Pohozaev/Euler-Lagrange residuals, bubble
rates, the mass-critical threshold picture, decay bounds and level gaps."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import fiber as fb
from .constants import critical_level, sobolev_constant
from .exceptions import ChoquardError, GridTooCoarse
from .field import (RadialField, RadialGrid, b_term, bubble, build_kernel, grad_energy, mass,
                    normalize_mass, random_field)
from .params import ProblemParams, classify_regime, eta, mass_critical_threshold
from .solvers import (GroundStateSolver, SolveConfig, SolveReport, euler_lagrange_residual,
                      minimize_gamma_minus, suggest_grid)


@dataclass
class CheckResult:
    name: str
    status: str  # pass | fail | skipped
    measured: object
    tolerance: object
    reference: object
    provenance: str = ""
    details: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.status == "pass"

    def to_dict(self) -> dict:
        return _jsonable(asdict(self))


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, float) and not math.isfinite(x):
        return str(x)
    return x


def _status(ok: bool) -> str:
    return "pass" if ok else "fail"


# --------------------------------------------------------------------------
# Gagliardo-Nirenberg


def gn_ratio(u: RadialField, r, kernel, N: int | None = None, alpha: float | None = None) -> float:
    """B_r / (||u||_2^{2r(1-eta_r)} A^{r eta_r}); bounded above by C_G."""
    N = u.grid.N if N is None else N
    alpha = kernel.alpha if alpha is None else alpha
    e = eta(N, alpha, r)
    rf = float(r)
    return b_term(u, rf, kernel) / (mass(u) ** (rf * (1 - e)) * grad_energy(u) ** (rf * e))


def check_gn(N: int, alpha: float, r, cg: float, n_samples: int = 1000, seed: int = 0,
             grid: RadialGrid | None = None, kernel=None, tol: float = 1e-3) -> CheckResult:
    """Largest GN ratio / C_G over seeded random fields must not exceed 1 + tol."""
    grid = grid if grid is not None else RadialGrid(N)
    kernel = kernel if kernel is not None else build_kernel(grid, alpha)
    rng = np.random.default_rng(seed)
    worst, worst_seed = 0.0, None
    for _ in range(n_samples):
        sd = int(rng.integers(0, 2 ** 31))
        u = random_field(grid, sd, smoothness=float(rng.uniform(0.3, 2.0)),
                         n_terms=int(rng.integers(1, 6)))
        ratio = gn_ratio(u, r, kernel, N, alpha) / cg
        if ratio > worst:
            worst, worst_seed = ratio, sd
    return CheckResult("gn_inequality", _status(worst <= 1 + tol), worst, 1 + tol, 1.0,
                       "sampling", {"n_samples": n_samples, "seed": seed, "worst_seed": worst_seed,
                                    "r": float(r)})


def check_gn_equality(W: RadialField, r, cg: float, kernel, tol: float = 1e-3) -> CheckResult:
    ratio = gn_ratio(W, r, kernel) / cg
    return CheckResult("gn_equality", _status(abs(ratio - 1) <= tol), ratio, tol, 1.0,
                       "ground state attains the constant", {"r": float(r)})


# --------------------------------------------------------------------------
# residuals


def check_pohozaev(report: SolveReport, params: ProblemParams | None = None, kernel=None,
                   tol_pohozaev: float = 1e-6, tol_el: float = 1e-5) -> CheckResult:
    """|P|/A and the weak Euler-Lagrange residual of a converged report."""
    P_rel = report.residuals["pohozaev"]
    el = report.residuals["euler_lagrange"]
    if params is not None and kernel is not None:
        bd = fb.fiber_from_field(report.field, params, kernel)
        P_rel = abs(fb.f_prime(bd, 1.0)) / bd.A
        el = euler_lagrange_residual(report.field, report.lam, params, kernel)
    ok = report.converged and P_rel < tol_pohozaev and el < tol_el
    return CheckResult("pohozaev", _status(ok), {"pohozaev": P_rel, "euler_lagrange": el},
                       {"pohozaev": tol_pohozaev, "euler_lagrange": tol_el}, 0.0,
                       "Pohozaev identity and weak equation")


def check_field_residual(u: RadialField, lam: float, params: ProblemParams, kernel,
                         tol_pohozaev: float = 1e-6, tol_el: float = 1e-5) -> CheckResult:
    c = fb.fiber_from_field(u, params, kernel)
    P_rel = abs(fb.f_prime(c, 1.0)) / c.A
    el = euler_lagrange_residual(u, lam, params, kernel)
    ok = P_rel < tol_pohozaev and el < tol_el
    return CheckResult("field_residual", _status(ok), {"pohozaev": P_rel, "euler_lagrange": el},
                       {"pohozaev": tol_pohozaev, "euler_lagrange": tol_el}, 0.0,
                       "Pohozaev identity and weak equation")


# --------------------------------------------------------------------------
# bubbles


def fit_slope(eps, values) -> float:
    return float(np.polyfit(np.log(eps), np.log(np.abs(values)), 1)[0])


def bubble_rates(N: int, alpha: float, q: float, eps_list, grid: RadialGrid | None = None,
                 kernel=None) -> dict:
    """Defects and rates of the cut-off bubble family; raises GridTooCoarse if eps < 4h."""
    grid = grid if grid is not None else RadialGrid(N, 2.5, 2048)
    eps = np.asarray(sorted(eps_list, reverse=True), dtype=float)
    if eps.min() < 4 * grid.h:
        raise GridTooCoarse(f"smallest epsilon {eps.min():g} below 4h = {4 * grid.h:g}")
    kernel = kernel if kernel is not None else build_kernel(grid, alpha)
    SN = sobolev_constant(N) ** (N / 2)
    ts = 2 * N / (N - 2)
    rows = {"grad_defect": [], "crit_defect": [], "B_q": [], "L_q": []}
    for e in eps:
        U = bubble(grid, e)
        rows["grad_defect"].append(grad_energy(U) - SN)
        rows["crit_defect"].append(SN - float(grid.weights @ np.abs(U.values) ** ts))
        rows["B_q"].append(b_term(U, q, kernel))
        rows["L_q"].append(float(grid.weights @ np.abs(U.values) ** q))
    slopes = {k: fit_slope(eps, v) for k, v in rows.items()}
    crit_q = N / (N - 2)
    if q > crit_q:
        lq_rate = N - (N - 2) * q / 2
    elif q < crit_q:
        lq_rate = (N - 2) * q / 2
    else:
        lq_rate = N / 2  # up to a logarithm
    expected = {"grad_defect": N - 2, "crit_defect": N, "B_q": N + alpha - (N - 2) * q,
                "L_q": lq_rate}
    return {"eps": eps.tolist(), "values": rows, "slopes": slopes, "expected": expected,
            "log_case": bool(abs(q - crit_q) < 1e-12)}


def check_bubble_rates(N: int, alpha: float, q: float, eps_list=(0.4, 0.2, 0.1, 0.05),
                       grid: RadialGrid | None = None, kernel=None, rel_tol: float = 0.2,
                       keys=("grad_defect", "crit_defect", "B_q")) -> CheckResult:
    data = bubble_rates(N, alpha, q, eps_list, grid, kernel)
    ok = all(abs(data["slopes"][k] - data["expected"][k]) <= rel_tol * abs(data["expected"][k])
             for k in keys)
    return CheckResult("bubble_rates", _status(ok), {k: data["slopes"][k] for k in keys},
                       rel_tol, {k: data["expected"][k] for k in keys},
                       "least-squares log-log fit", data)


# --------------------------------------------------------------------------
# mass-critical threshold picture


def fiber_sup(c: fb.FiberCoeffs, n: int = 4001) -> float:
    """sup over s > 0 of f_u(s) / 2, on a dense log grid around the natural scale."""
    ref = fb.natural_scale(c)
    s = np.geomspace(1e-10 * ref, 1e6 * ref, n)
    return max(0.0, float(np.max(fb.f_eval(c, s))) / 2)


def check_thresholds(params: ProblemParams, cg_q: float, below=(0.2, 0.4, 0.6, 0.8),
                     above=(1.1, 1.5), config: SolveConfig | None = None, M: int = 2048,
                     wq_grid: RadialGrid | None = None, tol_above: float = 1e-3) -> CheckResult:
    """Levels below the critical coupling are positive and decreasing; above it the
    fiber of the ground state W_q never rises above zero."""
    if classify_regime(params).perturbation != "mass_critical":
        return CheckResult("thresholds", "skipped", None, None, None, "needs q = two_sharp")
    mu_star = mass_critical_threshold(params, cg_q)
    consts = {"cg_q": cg_q, "cg_p": None, "s_h": None}
    levels, errors = [], []
    for frac in below:
        prm = params.replace(mu=frac * mu_star)
        try:
            grid = suggest_grid(prm, "auto", M=M)
            rep = minimize_gamma_minus(prm, grid, build_kernel(grid, prm.alpha), consts, config)
            levels.append(rep.level)
        except ChoquardError as exc:
            levels.append(math.nan)
            errors.append(f"{frac}: {exc}")
    wq = GroundStateSolver(N=params.N, alpha=params.alpha, r=params.q,
                           grid=wq_grid).fit().profile_
    kq = build_kernel(wq.grid, params.alpha)
    wq = normalize_mass(wq, float(params.a))
    sups = []
    for frac in above:
        prm = params.replace(mu=frac * mu_star)
        sups.append(fiber_sup(fb.fiber_from_field(wq, prm, kq)))
    lv = np.asarray(levels)
    below_ok = bool(np.all(np.isfinite(lv)) and np.all(lv > 0) and np.all(np.diff(lv) < 0))
    above_ok = all(s < tol_above for s in sups)
    return CheckResult("thresholds", _status(below_ok and above_ok),
                       {"levels_below": levels, "fiber_sup_above": sups},
                       {"above": tol_above}, {"mu_threshold": mu_star},
                       "coupling scan around the mass-critical threshold",
                       {"below": list(below), "above": list(above), "errors": errors})


# --------------------------------------------------------------------------
# decay, gaps


def decay_bound(u: RadialField) -> np.ndarray:
    g = u.grid
    return g.nodes ** (-g.N / 2) * math.sqrt(g.N / g.omega) * math.sqrt(mass(u))


def check_decay(u: RadialField | SolveReport) -> CheckResult:
    """|u(r)| <= r^{-N/2} sqrt(N / omega) ||u||_2 for nonincreasing radial u."""
    if isinstance(u, SolveReport):
        u = u.field
    g = u.grid
    bound = decay_bound(u)
    mask = g.nodes >= g.h
    excess = np.abs(u.values[mask]) / bound[mask]
    worst = float(excess.max()) if excess.size else 0.0
    return CheckResult("decay", _status(worst <= 1.0), worst, 1.0, 1.0,
                       "radial L^2 decay bound")


def check_gap(minus: SolveReport, plus: SolveReport, N: int, alpha: float, s_h: float,
              slack: float = 0.05) -> CheckResult:
    """gamma_minus < gamma_plus + critical level * (1 + slack)."""
    lvl = critical_level(N, alpha, s_h)
    bound = plus.level + lvl * (1 + slack)
    return CheckResult("level_gap", _status(minus.level < bound), minus.level, slack, bound,
                       "upper estimate of the mountain-pass level",
                       {"gamma_plus": plus.level, "critical_level": lvl})


def check_superadditivity(level_a: float, level_b: float, level_ab: float,
                          tol: float = 1e-3) -> CheckResult:
    """gamma(a) <= gamma(b) + gamma(a - b) + tol."""
    ok = level_a <= level_b + level_ab + tol
    return CheckResult("superadditivity", _status(ok), level_a, tol, level_b + level_ab,
                       "subadditivity of the plus level")


# --------------------------------------------------------------------------
# output


def write_checks(results, path: str | Path) -> None:
    Path(path).write_text(json.dumps([r.to_dict() for r in results], indent=2))


def summary_table(results) -> str:
    lines = [f"{'check':<22} {'status':<8} measured"]
    for r in results:
        m = r.measured
        if isinstance(m, float):
            m = f"{m:.6g}"
        lines.append(f"{r.name:<22} {r.status:<8} {m}")
    return "\n".join(lines)
