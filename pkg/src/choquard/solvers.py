"""Ground states W_r and mass-constrained critical points.

* :func:`petviashvili_ground_state` / :class:`GroundStateSolver` solve
  ``-r eta_r Lap W + r (1 - eta_r) W = (I_alpha * |W|^r) |W|^{r-2} W``.
* :func:`minimize_gamma_plus` / :func:`minimize_gamma_minus` /
  :class:`NormalizedSolutionSolver` find critical points of E on S(a) by
  descending the fiber-lifted functional ``I(u) = f_u(s_u) / 2`` where
  ``s_u`` is the selected stationary point of the fiber of ``u``.  At a
  stationary point of I the dilated field ``s_u o u`` is a constrained
  critical point of E lying on the Pohozaev set, and the iterate is
  re-anchored (``u <- s_u o u``) whenever ``s_u`` drifts away from 1.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from . import fiber as fb
from .constants import ConstantsCache, critical_level, gn_constant, s_h_constant
from .exceptions import (BranchUnavailable, ChoquardError, LeftBasin, MaxIterExceeded,
                         RegimeUnsupported, RegimeViolation, ScaleOutOfRange, SolverDiverged)
from .field import (RadialField, RadialGrid, RieszKernel, breakdown, build_kernel,
                    check_field, gaussian, load_field, nonlinear_force, normalize_mass,
                    rearrange_decreasing, resample, scale_field)
from .params import (ProblemParams, check_assumption_basic, classify_regime, critical_mass,
                     eq, eta, lt, mass_critical_threshold, two_alpha, two_star, xi_threshold)

# --------------------------------------------------------------------------
# ground states


def _weak_residual(grid: RadialGrid, factor, LW: np.ndarray, rhs: np.ndarray, W: np.ndarray):
    res = LW - rhs
    return math.sqrt(max(res @ grid.solve_factor(factor, res), 0.0) / max(W @ LW, 1e-300))


def petviashvili_ground_state(N: int, alpha: float, r, grid: RadialGrid | None = None,
                              kernel: RieszKernel | None = None, tol: float = 1e-10,
                              max_iter: int = 500, init: np.ndarray | None = None,
                              stall_window: int = 50):
    """Positive radial ground state W_r; returns (field, residual, iterations).

    The iteration ``W <- m^gamma L^{-1} N(W)`` with the stabilising factor
    ``m = <W, L W> / <W, N(W)>`` and ``gamma = (2r - 1) / (2r - 2)``.
    ``residual`` is the relative weak-form residual in the L^{-1} norm.
    """
    if not (lt(two_alpha(N, alpha), r) and lt(r, two_star(N, alpha))):
        raise RegimeUnsupported(f"ground state needs two_alpha < r < two_star, got r={r}")
    grid = grid if grid is not None else RadialGrid(N)
    kernel = kernel if kernel is not None else build_kernel(grid, alpha)
    e = eta(N, alpha, r)
    rf = float(r)
    a_coef, b_coef = rf * e, rf * (1 - e)
    factor = grid.shifted_factor(a_coef, b_coef)
    L = lambda v: a_coef * (grid.stiffness @ v) + b_coef * grid.weights * v
    gam = (2 * rf - 1) / (2 * rf - 2)
    W = np.exp(-grid.nodes ** 2 / 4.0) if init is None else np.abs(np.asarray(init, float))
    best, best_it, res = math.inf, 0, math.inf
    for it in range(1, max_iter + 1):
        rhs = grid.weights * nonlinear_force(W, rf, kernel)
        LW = L(W)
        res = _weak_residual(grid, factor, LW, rhs, W)
        if not math.isfinite(res):
            raise SolverDiverged("ground-state iteration produced non-finite values")
        if res < tol:
            break
        if res < best * (1 - 1e-3):
            best, best_it = res, it
        elif it - best_it > stall_window:
            raise SolverDiverged(f"residual stagnated at {res:.3e} after {it} iterations")
        m = (W @ LW) / (W @ rhs)
        W = m ** gam * grid.solve_factor(factor, rhs)
    else:
        it = max_iter
    W = np.abs(W)
    return RadialField(grid, W), res, it


class GroundStateSolver(BaseEstimator):
    """Estimator wrapper around :func:`petviashvili_ground_state`.

    Fitted attributes: ``profile_`` (RadialField), ``norm_`` (L^2 norm),
    ``gn_constant_`` (r / norm^{2r-2}), ``residual_``, ``n_iter_``.
    """

    def __init__(self, N=3, alpha=2.0, r=2.0, grid=None, tol=1e-10, max_iter=500):
        self.N = N
        self.alpha = alpha
        self.r = r
        self.grid = grid
        self.tol = tol
        self.max_iter = max_iter

    def fit(self, X=None, y=None):
        grid = self.grid if self.grid is not None else RadialGrid(self.N)
        W, res, it = petviashvili_ground_state(self.N, self.alpha, self.r, grid,
                                               tol=self.tol, max_iter=self.max_iter)
        if res > 1e-8:
            raise SolverDiverged(f"ground state residual {res:.2e} after {it} iterations")
        self.profile_ = W
        self.norm_ = math.sqrt(float(grid.weights @ W.values ** 2))
        rf = float(self.r)
        self.gn_constant_ = rf / self.norm_ ** (2 * rf - 2)
        self.residual_ = res
        self.n_iter_ = it
        return self


# --------------------------------------------------------------------------
# constrained problems


@dataclass
class SolveConfig:
    tau: float = 1e-2
    tol_grad: float = 1e-6
    tol_pohozaev: float = 1e-6
    max_iter: int = 20000
    symmetrize_every: int = 50
    init: str = "auto"  # auto | gaussian | bubble | wp_seed | file
    epsilon: float = 0.5
    init_file: str | None = None
    seed: int = 0
    reanchor: float = 0.02

    def __post_init__(self):
        if not (self.tau > 0 and self.tol_grad > 0 and self.tol_pohozaev > 0):
            raise ValueError("tau and tolerances must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class SolveReport:
    field: RadialField
    level: float
    lam: float
    residuals: dict
    branch: str
    iterations: int
    converged: bool
    trace: list
    constants_used: dict
    breakdown: dict
    lam_alt: float
    fiber_second: float
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"level": self.level, "lambda": self.lam, "lambda_pohozaev": self.lam_alt,
                "residuals": self.residuals, "branch": self.branch,
                "iterations": self.iterations, "converged": self.converged,
                "constants_used": self.constants_used, "breakdown": self.breakdown,
                "fiber_second_at_1": self.fiber_second, "notes": self.notes,
                "grid": self.field.grid.descriptor()}

    def write(self, directory: str | Path) -> None:
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        (d / "report.json").write_text(json.dumps(self.to_dict(), indent=2))
        self.field.to_csv(d / "solution.csv")
        with (d / "trace.csv").open("w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["iter", "E", "A", "P", "grad_norm"])
            for row in self.trace:
                wr.writerow([row["iter"], row["E"], row["A"], row["P"], row["grad_norm"]])


def problem_constants(params: ProblemParams, grid: RadialGrid | None = None,
                      cache: ConstantsCache | None = None) -> dict:
    """C_G(p), C_G(q), S_H and the derived thresholds needed by the solvers."""
    N, alpha = params.N, params.alpha
    g = grid if grid is not None else RadialGrid(N)
    p_crit = eq(params.p, two_star(N, alpha))
    out = {"cg_q": gn_constant(N, alpha, params.q, grid=g, cache=cache),
           "cg_p": None if p_crit else gn_constant(N, alpha, params.p, grid=g, cache=cache)}
    out["s_h"] = s_h_constant(N, alpha) if N >= 3 else None
    return complete_constants(params, out)


def complete_constants(params: ProblemParams, c: dict) -> dict:
    """Add xi, a1, k0, k1 and the critical level to a dict holding cg_p, cg_q, s_h."""
    c = dict(c)
    try:
        xi = xi_threshold(params, c.get("cg_p"), c.get("cg_q"), c.get("s_h"))
    except RegimeUnsupported:
        xi = None
    c["xi"] = xi
    tag = classify_regime(params)
    mu = float(params.mu)
    if xi is not None and mu > 0 and tag.perturbation == "mass_subcritical":
        qe, pe = params.q_eta_q, params.p_eta_p
        k0 = (mu * params.eta_q * c["cg_q"] * (pe - qe) / (pe - 1)) ** (1 / (1 - qe))
        a1 = critical_mass(params, c.get("cg_p"), c.get("cg_q"), c.get("s_h"))
        ex = 2 * float(params.q) * (1 - params.eta_q) / (1 - qe)
        c.update(k0=k0, a1=a1, k1=k0 * a1 ** ex,
                 plus_bound=k0 * float(params.a) ** ex)
    if tag.perturbation == "mass_critical" and c.get("cg_q"):
        c["mu_threshold"] = mass_critical_threshold(params, c["cg_q"])
    if c.get("s_h") is not None:
        c["critical_level"] = critical_level(params.N, params.alpha, c["s_h"])
    return c


def lagrange_multiplier(u: RadialField, params: ProblemParams, kernel: RieszKernel):
    """(lambda from the weak equation, lambda from the Pohozaev-reduced identity)."""
    bd = breakdown(u, params, kernel)
    a2 = bd.mass
    mu = float(params.mu)
    lam = (bd.A - bd.B_p - mu * bd.B_q) / a2
    lam_alt = ((params.eta_p - 1) * bd.B_p + mu * (params.eta_q - 1) * bd.B_q) / a2
    return lam, lam_alt


def euler_lagrange_residual(u: RadialField, lam: float, params: ProblemParams,
                            kernel: RieszKernel) -> float:
    """Weak residual of -Lap u - lam u - F_p(u) - mu F_q(u), relative, in the H^{-1} norm."""
    g = u.grid
    v = u.values
    res = (g.stiffness @ v - lam * g.weights * v
           - g.weights * nonlinear_force(v, float(params.p), kernel)
           - float(params.mu) * g.weights * nonlinear_force(v, float(params.q), kernel))
    fac = g.shifted_factor(1.0, 1.0)
    num = res @ g.solve_factor(fac, res)
    den = v @ (g.stiffness @ v) + v @ (g.weights * v)
    return math.sqrt(max(num, 0.0) / den)


class _Lifted:
    """Evaluation of the fiber-lifted functional and its gradient for one iterate."""

    def __init__(self, params: ProblemParams, kernel: RieszKernel, branch: str):
        self.params = params
        self.kernel = kernel
        self.branch = branch
        self.p, self.q = float(params.p), float(params.q)
        self.mu = float(params.mu)
        self.grid = kernel.grid

    def evaluate(self, v: np.ndarray, need_grad: bool = True):
        g = self.grid
        w = g.weights
        av = np.abs(v)
        gp, gq = av ** self.p, av ** self.q
        Vp, Vq = self.kernel.apply(gp), self.kernel.apply(gq)
        Sv = g.stiffness @ v
        A = float(v @ Sv)
        Bp, Bq = float((w * gp) @ Vp), float((w * gq) @ Vq)
        c = fb.FiberCoeffs.from_parts(A, Bp, Bq, self.params)
        roots = fb.find_roots(c, self.params)
        s = fb.select_root(roots, self.branch)
        out = {"A": A, "B_p": Bp, "B_q": Bq, "coeffs": c, "roots": roots, "s": s,
               "I": 0.5 * fb.f_eval(c, s)}
        if need_grad:
            with np.errstate(divide="ignore", invalid="ignore"):
                Fp = np.where(av > 0, Vp * av ** (self.p - 2) * v, 0.0)
                Fq = np.where(av > 0, Vq * av ** (self.q - 2) * v, 0.0)
            pe, qe = c.pe, c.qe
            out["grad"] = s * Sv - s ** pe * w * Fp - self.mu * s ** qe * w * Fq
        return out


def _initial_field(params: ProblemParams, grid: RadialGrid, config: SolveConfig,
                   branch: str, kernel: RieszKernel) -> RadialField:
    init = config.init
    if init == "auto":
        init = "gaussian" if branch == "plus" else "wp_seed"
    if init == "gaussian":
        u = gaussian(grid, width=grid.r_max / 20.0)
    elif init == "bubble":
        u = _bubble_seed(grid, config.epsilon)
    elif init == "file":
        if not config.init_file:
            raise ValueError("init='file' needs init_file")
        u = resample(load_field(config.init_file), grid)
    elif init == "wp_seed":
        u = _wp_seed(params, grid, kernel)
    else:
        raise ValueError(f"unknown init {config.init!r}")
    return normalize_mass(u, float(params.a))


def _bubble_seed(grid: RadialGrid, epsilon: float) -> RadialField:
    from .field import bubble
    return bubble(grid, epsilon * grid.r_max / 20.0, cutoff_radius=grid.r_max / 4.0, check=False)


def _wp_seed(params: ProblemParams, grid: RadialGrid, kernel: RieszKernel) -> RadialField:
    """Ground state of the leading term on a grid of the same shape, mapped onto ``grid``."""
    N, alpha, p = params.N, params.alpha, params.p
    if eq(p, two_star(N, alpha)):
        return gaussian(grid, width=grid.r_max / 20.0)
    natural = RadialGrid(N, 40.0, 1024)
    W, _, _ = petviashvili_ground_state(N, alpha, p, natural, tol=1e-9)
    # same shape relative to the grid radius
    x = grid.nodes * (natural.r_max / grid.r_max)
    return RadialField(grid, np.nan_to_num(W(x)))


def _anchor(u: RadialField, s: float, a: float) -> RadialField:
    return normalize_mass(scale_field(u, s), a)


def _solve_lifted(params: ProblemParams, grid: RadialGrid, kernel: RieszKernel, constants: dict,
                  config: SolveConfig, branch: str, u0: RadialField | None,
                  k1: float | None = None) -> SolveReport:
    a = float(params.a)
    lif = _Lifted(params, kernel, branch)
    w = grid.weights
    u = (normalize_mass(check_field(u0, grid), a) if u0 is not None
         else _initial_field(params, grid, config, branch, kernel))
    st = lif.evaluate(u.values, need_grad=False)
    u = _anchor(u, st["s"], a)
    st = lif.evaluate(u.values)
    trace: list = []
    t = config.tau
    converged = False
    grad_rel = math.inf
    reanchors = 0
    it = 0
    d_prev = z_prev = None
    gz_prev = 1.0
    for it in range(1, config.max_iter + 1):
        v = u.values
        s = st["s"]
        if k1 is not None and s * st["A"] >= k1:
            raise LeftBasin(f"A = {s * st['A']:.4g} reached k1 = {k1:.4g}")
        gvec = st["grad"]
        lam_i = float(v @ gvec) / a ** 2
        # preconditioner s S + sigma W with sigma tracking -lambda
        sigma = max(-lam_i, 1e-3 * s * st["A"] / a ** 2, 1e-12)
        fac = grid.shifted_factor(s, sigma)
        Pg = grid.solve_factor(fac, gvec)
        Pu = grid.solve_factor(fac, w * v)
        beta = float((w * v) @ Pg) / float((w * v) @ Pu)
        z = Pg - beta * Pu  # preconditioned tangent gradient
        res = gvec - lam_i * w * v
        gz = float(gvec @ z)
        d = -z
        if d_prev is not None:
            # Polak-Ribiere+ with the previous direction moved to the new tangent space
            b_cg = max(0.0, (gz - float(gvec @ z_prev)) / gz_prev)
            d_old = d_prev - (float(w @ (v * d_prev)) / a ** 2) * v
            d = -z + b_cg * d_old
            if float(gvec @ d) >= 0:
                d = -z
        grad_rel = math.sqrt(max(float(res @ grid.solve_factor(fac, res)), 0.0)
                             / max(float(v @ (s * (grid.stiffness @ v) + sigma * w * v)), 1e-300))
        P_rel = abs(fb.f_prime(st["coeffs"], 1.0)) / st["A"]
        trace.append({"iter": it, "E": st["I"], "A": s * st["A"], "P": P_rel * st["A"],
                      "grad_norm": grad_rel, "s": s})
        if grad_rel < config.tol_grad:
            if P_rel < config.tol_pohozaev and abs(s - 1) < 1e-4:
                converged = True
                break
            if reanchors > 20:
                break
            try:
                u = _anchor(u, s, a)
            except ScaleOutOfRange:
                break
            st = lif.evaluate(u.values)
            reanchors += 1
            d_prev = None
            continue
        slope = float(gvec @ d)
        # backtracking on I along the normalised curve u + t d
        t = min(4.0 * t, 1e4)
        accepted = False
        for _ in range(60):
            trial = v + t * d
            trial *= a / math.sqrt(float(w @ trial ** 2))
            try:
                st_new = lif.evaluate(trial)
            except (BranchUnavailable, RegimeViolation, ChoquardError):
                t *= 0.5
                continue
            if st_new["I"] <= st["I"] + 1e-4 * t * slope:
                accepted = True
                break
            t *= 0.5
        if not accepted:
            if reanchors > 20:
                break
            # line search stalled: take the re-anchored field and retry
            try:
                u = _anchor(u, s, a)
            except ScaleOutOfRange:
                break
            st = lif.evaluate(u.values)
            reanchors += 1
            t = 1.0
            d_prev = None
            continue
        u = RadialField(grid, trial)
        st = st_new
        d_prev, z_prev, gz_prev = d, z, gz
        if config.symmetrize_every and it % config.symmetrize_every == 0:
            if np.any(np.diff(u.values) > 0) or np.any(u.values < 0):
                cand = rearrange_decreasing(u)
                try:
                    st_c = lif.evaluate(cand.values)
                    if st_c["I"] <= st["I"] + 1e-12 * abs(st["I"]):
                        u, st, d_prev = cand, st_c, None
                except ChoquardError:
                    pass
        if abs(math.log(st["s"])) > config.reanchor:
            try:
                u = _anchor(u, st["s"], a)
            except ScaleOutOfRange:
                continue  # keep descending the lifted functional off-anchor
            st = lif.evaluate(u.values)
            d_prev = None
    if not converged:
        exc = MaxIterExceeded(
            f"no convergence after {it} iterations (grad {grad_rel:.2e}, branch {branch})")
        exc.trace, exc.field = trace, u
        raise exc
    return _finish(u, params, kernel, constants, branch, it, trace, grad_rel, config)


def _finish(u, params, kernel, constants, branch, it, trace, grad_rel, config) -> SolveReport:
    bd = breakdown(u, params, kernel)
    c = fb.FiberCoeffs.from_parts(bd.A, bd.B_p, bd.B_q, params)
    lam, lam_alt = lagrange_multiplier(u, params, kernel)
    el = euler_lagrange_residual(u, lam, params, kernel)
    notes = []
    if eq(params.p, two_star(params.N, params.alpha)):
        notes.append("truncation-regularized: HLS-critical p solved on a finite domain")
    return SolveReport(field=u, level=bd.E, lam=lam,
                       residuals={"grad": grad_rel, "pohozaev": abs(bd.P) / bd.A,
                                  "euler_lagrange": el,
                                  "multiplier_gap": abs(lam - lam_alt) / max(abs(lam), 1e-300)},
                       branch=branch, iterations=it, converged=True, trace=trace,
                       constants_used={k: v for k, v in constants.items() if v is not None},
                       breakdown=bd.to_dict(), lam_alt=lam_alt,
                       fiber_second=fb.f_second(c, 1.0), notes=notes)


def minimize_gamma_plus(params: ProblemParams, grid: RadialGrid, kernel: RieszKernel,
                        constants: dict, config: SolveConfig | None = None,
                        u0: RadialField | None = None) -> SolveReport:
    """Local minimiser of E on V(a) = {u in S(a): A[u] < k1} (negative level)."""
    config = config or SolveConfig()
    tag = classify_regime(params)
    if not (tag.perturbation == "mass_subcritical" and tag.sign == "focusing"):
        raise RegimeUnsupported(f"plus branch needs mass-subcritical focusing q, got {tag}")
    constants = complete_constants(params, constants)
    if not check_assumption_basic(params, constants.get("cg_p"), constants["cg_q"],
                                  constants.get("s_h")):
        raise RegimeViolation("the smallness assumption fails; a >= a1")
    return _solve_lifted(params, grid, kernel, constants, config, "plus", u0, k1=constants["k1"])


def minimize_gamma_minus(params: ProblemParams, grid: RadialGrid, kernel: RieszKernel,
                         constants: dict, config: SolveConfig | None = None,
                         u0: RadialField | None = None) -> SolveReport:
    """Mountain-pass type critical point on the minus branch (or the single branch)."""
    config = config or SolveConfig()
    tag = classify_regime(params)
    constants = complete_constants(params, constants)
    two = tag.perturbation == "mass_subcritical" and tag.sign == "focusing"
    if two and not check_assumption_basic(params, constants.get("cg_p"), constants["cg_q"],
                                          constants.get("s_h")):
        raise RegimeViolation("the smallness assumption fails; the fiber may have no roots")
    branch = "minus" if two else "single"
    return _solve_lifted(params, grid, kernel, constants, config, branch, u0)


def suggest_grid(params: ProblemParams, branch: str = "auto", M: int = 2048,
                 extent: float = 40.0, probe_M: int = 512) -> RadialGrid:
    """Grid whose radius follows the natural length of the requested critical point.

    A unit-width Gaussian is projected onto the requested fiber branch on a
    probe grid; the dilation s found there sets the length 1/sqrt(s) and the
    returned grid has ``r_max = extent / sqrt(s)``.
    """
    probe = RadialGrid(params.N, 20.0, probe_M)
    kern = build_kernel(probe, params.alpha)
    u = normalize_mass(gaussian(probe, 1.0), float(params.a))
    c = fb.fiber_from_field(u, params, kern)
    if branch == "auto":
        branch = "minus"
    s = 1.0
    # roots far outside [1e-8, 1e8] are reached by pre-dilating the probe
    for pre in (1.0, 1e-6, 1e6, 1e-12, 1e12):
        try:
            s = pre * fb.select_root(fb.find_roots(c.scaled(pre), params), branch)
            break
        except ChoquardError:
            continue
    return RadialGrid(params.N, extent / math.sqrt(s), M)


class NormalizedSolutionSolver(BaseEstimator):
    """Estimator for normalized solutions on one fiber branch.

    ``branch`` is ``plus``, ``minus`` or ``auto`` (minus / single branch).
    Fitted attributes: ``field_``, ``energy_``, ``multiplier_``, ``report_``.
    """

    def __init__(self, params=None, branch="auto", grid=None, constants=None, tau=1e-2,
                 tol_grad=1e-6, tol_pohozaev=1e-6, max_iter=20000, symmetrize_every=50,
                 init="auto", seed=0, cache=None):
        self.params = params
        self.branch = branch
        self.grid = grid
        self.constants = constants
        self.tau = tau
        self.tol_grad = tol_grad
        self.tol_pohozaev = tol_pohozaev
        self.max_iter = max_iter
        self.symmetrize_every = symmetrize_every
        self.init = init
        self.seed = seed
        self.cache = cache

    def _config(self) -> SolveConfig:
        return SolveConfig(tau=self.tau, tol_grad=self.tol_grad, tol_pohozaev=self.tol_pohozaev,
                           max_iter=self.max_iter, symmetrize_every=self.symmetrize_every,
                           init=self.init, seed=self.seed)

    def fit(self, u0=None, y=None):
        params = self.params
        grid = self.grid if self.grid is not None else suggest_grid(params, self.branch)
        kernel = build_kernel(grid, params.alpha)
        consts = self.constants
        if consts is None:
            consts = problem_constants(params, cache=self.cache)
        if u0 is not None:
            u0 = resample(u0, grid) if u0.grid != grid else u0
        fn = minimize_gamma_plus if self.branch == "plus" else minimize_gamma_minus
        rep = fn(params, grid, kernel, consts, self._config(), u0=u0)
        self.report_ = rep
        self.field_ = rep.field
        self.energy_ = rep.level
        self.multiplier_ = rep.lam
        self.kernel_ = kernel
        return self


class PohozaevProjector(BaseEstimator, TransformerMixin):
    """Maps fields onto the Pohozaev set along their fibers."""

    def __init__(self, params=None, kernel=None, branch="auto"):
        self.params = params
        self.kernel = kernel
        self.branch = branch

    def fit(self, X=None, y=None):
        return self

    def transform(self, X):
        fields = [X] if isinstance(X, RadialField) else list(X)
        self.scales_ = []
        out = []
        for u in fields:
            v, s = fb.project_to_pohozaev(u, self.params, self.kernel, self.branch)
            out.append(v)
            self.scales_.append(s)
        return out[0] if isinstance(X, RadialField) else out


# --------------------------------------------------------------------------
# sweeps


@dataclass
class SweepReport:
    variable: str
    rows: list
    summary: dict

    def to_csv(self, path: str | Path) -> None:
        keys = ["value", "level", "A", "lambda", "grad", "pohozaev", "converged", "error"]
        with Path(path).open("w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(keys)
            for row in self.rows:
                wr.writerow([row.get(k, "") for k in keys])


def _monotone(values) -> str:
    d = np.diff(np.asarray(values, dtype=float))
    if len(d) == 0:
        return "constant"
    if np.all(d > 0):
        return "increasing"
    if np.all(d < 0):
        return "decreasing"
    return "none"


def _sweep(params_list, values, variable, branch, grid_for, config, constants_for):
    rows = []
    prev = None
    for val, prm in zip(values, params_list):
        row = {"value": float(val), "converged": False}
        try:
            grid = grid_for(prm)
            kern = build_kernel(grid, prm.alpha)
            u0 = resample(prev, grid) if prev is not None else None
            consts = constants_for(prm)
            fn = minimize_gamma_plus if branch == "plus" else minimize_gamma_minus
            rep = fn(prm, grid, kern, consts, config, u0=u0)
            prev = rep.field
            row.update(level=rep.level, A=rep.breakdown["A"], **{"lambda": rep.lam},
                       grad=rep.residuals["grad"], pohozaev=rep.residuals["pohozaev"],
                       converged=True, report=rep)
        except (ChoquardError, ValueError) as exc:
            row["error"] = f"{type(exc).__name__}: {exc}"
        rows.append(row)
    ok = [r for r in rows if r["converged"]]
    summary = {"n_converged": len(ok), "n_rows": len(rows),
               "level_trend": _monotone([r["level"] for r in ok]),
               "A_trend": _monotone([r["A"] for r in ok])}
    if ok:
        summary["min_level"] = min(r["level"] for r in ok)
    return SweepReport(variable, rows, summary)


def sweep_mu(params: ProblemParams, mu_grid, branch: str = "auto", grid=None,
             config: SolveConfig | None = None, cache: ConstantsCache | None = None,
             constants: dict | None = None, M: int = 2048, extent: float = 40.0) -> SweepReport:
    """Solve along a list of couplings, warm-starting each row from the previous one.

    ``grid`` may be a RadialGrid, a callable params -> RadialGrid, or None for
    :func:`suggest_grid` per row.
    """
    config = config or SolveConfig()
    plist = [params.replace(mu=float(m)) for m in mu_grid]
    base = constants if constants is not None else problem_constants(params, cache=cache)
    grid_for = _grid_rule(grid, branch, M, extent)
    return _sweep(plist, list(mu_grid), "mu", branch, grid_for, config,
                  lambda prm: complete_constants(prm, base))


def sweep_p(params: ProblemParams, p_grid, branch: str = "auto", grid=None,
            config: SolveConfig | None = None, cache: ConstantsCache | None = None,
            M: int = 2048, extent: float = 40.0) -> SweepReport:
    config = config or SolveConfig()
    plist = [params.replace(p=p) for p in p_grid]
    grid_for = _grid_rule(grid, branch, M, extent)
    rep = _sweep(plist, list(p_grid), "p", branch, grid_for, config,
                 lambda prm: problem_constants(prm, cache=cache))
    s_h = s_h_constant(params.N, params.alpha)
    rep.summary["critical_level"] = critical_level(params.N, params.alpha, s_h)
    ok = [r for r in rep.rows if r["converged"]]
    rep.summary["all_positive"] = bool(ok) and all(r["level"] > 0 for r in ok)
    return rep


def _grid_rule(grid, branch, M, extent):
    if grid is None:
        return lambda prm: suggest_grid(prm, branch, M=M, extent=extent)
    if callable(grid) and not isinstance(grid, RadialGrid):
        return grid
    return lambda prm: grid
