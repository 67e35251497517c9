"""Acceptance suite at desk scale (N=3, alpha=2 unless noted).

Each test records one PASS/FAIL line; the lines are repeated in the terminal
summary under "acceptance criteria".
"""
import math
import time
from fractions import Fraction

import numpy as np
import pytest

import oracles
from choquard import fiber as fb
from choquard import verify as vf
from choquard.constants import ConstantsCache
from choquard.field import RadialGrid, build_kernel
from choquard.params import ProblemParams, eta, two_sharp, two_star
from choquard.solvers import (GroundStateSolver, SolveConfig, complete_constants,
                              minimize_gamma_minus, minimize_gamma_plus,
                              petviashvili_ground_state, problem_constants, suggest_grid,
                              sweep_mu)

N, ALPHA = 3, 2.0


@pytest.fixture(scope="module")
def cache(tmp_path_factory):
    return ConstantsCache(tmp_path_factory.mktemp("consts") / "constants.json")


@pytest.fixture(scope="module")
def base(cache):
    """q=2, p=3, a=1 with mu at half of the largest coupling allowed by the assumption."""
    prm = ProblemParams(N=N, alpha=ALPHA, mu=1.0, p=3, q=2, a=1.0)
    c = problem_constants(prm, cache=cache)
    mu = 0.5 * c["xi"] ** (1 / (prm.p_eta_p - 1))
    prm = prm.replace(mu=mu)
    return prm, complete_constants(prm, c)


def test_exponent_identities(record):
    t0 = time.perf_counter()
    worst = 0.0
    for n in (3, 4, 5, 6, 7):
        for alpha in np.linspace(0.05, n - 0.05, 10):
            worst = max(worst, abs(eta(n, alpha, two_star(n, alpha)) - 1),
                        abs(float(two_sharp(n, alpha)) * eta(n, alpha, two_sharp(n, alpha)) - 1))
    dt = time.perf_counter() - t0
    ok = worst <= 1e-14 and dt < 1
    assert record("1", ok, f"max identity defect {worst:.1e} over 50 (N,alpha) points, {dt:.2f}s")


def test_gn_inequality(record, cache):
    t0 = time.perf_counter()
    grid = RadialGrid(N)
    kern = build_kernel(grid, ALPHA)
    gs = GroundStateSolver(N=N, alpha=ALPHA, r=2, grid=grid).fit()
    ineq = vf.check_gn(N, ALPHA, 2, gs.gn_constant_, 1000, seed=0, grid=grid, kernel=kern)
    eq = vf.check_gn_equality(gs.profile_, 2, gs.gn_constant_, kern)
    dt = time.perf_counter() - t0
    ok = ineq.passed and eq.passed and dt < 120
    assert record("2", ok, f"worst ratio/C_G {ineq.measured:.6f} over 1000 fields, "
                           f"W_2 ratio {eq.measured:.8f}, {dt:.1f}s")


def test_ground_states(record):
    lines, ok = [], True
    for r in (2, Fraction(7, 3), 3):
        t0 = time.perf_counter()
        W, res, it = petviashvili_ground_state(N, ALPHA, r, RadialGrid(N))
        norm = math.sqrt(float(W.grid.weights @ W.values ** 2))
        dt = time.perf_counter() - t0
        _, ref = oracles.weinstein_max(float(r))
        rel = abs(norm - ref) / ref
        ok &= res < 1e-8 and it <= 500 and rel < 1e-3 and dt < 180
        lines.append(f"r={r}: residual {res:.1e} in {it} it, ||W|| {norm:.6f} "
                     f"vs oracle {ref:.6f}, {dt:.1f}s")
    assert record("3", ok, "; ".join(lines))


def test_plus_branch(record, base):
    prm, c = base
    t0 = time.perf_counter()
    grid = suggest_grid(prm, "plus")
    rep = minimize_gamma_plus(prm, grid, build_kernel(grid, ALPHA), c)
    dt = time.perf_counter() - t0
    A = rep.breakdown["A"]
    ok = (rep.converged and rep.level < 0 and rep.lam < 0 and rep.residuals["pohozaev"] < 1e-6
          and A < c["plus_bound"] and dt < 300)
    assert record("4", ok, f"mu={prm.mu:.4g}: gamma+ {rep.level:.6g}, lambda {rep.lam:.5g}, "
                           f"|P|/A {rep.residuals['pohozaev']:.1e}, A {A:.4g} < {c['plus_bound']:.4g}, "
                           f"{dt:.1f}s")


def test_minus_branch(record, base):
    prm, c = base
    t0 = time.perf_counter()
    grid = suggest_grid(prm, "minus")
    rep = minimize_gamma_minus(prm, grid, build_kernel(grid, ALPHA), c)
    dt = time.perf_counter() - t0
    ok = (rep.converged and rep.level > 0 and rep.fiber_second < 0 and rep.lam < 0
          and rep.residuals["pohozaev"] < 1e-6 and dt < 600)
    assert record("5", ok, f"gamma- {rep.level:.6g}, f''(1) {rep.fiber_second:.5g}, "
                           f"lambda {rep.lam:.5g}, |P|/A {rep.residuals['pohozaev']:.1e}, {dt:.1f}s")


def test_mass_critical_thresholds(record, cache):
    t0 = time.perf_counter()
    prm = ProblemParams(N=N, alpha=ALPHA, mu=1.0, p=3, q=two_sharp(N, ALPHA), a=1.0)
    cg_q = problem_constants(prm, cache=cache)["cg_q"]
    res = vf.check_thresholds(prm, cg_q)
    dt = time.perf_counter() - t0
    ok = res.passed and dt < 900
    lv = ", ".join(f"{v:.4g}" for v in res.measured["levels_below"])
    sups = ", ".join(f"{v:.1e}" for v in res.measured["fiber_sup_above"])
    assert record("6", ok, f"mu*={res.reference['mu_threshold']:.6g}; levels below [{lv}], "
                           f"fiber sup above [{sups}], {dt:.1f}s")


def test_vanishing_coupling_trend(record, base, cache):
    prm, c = base
    t0 = time.perf_counter()
    mus = [1e-1, 3e-2, 1e-2, 3e-3, 1e-3]
    rep = sweep_mu(prm, mus, "plus", cache=cache)
    dt = time.perf_counter() - t0
    lv = [r.get("level", math.nan) for r in rep.rows]
    ok = (rep.summary["n_converged"] == len(mus) and rep.summary["level_trend"] == "increasing"
          and rep.summary["A_trend"] == "decreasing" and all(v < 0 for v in lv)
          and abs(lv[-1]) < 0.05 * abs(lv[0]) and dt < 1200)
    assert record("7", ok, "gamma+ " + ", ".join(f"{v:.3e}" for v in lv)
                  + f"; A {rep.summary['A_trend']}, {dt:.1f}s")


def test_critical_exponent_bounds(record, cache):
    t0 = time.perf_counter()
    prm = ProblemParams(N=N, alpha=ALPHA, mu=1.0, p=two_star(N, ALPHA), q=2, a=1.0)
    c = problem_constants(prm, cache=cache)
    prm = prm.replace(mu=0.5 * c["xi"] ** (1 / (prm.p_eta_p - 1)))
    c = complete_constants(prm, c)
    cfg = SolveConfig(tol_grad=1e-4, tol_pohozaev=1e-4)
    gp = suggest_grid(prm, "plus")
    plus = minimize_gamma_plus(prm, gp, build_kernel(gp, ALPHA), c, cfg)
    gm = suggest_grid(prm, "minus")
    minus = minimize_gamma_minus(prm, gm, build_kernel(gm, ALPHA), c, cfg)
    gap = vf.check_gap(minus, plus, N, ALPHA, c["s_h"], slack=0.05)
    sweep = sweep_mu(prm, [prm.mu, 40.0, 18.0, 8.0], "minus", RadialGrid(N, 15.0, 2048), cfg,
                     cache)
    lvl = c["critical_level"]
    last = sweep.rows[-1].get("level", math.nan)
    dt = time.perf_counter() - t0
    ok = (gap.passed and sweep.summary["n_converged"] == 4
          and sweep.summary["level_trend"] == "increasing" and abs(last - lvl) < 0.1 * lvl
          and dt < 1800)
    assert record("8", ok, f"mu={prm.mu:.4g}: gamma- {minus.level:.5g} < {gap.reference:.5g}; "
                           f"sweep levels " + ", ".join(f"{r.get('level', math.nan):.4g}"
                                                        for r in sweep.rows)
                  + f" -> critical level {lvl:.5g}, {dt:.1f}s")


def test_bubble_rates(record):
    t0 = time.perf_counter()
    res = vf.check_bubble_rates(N, ALPHA, 4.0)
    dt = time.perf_counter() - t0
    ok = res.passed and dt < 120
    sl = ", ".join(f"{k} {v:.3f} (expect {res.reference[k]:g})" for k, v in res.measured.items())
    assert record("9", ok, f"q=4: {sl}, {dt:.1f}s")


def _random_admissible(rng):
    p = float(rng.uniform(2.4, 5.0))
    q = float(rng.uniform(1.75, 2.3))
    ep, eq = eta(N, ALPHA, p), eta(N, ALPHA, q)
    while True:
        c = fb.FiberCoeffs(float(10 ** rng.uniform(-1, 2)), float(10 ** rng.uniform(-1, 2)),
                           float(10 ** rng.uniform(-1, 2)), p, q, ep, eq,
                           float(10 ** rng.uniform(-3, 0)))
        # both roots inside the solver's bracket window [1e-8, 1e8]
        lo = (c.mu * c.eta_q * c.B_q / c.A) ** (1 / (1 - c.qe))
        if lo < 1e-8 or fb.natural_scale(c) > 1e8:
            continue
        if fb.f_prime(c, fb.s_diamond(c)) > 1e-6 * c.A:
            return c


def test_fiber_oracle(record):
    t0 = time.perf_counter()
    rng = np.random.default_rng(12345)
    worst, bad_order = 0.0, 0
    for _ in range(100):
        c = _random_admissible(rng)
        roots = fb.find_roots(c)
        ref = oracles.scan_roots(lambda s: oracles.fiber_derivative(
            c.A, c.B_p, c.B_q, c.p, c.q, c.eta_p, c.eta_q, c.mu, s), 1e-12, 1e12)
        if roots.branch != "two_roots" or len(ref) != 2:
            bad_order += 1
            continue
        worst = max(worst, abs(roots.s_plus - ref[0]) / ref[0], abs(roots.s_minus - ref[1]) / ref[1])
        sec = lambda s: oracles.fiber_second(c.A, c.B_p, c.B_q, c.p, c.q, c.eta_p, c.eta_q,
                                             c.mu, s)
        if not (roots.s_plus < roots.s_diamond < roots.s_minus and sec(roots.s_plus) > 0
                and sec(roots.s_minus) < 0):
            bad_order += 1
    dt = time.perf_counter() - t0
    ok = worst < 1e-8 and bad_order == 0 and dt < 30
    assert record("10", ok, f"max relative root gap {worst:.1e} over 100 triples, "
                            f"{bad_order} ordering/sign failures, {dt:.1f}s")


def test_defocusing(record, cache):
    t0 = time.perf_counter()
    prm = ProblemParams(N=N, alpha=ALPHA, mu=-0.1, p=3, q=2, a=1.0)
    c = problem_constants(prm, cache=cache)
    grid = suggest_grid(prm, "auto")
    rep = minimize_gamma_minus(prm, grid, build_kernel(grid, ALPHA), c)
    dt = time.perf_counter() - t0
    bd = rep.breakdown
    # lambda a^2 = -(1 - eta_p) B_p - mu (1 - eta_q) B_q on the Pohozaev set; the first
    # term dominates the second here
    chain = (1 - prm.eta_p) * bd["B_p"] > abs(prm.mu) * (1 - prm.eta_q) * bd["B_q"]
    lam_id = -((1 - prm.eta_p) * bd["B_p"] + prm.mu * (1 - prm.eta_q) * bd["B_q"]) / bd["mass"]
    chain &= abs(lam_id - rep.lam) < 1e-4 * abs(rep.lam)
    ok = (rep.converged and rep.branch == "single" and rep.level > 0 and rep.lam < 0 and chain
          and rep.residuals["pohozaev"] < 1e-6 and dt < 600)
    assert record("11", ok, f"gamma {rep.level:.6g}, lambda {rep.lam:.5g}, "
                            f"|P|/A {rep.residuals['pohozaev']:.1e}, {dt:.1f}s")
