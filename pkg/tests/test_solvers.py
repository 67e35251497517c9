import json
from fractions import Fraction

import numpy as np
import pytest
from sklearn.base import clone

from choquard import solvers as S
from choquard.constants import ConstantsCache
from choquard.exceptions import MaxIterExceeded, RegimeUnsupported, RegimeViolation
from choquard.field import (RadialGrid, build_kernel, gaussian, mass, normalize_mass,
                            random_field)
from choquard.params import ProblemParams

MU = 385.27  # half of the largest admissible coupling for q=2, p=3, a=1


@pytest.fixture(scope="module")
def cache(tmp_path_factory):
    return ConstantsCache(tmp_path_factory.mktemp("c") / "c.json")


@pytest.fixture(scope="module")
def prm():
    return ProblemParams(N=3, alpha=2.0, mu=MU, p=3, q=2, a=1.0)


@pytest.fixture(scope="module")
def consts(prm, cache):
    return S.problem_constants(prm, cache=cache)


@pytest.fixture(scope="module")
def plus(prm, consts):
    grid = S.suggest_grid(prm, "plus")
    return S.minimize_gamma_plus(prm, grid, build_kernel(grid, 2.0), consts)


def test_ground_state_estimator():
    est = S.GroundStateSolver(N=3, alpha=2.0, r=2, grid=RadialGrid(3, 30.0, 1024)).fit()
    assert est.residual_ < 1e-8
    assert est.gn_constant_ == pytest.approx(2 / est.norm_ ** 2)
    assert est.gn_constant_ == pytest.approx(0.0524277, rel=1e-4)
    assert clone(est).get_params()["r"] == 2


def test_ground_state_rejects_critical():
    with pytest.raises(RegimeUnsupported):
        S.petviashvili_ground_state(3, 2.0, 5)


def test_ground_state_profile_decreasing():
    W, _, _ = S.petviashvili_ground_state(3, 2.0, 3, RadialGrid(3, 30.0, 1024))
    assert np.all(W.values > 0)
    assert np.all(np.diff(W.values) <= 1e-12)


def test_complete_constants(consts):
    assert consts["xi"] == pytest.approx(770.543, rel=1e-5)
    assert consts["k1"] > consts["plus_bound"] > 0
    assert consts["a1"] > 1
    assert consts["critical_level"] == pytest.approx(5.1283968819876, rel=1e-12)


def test_plus_branch(plus, consts):
    assert plus.converged and plus.branch == "plus"
    assert plus.level == pytest.approx(-12.9902, rel=1e-4)
    assert plus.lam < 0
    assert plus.residuals["pohozaev"] < 1e-6
    assert plus.residuals["euler_lagrange"] < 1e-5
    assert plus.residuals["multiplier_gap"] < 1e-6
    assert plus.breakdown["A"] < consts["plus_bound"]
    assert mass(plus.field) == pytest.approx(1.0, rel=1e-10)
    assert plus.fiber_second > 0


def test_minus_branch(prm, consts):
    grid = S.suggest_grid(prm, "minus")
    rep = S.minimize_gamma_minus(prm, grid, build_kernel(grid, 2.0), consts)
    assert rep.converged and rep.branch == "minus"
    assert rep.level == pytest.approx(48.7325, rel=1e-4)
    assert rep.fiber_second < 0 and rep.lam < 0


def test_deterministic(prm, consts, plus):
    grid = plus.field.grid
    again = S.minimize_gamma_plus(prm, grid, build_kernel(grid, 2.0), consts)
    assert again.level == plus.level
    assert np.array_equal(again.field.values, plus.field.values)


def test_plus_refuses_large_mass(prm, consts):
    big = prm.replace(a=1.5 * consts["a1"])
    grid = RadialGrid(3, 10.0, 512)
    with pytest.raises(RegimeViolation):
        S.minimize_gamma_plus(big, grid, build_kernel(grid, 2.0), consts)


def test_plus_refuses_mass_critical(consts):
    crit = ProblemParams(N=3, alpha=2.0, mu=1.0, p=3, q=Fraction(7, 3), a=1.0)
    grid = RadialGrid(3, 10.0, 512)
    with pytest.raises(RegimeUnsupported):
        S.minimize_gamma_plus(crit, grid, build_kernel(grid, 2.0), consts)


def test_max_iter_exceeded(prm, consts):
    grid = S.suggest_grid(prm, "minus")
    cfg = S.SolveConfig(max_iter=2)
    with pytest.raises(MaxIterExceeded):
        S.minimize_gamma_minus(prm, grid, build_kernel(grid, 2.0), consts, cfg)


def test_solve_config_validation():
    with pytest.raises(ValueError):
        S.SolveConfig(tau=0)
    with pytest.raises(ValueError):
        S.SolveConfig(max_iter=0)


def test_report_write(tmp_path, plus):
    plus.write(tmp_path)
    doc = json.loads((tmp_path / "report.json").read_text())
    assert doc["level"] == plus.level and doc["converged"]
    header = (tmp_path / "trace.csv").read_text().splitlines()[0]
    assert header == "iter,E,A,P,grad_norm"
    assert (tmp_path / "solution.csv").exists()


def test_estimator_warm_start(prm, consts, plus):
    est = S.NormalizedSolutionSolver(params=prm, branch="plus", constants=consts)
    est.fit(u0=random_field(plus.field.grid, 7))
    assert est.energy_ == pytest.approx(plus.level, rel=1e-6)
    assert est.multiplier_ < 0


def test_pohozaev_projector(prm):
    grid = RadialGrid(3, 10.0, 512)
    k = build_kernel(grid, 2.0)
    proj = S.PohozaevProjector(params=prm.replace(mu=0.0), kernel=k)
    fields = [normalize_mass(gaussian(grid, w), 1.0) for w in (1.0, 1.5)]
    out = proj.fit_transform(fields)
    assert len(out) == 2 and len(proj.scales_) == 2
    for v in out:
        assert mass(v) == pytest.approx(1.0, rel=1e-4)


def test_suggest_grid_tracks_scale(prm):
    g_plus = S.suggest_grid(prm, "plus")
    g_minus = S.suggest_grid(prm, "minus")
    assert g_plus.r_max > g_minus.r_max


def test_sweep_p_defocusing(cache):
    prm = ProblemParams(N=3, alpha=2.0, mu=-0.1, p=3, q=2, a=1.0)
    rep = S.sweep_p(prm, [3, 3.5, 4], "auto", cache=cache)
    assert rep.summary["n_converged"] == 3
    assert rep.summary["all_positive"]
    assert rep.summary["critical_level"] == pytest.approx(5.1283968819876, rel=1e-12)


def test_sweep_csv(tmp_path, prm, consts, cache):
    rep = S.sweep_mu(prm, [0.1, 0.01], "plus", cache=cache, constants=consts)
    rep.to_csv(tmp_path / "s.csv")
    lines = (tmp_path / "s.csv").read_text().splitlines()
    assert len(lines) == 3
    assert rep.summary["level_trend"] == "increasing"
