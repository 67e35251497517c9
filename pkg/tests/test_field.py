import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from choquard import field as F
from choquard.exceptions import GridMismatch, GridTooCoarse, ScaleOutOfRange, ZeroField
from choquard.params import ProblemParams


@pytest.fixture(scope="module")
def grid():
    return F.RadialGrid(3, 20.0, 1024)


@pytest.fixture(scope="module")
def kern(grid):
    return F.build_kernel(grid, 2.0)


def test_weights_integrate_polynomials(grid):
    assert grid.weights.sum() == pytest.approx(4 / 3 * math.pi * 20.0 ** 3, rel=1e-5)
    assert grid.ball_volume(1.0) == pytest.approx(4 / 3 * math.pi, rel=1e-12)


def test_mass_and_gradient_of_gaussian(grid):
    u = F.gaussian(grid, 1.0)
    assert F.mass(u) == pytest.approx((math.pi / 2) ** 1.5, rel=1e-10)
    # int |grad e^{-r^2}|^2 = 3 (pi/2)^{3/2}
    assert F.grad_energy(u) == pytest.approx(3 * (math.pi / 2) ** 1.5, rel=1e-7)


def test_second_order_stencil_is_less_accurate(grid):
    g2 = F.RadialGrid(3, 20.0, 1024, fd_order=2)
    exact = 3 * (math.pi / 2) ** 1.5
    e2 = abs(F.grad_energy(F.gaussian(g2)) - exact)
    e4 = abs(F.grad_energy(F.gaussian(grid)) - exact)
    assert e4 < e2


@pytest.mark.parametrize("N, alpha, r, s", [(3, 2.0, 1.0, 0.5), (3, 0.7, 2.0, 1.9),
                                            (3, 1.0, 0.3, 1.0), (4, 1.5, 1.0, 0.4),
                                            (5, 2.5, 0.8, 1.6), (5, 4.0, 1.0, 0.2)])
def test_angular_kernel_against_quadrature(N, alpha, r, s):
    assert F.angular_kernel(N, alpha, r, s) == pytest.approx(
        oracles.angular_by_quadrature(N, alpha, r, s), rel=1e-9)


def test_newtonian_ball_potential():
    g = F.RadialGrid(3, 4.0, 512)
    f = (g.nodes < 1.0).astype(float)
    # piecewise-constant sources are integrated exactly
    k0 = F.build_kernel(g, 2.0, source_order=0, cache=False)
    assert np.max(np.abs(k0.potential(f) - oracles.ball_potential(g.nodes))) < 1e-13
    # the quadratic interpolant smears the jump over a couple of cells
    k2 = F.build_kernel(g, 2.0)
    assert np.max(np.abs(k2.potential(f) - oracles.ball_potential(g.nodes))) < 1e-5


def test_gaussian_potential(grid, kern):
    V = kern.potential(np.exp(-grid.nodes ** 2))
    inner = grid.nodes < 10
    assert np.max(np.abs(V[inner] - oracles.gaussian_potential(grid.nodes[inner]))) < 1e-8


def test_b_term_of_gaussian(grid, kern):
    u = F.gaussian(grid, math.sqrt(2.0))  # e^{-r^2/2}
    assert F.b_term(u, 2, kern) == pytest.approx(oracles.gaussian_b2(), rel=1e-8)


def test_kernel_symmetric(kern):
    assert kern.self_adjointness_defect() < 1e-12


def test_kernel_cache_reuses(grid, kern):
    assert F.build_kernel(grid, 2.0) is kern


def test_grid_mismatch(grid, kern):
    other = F.gaussian(F.RadialGrid(3, 10.0, 256))
    with pytest.raises(GridMismatch):
        F.b_term(other, 2, kern)


def test_scaling_laws(grid, kern):
    prm = ProblemParams(N=3, alpha=2.0, mu=1.0, p=3, q=2)
    u = F.gaussian(grid, 1.0)
    s = 1.7
    v = F.scale_field(u, s)
    assert F.mass(v) == pytest.approx(F.mass(u), rel=1e-7)
    assert F.grad_energy(v) == pytest.approx(s * F.grad_energy(u), rel=1e-6)
    assert F.b_term(v, 3, kern) == pytest.approx(s ** prm.p_eta_p * F.b_term(u, 3, kern), rel=1e-6)


def test_scale_out_of_range(grid):
    u = F.gaussian(grid, 5.0)
    with pytest.raises(ScaleOutOfRange):
        F.scale_field(u, 1e-3)


def test_normalize_zero():
    g = F.RadialGrid(3, 5.0, 64)
    with pytest.raises(ZeroField):
        F.normalize_mass(F.RadialField(g, np.zeros(64)), 1.0)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000))
def test_rearrangement_properties(seed):
    g = F.RadialGrid(3, 10.0, 256)
    k = F.build_kernel(g, 2.0)
    rng = np.random.default_rng(seed)
    u = F.RadialField(g, np.abs(F.random_field(g, seed).values
                                 * (1 + 0.5 * np.sin(rng.uniform(1, 5) * g.nodes))))
    v = F.rearrange_decreasing(u)
    assert np.all(np.diff(v.values) <= 1e-14)
    assert F.mass(v) == pytest.approx(F.mass(u), rel=1e-10)
    assert F.b_term(v, 2, k) >= F.b_term(u, 2, k) * (1 - 1e-6)


def test_bubble_too_coarse():
    g = F.RadialGrid(3, 2.5, 64)
    with pytest.raises(GridTooCoarse):
        F.bubble(g, 0.05)


def test_bubble_gradient_defect_halves():
    g = F.RadialGrid(3, 2.5, 2048)
    SN = oracles.sobolev_closed_form(3) ** 1.5
    d1, d2 = (F.grad_energy(F.bubble(g, e)) - SN for e in (0.1, 0.05))
    assert d1 > d2 > 0
    assert d1 / d2 == pytest.approx(2.0, rel=0.05)


def test_save_load_roundtrip(tmp_path, grid):
    u = F.random_field(grid, 3)
    F.save_field(u, tmp_path / "u.csv")
    back = F.load_field(tmp_path / "u.csv")
    assert back.grid == grid
    assert np.array_equal(back.values, u.values)


def test_load_onto_other_grid(tmp_path, grid):
    u = F.gaussian(grid, 1.0)
    F.save_field(u, tmp_path / "u.csv")
    g2 = F.RadialGrid(3, 10.0, 777)
    v = F.load_field(tmp_path / "u.csv", g2)
    assert np.max(np.abs(v.values - np.exp(-g2.nodes ** 2))) < 1e-6


def test_resample_dimension_mismatch(grid):
    with pytest.raises(GridMismatch):
        F.resample(F.gaussian(grid), F.RadialGrid(4, 10.0, 100))
