import csv
import math

import pytest
from hypothesis import assume, given, settings, strategies as st

import oracles
from choquard import fiber as fb
from choquard.exceptions import BranchUnavailable, DomainError, RegimeViolation
from choquard.field import RadialGrid, breakdown, build_kernel, gaussian, normalize_mass
from choquard.params import ProblemParams, eta


def coeffs(A=10.0, Bp=5.0, Bq=3.0, p=3.0, q=2.0, mu=1.0):
    return fb.FiberCoeffs(A, Bp, Bq, p, q, eta(3, 2.0, p), eta(3, 2.0, q), mu)


def test_domain():
    with pytest.raises(DomainError):
        fb.f_eval(coeffs(), 0.0)
    with pytest.raises(DomainError):
        coeffs(A=-1.0)


def test_derivatives_by_differences():
    c = coeffs()
    s, h = 1.3, 1e-6
    assert fb.f_prime(c, s) == pytest.approx((fb.f_eval(c, s + h) - fb.f_eval(c, s - h)) / (2 * h),
                                             rel=1e-7)
    assert fb.f_second(c, s) == pytest.approx(
        (fb.f_prime(c, s + h) - fb.f_prime(c, s - h)) / (2 * h), rel=1e-6)


def test_scaled_matches_field_scaling():
    c = coeffs()
    s, t = 0.7, 2.1
    assert fb.f_eval(c.scaled(s), t) == pytest.approx(fb.f_eval(c, s * t), rel=1e-13)


def test_s_diamond_zero_of_second_derivative():
    c = coeffs(mu=3.0)
    assert abs(fb.f_second(c, fb.s_diamond(c))) < 1e-12 * c.A


@settings(max_examples=200, deadline=None)
@given(st.floats(-1, 2), st.floats(-1, 2), st.floats(-1, 2), st.floats(2.45, 4.9),
       st.floats(1.7, 2.25), st.floats(-3, 0))
def test_two_roots_against_scan(lA, lBp, lBq, p, q, lmu):
    c = coeffs(10 ** lA, 10 ** lBp, 10 ** lBq, p, q, 10 ** lmu)
    assume((c.mu * c.eta_q * c.B_q / c.A) ** (1 / (1 - c.qe)) > 1e-8)
    assume(fb.natural_scale(c) < 1e8)
    assume(fb.f_prime(c, fb.s_diamond(c)) > 1e-6 * c.A)
    roots = fb.find_roots(c)
    ref = oracles.scan_roots(lambda s: oracles.fiber_derivative(
        c.A, c.B_p, c.B_q, c.p, c.q, c.eta_p, c.eta_q, c.mu, s), 1e-12, 1e12, 50001)
    assert roots.branch == "two_roots" and len(ref) == 2
    assert roots.s_plus == pytest.approx(ref[0], rel=1e-8)
    assert roots.s_minus == pytest.approx(ref[1], rel=1e-8)
    assert roots.s_plus < roots.s_diamond < roots.s_minus
    assert roots.f_plus < roots.f_minus


def test_no_roots_when_coupling_large():
    c = coeffs(A=1.0, Bp=5.0, Bq=5.0, mu=50.0)
    r = fb.find_roots(c)
    assert r.branch == "none"
    with pytest.raises(BranchUnavailable):
        fb.select_root(r, "plus")


def test_degenerate_flag_raises():
    c = coeffs(mu=1.0)
    sd = fb.s_diamond(c)
    # tune A so that f'(s_diamond) = 0 exactly
    A0 = c.A - fb.f_prime(c, sd)
    c2 = coeffs(A=A0, mu=1.0)
    r = fb.find_roots(c2)
    assert r.branch == "none" and r.flags
    with pytest.raises(RegimeViolation):
        fb.select_root(r, "minus")


def test_mass_critical_closed_form():
    c = coeffs(q=7 / 3, mu=0.5)
    r = fb.find_roots(c)
    assert r.branch == "single_max"
    assert abs(fb.f_prime(c, r.s_minus)) < 1e-10 * c.A


@pytest.mark.parametrize("q, mu", [(3.0, 2.0), (2.0, -0.5), (2.0, 0.0)])
def test_single_max(q, mu):
    c = coeffs(p=4.0, q=q, mu=mu)
    r = fb.find_roots(c)
    assert r.branch == "single_max"
    assert abs(fb.f_prime(c, r.s_minus)) < 1e-10 * c.A
    assert fb.f_second(c, r.s_minus) < 0
    assert fb.select_root(r, "auto") == r.s_minus


def test_extreme_scales_bracket():
    c = coeffs(A=1e6, Bp=1e-3, Bq=1e-3, p=4.0, q=3.0, mu=1.0)
    r = fb.find_roots(c)
    assert abs(fb.f_prime(c, r.s_minus)) < 1e-10 * c.A


def test_project_to_pohozaev():
    g = RadialGrid(3, 20.0, 512)
    k = build_kernel(g, 2.0)
    prm = ProblemParams(N=3, alpha=2.0, mu=0.0, p=3, q=2)
    u = normalize_mass(gaussian(g, 1.0), 4.0)
    v, s = fb.project_to_pohozaev(u, prm, k)
    bd = breakdown(v, prm, k)
    assert 0.1 < s < 10
    assert abs(bd.P) < 1e-5 * bd.A


def test_fiber_csv(tmp_path):
    fb.write_fiber_csv(coeffs(), tmp_path / "f.csv", n=50)
    rows = list(csv.reader((tmp_path / "f.csv").open()))
    assert rows[0] == ["s", "f", "f_prime", "f_second"]
    assert len(rows) == 51
    assert all(math.isfinite(float(x)) for x in rows[10])
