import math

import numpy as np
import pytest

import forcedmaps as fm

from conftest import BETA_C_M1


def arctan_family(alpha, offset):
    def g(beta, x):
        return math.atan(alpha * x) - 2.0 * beta - offset

    def g_x(beta, x):
        return alpha / (1.0 + (alpha * x) ** 2)

    return g, g_x


def test_closed_form_value():
    assert fm.closed_form_betac_arctan(100.0, 1.0) == pytest.approx(BETA_C_M1, abs=1e-12)


def test_closed_form_offset_shift():
    base = fm.closed_form_betac_arctan(100.0, 1.0)
    assert fm.closed_form_betac_arctan(100.0, 0.0) == pytest.approx(base + 0.5, abs=1e-12)
    for eps in (1e-3, 0.11, 0.7):
        assert fm.closed_form_betac_arctan(100.0, 1.0 + eps) == pytest.approx(
            base - eps / 2.0, abs=1e-12)


def test_tangency_unit_slope():
    x_star = fm.arctan_tangency_point(100.0)
    assert x_star == pytest.approx(math.sqrt(99.0) / 100.0, abs=1e-15)
    assert 100.0 / (1.0 + (100.0 * x_star) ** 2) == pytest.approx(1.0, abs=1e-12)


def test_domain_error_alpha_le_one():
    with pytest.raises(fm.DomainError):
        fm.closed_form_betac_arctan(1.0, 0.0)
    with pytest.raises(fm.DomainError):
        fm.closed_form_betac_arctan(0.5, 0.0)


@pytest.mark.parametrize("alpha", [5.0, 20.0, 100.0, 200.0])
@pytest.mark.parametrize("offset", [0.0, 0.5, 1.0, 2.0])
def test_solver_agrees_with_closed_form(alpha, offset):
    g, g_x = arctan_family(alpha, offset)
    sol = fm.solve_saddle_node_1d(g, g_x, (0.0, 2.0), beta_range=(-5.0, 5.0))
    assert sol.beta_star == pytest.approx(
        fm.closed_form_betac_arctan(alpha, offset), abs=1e-10)
    assert sol.x_star == pytest.approx(fm.arctan_tangency_point(alpha), abs=1e-8)


def test_solver_residuals_tight():
    g, g_x = arctan_family(100.0, 1.0)
    sol = fm.solve_saddle_node_1d(g, g_x, (0.0, 2.0))
    assert sol.residual_fixed_point < 1e-12
    assert sol.residual_unit_slope < 1e-12


def test_quadratic_cap_algebra():
    # g = -(x-1)^2 + c - beta has unit slope at x = 1/2 and a tangency
    # there when -1/4 + c - beta = 1/2, i.e. beta = c - 3/4
    c = 1.3

    def g(beta, x):
        return -((x - 1.0) ** 2) + c - beta

    def g_x(beta, x):
        return -2.0 * (x - 1.0)

    sol = fm.solve_saddle_node_1d(g, g_x, (0.0, 1.0))
    assert sol.x_star == pytest.approx(0.5, abs=1e-12)
    assert sol.beta_star == pytest.approx(c - 0.75, abs=1e-12)
    # concavity at the tangency point
    h = 1e-5
    assert (g_x(sol.beta_star, sol.x_star + h) - g_x(sol.beta_star, sol.x_star - h)) / (2 * h) < 0


def test_no_bracket_when_endpoints_do_not_straddle():
    g, g_x = arctan_family(100.0, 1.0)
    with pytest.raises(fm.NoBracket):
        fm.solve_saddle_node_1d(g, g_x, (0.0, 2.0), beta_range=(0.5, 1.0))
    with pytest.raises(fm.NoBracket):
        fm.solve_saddle_node_1d(g, g_x, (0.0, 2.0), beta_range=(-2.0, 0.0))


def test_no_bracket_when_slope_never_reaches_one():
    def g(beta, x):
        return 0.5 * x - beta

    def g_x(beta, x):
        return 0.5

    with pytest.raises(fm.NoBracket):
        fm.solve_saddle_node_1d(g, g_x, (0.0, 2.0))


def test_identity_base_per_fibre_values(fam1):
    th = np.arange(100) / 100.0
    res = fm.identity_base_betac(fam1, th)
    expect = np.array([fm.closed_form_betac_arctan(100.0, 0.5 * (math.sin(2 * math.pi * t) + 1.0))
                       for t in th])
    assert np.max(np.abs(res.beta_star - expect)) < 1e-10
    assert res.argmin == pytest.approx(0.25)
    assert res.argmax == pytest.approx(0.75)
    assert res.beta_c == pytest.approx(BETA_C_M1, abs=1e-10)
    assert res.beta_hat == pytest.approx(BETA_C_M1 + 0.5, abs=1e-10)


def test_identity_base_constant_fibres():
    fam = fm.arctan_1d(100.0, 0.0)  # no forcing: all fibres identical
    res = fm.identity_base_betac(fam, np.arange(10) / 10.0)
    assert res.beta_c == pytest.approx(res.beta_hat, abs=1e-12)


def test_offset_perturbation_linearity(fam1):
    # the offset enters the fixed-point equation linearly against 2*beta
    th = np.array([0.1])
    base = fm.identity_base_betac(fam1, th).beta_c

    shifted = fm.arctan_1d(100.0, 0.5, beta_range=(-1.0, 1.0))
    # same theta, forcing term raised by eps via the beta shift equivalence
    g = lambda beta, x: float(shifted.eval(beta, 0.1, x)) - 0.02
    g_x = lambda beta, x: float(shifted.deriv_x(beta, 0.1, x))
    sol = fm.solve_saddle_node_1d(g, g_x, (0.0, 2.0))
    assert sol.beta_star == pytest.approx(base - 0.01, abs=1e-10)
