import math

import numpy as np
import pytest

import forcedmaps as fm


def test_eval_vanishing_offset(fam1):
    # at theta = 3/4 the forcing term vanishes, so 0 is a fixed value
    assert fm.evaluate(fam1, 0.0, 0.75, 0.0) == pytest.approx(0.0, abs=1e-15)


def test_eval_2d_offsets(fam2):
    rng = np.random.default_rng(2)
    for _ in range(50):
        beta = rng.uniform(0, 1)
        x = rng.uniform(-1, 3)
        at_m1 = fm.evaluate(fam2, beta, (0.25, 0.25), x)
        assert at_m1 == pytest.approx(math.atan(100 * x) - 2 * beta - 1.0, abs=1e-14)
        at_m2 = fm.evaluate(fam2, beta, (0.25, 0.75), x)
        assert at_m2 == pytest.approx(math.atan(100 * x) - 2 * beta, abs=1e-14)


def test_eval_escape_value(fam1):
    v = fm.evaluate(fam1, 1.0, 0.0, 2.0)
    assert v == pytest.approx(-0.9342036315390616, abs=1e-12)
    assert v < 0.0


def test_deriv_x_at_zero(fam1):
    assert fm.deriv_x(fam1, 0.3, 0.1, 0.0) == pytest.approx(100.0, abs=1e-12)


def test_deriv_beta_constant(fam1, fam2):
    rng = np.random.default_rng(3)
    for _ in range(20):
        beta, x = rng.uniform(0, 1), rng.uniform(0, 2)
        assert fm.deriv_beta(fam1, beta, rng.uniform(), x) == -2.0
        assert fm.deriv_beta(fam2, beta, tuple(rng.uniform(size=2)), x) == -2.0


def test_derivatives_match_finite_differences(fam1):
    rng = np.random.default_rng(4)
    n = 1000
    beta = rng.uniform(0, 1, n)
    th = rng.uniform(0, 1, n)
    x = rng.uniform(-1, 3, n)
    h = 1e-6
    fd_x = (fam1.eval(beta, th, x + h) - fam1.eval(beta, th, x - h)) / (2 * h)
    an_x = fam1.deriv_x(beta, th, x)
    assert np.max(np.abs(fd_x - an_x) / np.maximum(np.abs(an_x), 1e-8)) < 1e-5

    fd_xx = (fam1.deriv_x(beta, th, x + h) - fam1.deriv_x(beta, th, x - h)) / (2 * h)
    an_xx = fam1.deriv_xx(beta, th, x)
    keep = np.abs(an_xx) > 1e-8
    assert np.max(np.abs(fd_xx - an_xx)[keep] / np.abs(an_xx)[keep]) < 1e-5

    fd_b = (fam1.eval(beta + h, th, x) - fam1.eval(beta - h, th, x)) / (2 * h)
    an_b = fam1.deriv_beta(beta, th, x)
    assert np.max(np.abs(fd_b - an_b) / 2.0) < 1e-5


def test_scalar_fast_paths_agree(fam1, fam2):
    rng = np.random.default_rng(12)
    for fam, th in ((fam1, 0.37), (fam2, np.array([0.37, 0.81]))):
        for _ in range(20):
            beta, x = rng.uniform(0, 1), rng.uniform(0, 2)
            assert fam.scalar_eval(beta, th, x) == pytest.approx(
                float(fam.eval(beta, th, x)), abs=1e-14)
            assert fam.scalar_deriv_x(beta, th, x) == pytest.approx(
                float(fam.deriv_x(beta, th, x)), abs=1e-14)
            y = fam.scalar_eval(beta, th, x)
            assert fam.scalar_inverse(beta, th, y) == pytest.approx(
                float(fam.inverse(beta, th, y)), abs=1e-12)


def test_inverse_roundtrip(fam1):
    rng = np.random.default_rng(5)
    for _ in range(1000):
        beta, th, x = rng.uniform(0, 1), rng.uniform(), rng.uniform(0, 2)
        y = fm.evaluate(fam1, beta, th, x)
        back = fm.inverse(fam1, beta, th, y)
        assert back is not None
        assert abs(back - x) < 1e-10


def test_inverse_fixed_zero(fam1):
    assert fm.inverse(fam1, 0.0, 0.75, 0.0) == pytest.approx(0.0, abs=1e-15)


def test_inverse_no_preimage(fam1):
    # target 1.6 above the offset exceeds the arctan range
    beta, th = 0.0, 0.0
    offset = 2 * beta + 0.5 * (math.sin(0.0) + 1.0)
    assert fm.inverse(fam1, beta, th, 1.6 - offset + 0.05) is None
    assert fm.inverse(fam1, beta, th, 1.5) is None


def test_monotonicity_property(fam1):
    rng = np.random.default_rng(6)
    n = 10000
    beta = rng.uniform(0, 1, n)
    th = rng.uniform(0, 1, n)
    x1 = rng.uniform(0, 2, n)
    x2 = x1 + rng.uniform(1e-6, 0.5, n)
    assert (fam1.eval(beta, th, x1) < fam1.eval(beta, th, x2)).all()


def test_concavity_on_strip(fam1, fam2):
    rng = np.random.default_rng(7)
    x = rng.uniform(1e-6, 2.0, 1000)
    assert (fam1.deriv_xx(0.3, rng.uniform(size=1000), x) < 0).all()
    th2 = rng.uniform(size=(1000, 2))
    assert (fam2.deriv_xx(0.3, th2, x) < 0).all()


def test_beta_monotone_decreasing(fam1):
    rng = np.random.default_rng(8)
    th = rng.uniform(size=500)
    x = rng.uniform(0, 2, 500)
    assert (fam1.eval(0.4, th, x) < fam1.eval(0.1, th, x)).all()


def test_orientation_validation_rejects_wrong_declaration():
    convex_up = lambda beta, th, x: np.square(np.asarray(x) + 2.0) + np.asarray(beta)
    with pytest.raises(fm.ValidationFailed):
        fm.CallableFibres(convex_up, fm.GammaBoundary.constant(0.0, 2.0),
                          orientation="concave_decreasing_in_beta")


def test_non_monotone_rejected():
    bump = lambda beta, th, x: -np.square(np.asarray(x) - 1.0)
    with pytest.raises(fm.ValidationFailed):
        fm.CallableFibres(bump, fm.GammaBoundary.constant(0.0, 2.0), orientation="none")


def test_affine_slope_positive_required():
    with pytest.raises(fm.ConfigError):
        fm.AffineFibres(-0.5)


def test_gamma_boundary_order_required():
    with pytest.raises(fm.ConfigError):
        fm.GammaBoundary.constant(2.0, 0.0)


def test_gamma_compatibility_direction(rotation, fam1):
    # the forward transform of the upper curve moves down, the inverse
    # transform of the lower curve moves up; this is the trapping pair
    # for the concave orientation
    th = np.arange(64) / 64.0
    for beta in (0.0, 0.3, 0.9):
        rep = fm.verify_gamma_compatibility(rotation, fam1, beta, th)
        assert rep["compatible"]
        assert rep["forward_upper_max_excess"] <= 1e-12
        assert rep["inverse_lower_min_margin"] >= -1e-12


def test_table_family_roundtrip():
    xs = np.linspace(0.0, 2.0, 41)
    ys = np.arctan(3.0 * xs) + 0.1 * xs
    fam = fm.TableFibres(xs, ys)
    rng = np.random.default_rng(9)
    for _ in range(100):
        beta, x = rng.uniform(0, 0.2), rng.uniform(0, 2)
        y = fm.evaluate(fam, beta, 0.0, x)
        assert fm.inverse(fam, beta, 0.0, y) == pytest.approx(x, abs=1e-9)
    # extrapolation stays monotone outside the table
    assert fm.evaluate(fam, 0.0, 0.0, 2.5) > fm.evaluate(fam, 0.0, 0.0, 2.0)
    assert fm.evaluate(fam, 0.0, 0.0, -0.5) < fm.evaluate(fam, 0.0, 0.0, 0.0)


def test_table_rejects_non_monotone():
    with pytest.raises(fm.ConfigError):
        fm.TableFibres([0.0, 1.0, 2.0], [0.0, 1.0, 0.5])


def test_affine_derivatives_exact():
    fam = fm.AffineFibres(0.5, 0.75)
    assert fm.deriv_x(fam, 0.2, 0.0, 1.3) == 0.5
    assert fm.deriv_xx(fam, 0.2, 0.0, 1.3) == 0.0
    assert fm.deriv_beta(fam, 0.2, 0.0, 1.3) == -2.0
    assert fm.inverse(fam, 0.2, 0.0, fm.evaluate(fam, 0.2, 0.0, 1.3)) == pytest.approx(1.3, abs=1e-14)
