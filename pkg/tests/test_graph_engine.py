import math

import numpy as np
import pytest

import forcedmaps as fm

from conftest import BETA_C_M1, BETA_C_QP

# fixed point of x -> arctan(100 x), frozen from fixed-point iteration
ATAN100_FIXED_POINT = 1.5644042039811545


def newton_fixed_point(alpha, offset, x0=1.5):
    """Independent per-fibre oracle: solve arctan(alpha x) - offset = x."""
    x = x0
    for _ in range(100):
        f = math.atan(alpha * x) - offset - x
        fp = alpha / (1.0 + (alpha * x) ** 2) - 1.0
        step = f / fp
        x -= step
        if abs(step) < 1e-14:
            break
    return x


def test_pullback_depth_zero_returns_boundary(rotation, fam1):
    assert fm.pullback_graph_point(rotation, fam1, 0.2, 0.3, 0, fm.UPPER) == 2.0
    assert fm.pullback_graph_point(rotation, fam1, 0.2, 0.3, 0, fm.LOWER) == 0.0


def test_identity_unforced_fixed_point(identity, fam1):
    # at theta = 3/4 the forcing vanishes and beta = 0 leaves pure arctan
    v = fm.pullback_graph_point(identity, fam1, 0.0, 0.75, 200, fm.UPPER)
    assert v == pytest.approx(ATAN100_FIXED_POINT, abs=1e-9)


def test_escape_at_beta_one(rotation, fam1):
    th = fm.sample_thetas(rotation, 64)
    fld = fm.compute_graph_field(rotation, fam1, 1.0, th, 50, fm.UPPER)
    assert fld.escaped.all()
    assert np.isnan(fld.values).all()


def test_identity_field_matches_newton_oracle(identity, fam1):
    th = fm.sample_thetas(identity, 50)
    fld = fm.compute_graph_field(identity, fam1, 0.1, th, 3000, fm.UPPER)
    assert not fld.escaped.any()
    for i, t in enumerate(th):
        offset = 0.2 + 0.5 * (math.sin(2 * math.pi * t) + 1.0)
        assert fld.values[i] == pytest.approx(newton_fixed_point(100.0, offset), abs=1e-8)


@pytest.mark.parametrize("n", [50, 200])
def test_depth_monotonicity(rotation, fam1, n):
    th = fm.sample_thetas(rotation, 128)
    up_n = fm.compute_graph_field(rotation, fam1, 0.265, th, n, fm.UPPER).values
    up_n1 = fm.compute_graph_field(rotation, fam1, 0.265, th, n + 1, fm.UPPER).values
    assert (up_n1 <= up_n + 1e-12).all()
    lo_n = fm.compute_graph_field(rotation, fam1, 0.265, th, n, fm.LOWER).values
    lo_n1 = fm.compute_graph_field(rotation, fam1, 0.265, th, n + 1, fm.LOWER).values
    assert (lo_n1 >= lo_n - 1e-12).all()


def test_values_stay_in_strip(rotation, fam1):
    th = fm.sample_thetas(rotation, 500)
    for which in (fm.UPPER, fm.LOWER):
        fld = fm.compute_graph_field(rotation, fam1, 0.265, th, 2000, which)
        v = fld.values[fld.alive]
        assert (v >= -1e-9).all() and (v <= 2.0 + 1e-9).all()


def test_uniform_separation_below_critical(rotation, fam1):
    th = fm.sample_thetas(rotation, 500)
    lo = fm.compute_graph_field(rotation, fam1, 0.265, th, 2000, fm.LOWER)
    up = fm.compute_graph_field(rotation, fam1, 0.265, th, 2000, fm.UPPER)
    rep = fm.pinching_report(lo, up)
    assert rep.classification == "uniformly_separated"
    assert rep.min_gap > 0.01


def test_weak_pinching_near_critical(rotation, fam1):
    th = fm.sample_thetas(rotation, 2000)
    lo = fm.compute_graph_field(rotation, fam1, BETA_C_QP, th, 10000, fm.LOWER)
    up = fm.compute_graph_field(rotation, fam1, BETA_C_QP, th, 10000, fm.UPPER)
    rep = fm.pinching_report(lo, up)
    assert rep.min_gap < 1e-3
    assert rep.classification == "weakly_pinched"
    assert rep.median_gap > 10 * rep.min_gap
    fracs = [rep.fraction_below[k] for k in sorted(rep.fraction_below, key=float)]
    assert all(a <= b for a, b in zip(fracs, fracs[1:]))


def test_pinching_identical_fields_collapse(rotation, fam1):
    th = fm.sample_thetas(rotation, 100)
    up = fm.compute_graph_field(rotation, fam1, 0.2, th, 500, fm.UPPER)
    rep = fm.pinching_report(up, up)
    assert rep.classification == "collapsed"
    assert rep.min_gap == 0.0


def test_pinching_mismatch_raises(rotation, fam1):
    th = fm.sample_thetas(rotation, 50)
    a = fm.compute_graph_field(rotation, fam1, 0.2, th, 200, fm.LOWER)
    b = fm.compute_graph_field(rotation, fam1, 0.21, th, 200, fm.UPPER)
    with pytest.raises(fm.MismatchedFields):
        fm.pinching_report(a, b)
    c = fm.compute_graph_field(rotation, fam1, 0.2, th, 200, fm.UPPER)
    c.escaped = c.escaped.copy()
    c.escaped[0] = True
    with pytest.raises(fm.MismatchedFields):
        fm.pinching_report(a, c)


def test_pinching_all_escaped_raises(rotation, fam1):
    th = fm.sample_thetas(rotation, 30)
    lo = fm.compute_graph_field(rotation, fam1, 1.0, th, 60, fm.LOWER)
    up = fm.compute_graph_field(rotation, fam1, 1.0, th, 60, fm.UPPER)
    with pytest.raises(fm.GraphEscaped):
        fm.pinching_report(lo, up)


def test_approximate_invariance(rotation, fam1):
    beta = BETA_C_QP - 0.01
    th = fm.sample_thetas(rotation, 300)
    th_next = rotation.forward_many(th)
    for which in (fm.UPPER, fm.LOWER):
        here = fm.compute_graph_field(rotation, fam1, beta, th, 10000, which)
        there = fm.compute_graph_field(rotation, fam1, beta, th_next, 10000, which)
        pushed = fam1.eval(beta, th, here.values)
        assert np.max(np.abs(pushed - there.values)) < 1e-8


def test_two_graph_attraction_property(rotation, fam1):
    # any start strictly between the graphs converges to the attracting
    # upper graph; no third graph can sit in between
    beta = 0.265
    rng = np.random.default_rng(42)
    failures = 0
    for _ in range(100):
        th = float(rng.uniform())
        lo = fm.pullback_graph_point(rotation, fam1, beta, th, 2048, fm.LOWER)
        up = fm.pullback_graph_point(rotation, fam1, beta, th, 2048, fm.UPPER)
        delta = 0.01 * (up - lo)
        x = lo + delta + rng.uniform() * (2.0 - lo - delta)
        xg = up
        t = th
        converged = False
        for _ in range(10000):
            if abs(x - xg) < 1e-6:
                converged = True
                break
            x = fam1.scalar_eval(beta, t, x)
            xg = fam1.scalar_eval(beta, t, xg)
            t = (t + fm.GOLDEN_MEAN) % 1.0
        failures += 0 if converged else 1
    assert failures == 0


def test_lyapunov_affine_exact(rotation):
    fam = fm.AffineFibres(0.5, 0.75)
    lam = fm.lyapunov(rotation, fam, 0.0, 0.3, fm.UPPER, 5000)
    assert lam == pytest.approx(math.log(0.5), abs=1e-12)


def test_lyapunov_signs_below_critical(rotation, fam1):
    beta = BETA_C_QP - 0.01
    lam_u = fm.lyapunov(rotation, fam1, beta, 0.0, fm.UPPER, 20000)
    lam_l = fm.lyapunov(rotation, fam1, beta, 0.0, fm.LOWER, 20000)
    assert lam_u < -0.05
    assert lam_l > 0.05


def test_lyapunov_escape_raises(rotation, fam1):
    with pytest.raises(fm.GraphEscaped):
        fm.lyapunov(rotation, fam1, 0.9, 0.0, fm.UPPER, 1000)


def test_lyapunov_matches_composition_derivative_affine(rotation):
    # mild contraction keeps the 1000-step composition derivative
    # representable, so a finite difference can recover it
    slope = math.exp(-0.005)
    fam = fm.AffineFibres(slope, 0.1, gamma=fm.GammaBoundary.constant(-5.0, 25.0))
    n = 1000
    lam = fm.lyapunov(rotation, fam, 0.0, 0.2, fm.UPPER, n)
    x0 = fm.pullback_graph_point(rotation, fam, 0.0, 0.2, 256, fm.UPPER)
    h = 1e-6
    xp, xm, t = x0 + h, x0 - h, 0.2
    for _ in range(n):
        xp = fam.scalar_eval(0.0, t, xp)
        xm = fam.scalar_eval(0.0, t, xm)
        t = (t + fm.GOLDEN_MEAN) % 1.0
    fd = (xp - xm) / (2 * h)
    assert abs(math.log(fd) / n - lam) < 1e-4


def test_lyapunov_matches_composition_derivative_arctan(identity, fam1):
    # identity base, one fibre just below its own tangency: the exponent
    # is small enough for the 1000-step composition to stay measurable
    th0 = 0.75
    beta = fm.closed_form_betac_arctan(100.0, 0.0) - 1e-6
    n = 1000
    lam = fm.lyapunov(identity, fam1, beta, th0, fm.UPPER, n)
    x0 = fm.pullback_graph_point(identity, fam1, beta, th0, 2**18, fm.UPPER)
    h = 1e-7
    xp, xm = x0 + h, x0 - h
    for _ in range(n):
        xp = fam1.scalar_eval(beta, th0, xp)
        xm = fam1.scalar_eval(beta, th0, xm)
    fd = (xp - xm) / (2 * h)
    assert abs(math.log(fd) / n - lam) < 1e-4


def test_restricted_neutral_exponent_at_tangency(m1_base, fam2):
    # on the period-2 set the graphs merge at the closed-form parameter
    # with unit slope at the merge point, so the exponent vanishes
    lam = fm.lyapunov(m1_base, fam2, BETA_C_M1, (0.25, 0.25), fm.UPPER,
                      50000, warmup=4000000)
    assert abs(lam) < 1e-6


def test_graph_beta_monotonicity(rotation, fam1):
    th = fm.sample_thetas(rotation, 200)
    betas = np.linspace(0.1, 0.26, 10)
    ups = [fm.compute_graph_field(rotation, fam1, b, th, 2048, fm.UPPER).values
           for b in betas]
    los = [fm.compute_graph_field(rotation, fam1, b, th, 2048, fm.LOWER).values
           for b in betas]
    for a, b in zip(ups, ups[1:]):
        assert (b <= a + 1e-9).all()
    for a, b in zip(los, los[1:]):
        assert (b >= a - 1e-9).all()


def test_bounded_set_below_and_above(rotation, fam1):
    th = fm.sample_thetas(rotation, 200)
    full = fm.bounded_set(rotation, fam1, 0.2, th, 2048)
    assert full.fraction_bounded == 1.0
    assert (full.lo <= full.hi).all()
    gone = fm.bounded_set(rotation, fam1, 0.9, th, 2048)
    assert gone.fraction_bounded == 0.0


def test_bounded_set_nesting(rotation, fam1):
    th = fm.sample_thetas(rotation, 200)
    a = fm.bounded_set(rotation, fam1, 0.20, th, 2048)
    b = fm.bounded_set(rotation, fam1, 0.25, th, 2048)
    assert (b.lo >= a.lo - 1e-9).all()
    assert (b.hi <= a.hi + 1e-9).all()


def test_contraction_affine_single_step(rotation):
    fam = fm.AffineFibres(0.5, 0.75)
    th = fm.sample_thetas(rotation, 50)
    fld = fm.compute_graph_field(rotation, fam, 0.0, th, 200, fm.UPPER)
    res = fm.contraction_check(rotation, fam, 0.0, fld, 10)
    assert res is not None
    n, alpha = res
    assert n == 1
    assert alpha == pytest.approx(0.5, abs=1e-12)


def test_contraction_example_attracting_and_inverted(rotation, fam1):
    beta = BETA_C_QP - 0.01
    th = fm.sample_thetas(rotation, 100)
    up = fm.compute_graph_field(rotation, fam1, beta, th, 2048, fm.UPPER)
    res = fm.contraction_check(rotation, fam1, beta, up, 500)
    assert res is not None and res[1] < 1.0
    lo = fm.compute_graph_field(rotation, fam1, beta, th, 2048, fm.LOWER)
    res_inv = fm.contraction_check(rotation, fam1, beta, lo, 500)
    assert res_inv is not None and res_inv[1] < 1.0


def test_contraction_interval_field(rotation, fam1):
    beta = 0.2
    th = fm.sample_thetas(rotation, 50)
    k = fm.bounded_set(rotation, fam1, beta, th, 1024)
    res = fm.contraction_check(rotation, fam1, beta, k, 2000)
    assert res is not None and res[1] < 1.0


def test_contraction_not_contracting():
    # expanding affine map never contracts forward
    ident = fm.BaseSystem.identity()
    fam = fm.AffineFibres(1.5, 0.0, gamma=fm.GammaBoundary.constant(-50.0, 50.0))
    th = fm.sample_thetas(ident, 10)
    fld = fm.GraphField(th, np.zeros(10), np.zeros(10, bool), 1, fm.UPPER, 0.0)
    assert fm.contraction_check(ident, fam, 0.0, fld, 20, inverted=False) is None


def test_threads_deterministic(rotation, fam1):
    th = fm.sample_thetas(rotation, 211)
    one = fm.compute_graph_field(rotation, fam1, 0.27, th, 1500, fm.UPPER, threads=1)
    four = fm.compute_graph_field(rotation, fam1, 0.27, th, 1500, fm.UPPER, threads=4)
    assert np.array_equal(one.values, four.values, equal_nan=True)
    assert np.array_equal(one.escaped, four.escaped)


def test_pullback_point_matches_field(rotation, fam1):
    th = fm.sample_thetas(rotation, 16)
    fld = fm.compute_graph_field(rotation, fam1, 0.25, th, 600, fm.UPPER)
    for i in (0, 5, 11):
        v = fm.pullback_graph_point(rotation, fam1, 0.25, th[i], 600, fm.UPPER)
        assert v == pytest.approx(fld.values[i], abs=1e-12)


def test_adaptive_field_converges(rotation, fam1):
    th = fm.sample_thetas(rotation, 100)
    fld, converged = fm.adaptive_graph_field(rotation, fam1, 0.2, th, fm.UPPER)
    assert converged
    assert not fld.escaped.any()
    deeper = fm.compute_graph_field(rotation, fam1, 0.2, th, fld.depth * 2, fm.UPPER)
    assert np.max(np.abs(deeper.values - fld.values)) < 1e-9
