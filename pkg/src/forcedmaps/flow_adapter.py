"""Reduction of forced scalar ODEs to their time-t0 skew-product maps.

A flow x' = F_beta(theta_t, x) over a rotation flow on the circle
induces a discrete forced map by sampling at a fixed period t0. The
state and the log of the fibre derivative are integrated jointly with a
fixed-step fourth-order scheme (no adaptive stepping inside a call, so
results are bitwise reproducible); the step count is the first power of
two at which halving changes the endpoint by less than 1e-10.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from typing import Callable

import numpy as np

from .base_systems import BaseSystem
from .errors import Blowup, ValidationFailed
from .fibre_maps import CallableFibres, GammaBoundary

_STEP_TARGET = 1e-10
_MIN_STEPS = 16
_MAX_STEPS = 4096


@dataclass
class ScalarFlowSystem:
    """A forced scalar vector field with its x-derivative.

    F and dF_dx must be vectorised over theta and x. The base flow is
    theta_t = theta + t*rho_flow (mod 1); rho_flow = 0 freezes the
    forcing. dF_dx is validated against finite differences of F on a
    sample grid at construction.
    """

    F: Callable
    dF_dx: Callable
    t0: float
    rho_flow: float = 0.0
    gamma: GammaBoundary = dc_field(default_factory=lambda: GammaBoundary.constant(0.0, 2.0))
    x_bound: float = 1e6
    step_target: float = _STEP_TARGET
    name: str = "flow"

    def __post_init__(self):
        if self.t0 <= 0:
            raise ValidationFailed("sampling period t0 must be positive")
        rng = np.random.default_rng(11)
        th = rng.uniform(0.0, 1.0, 200)
        lo, hi = self.gamma.lower(th), self.gamma.upper(th)
        x = lo + rng.uniform(0.0, 1.0, 200) * (hi - lo)
        betas = rng.uniform(0.0, 1.0, 200)
        h = 1e-6
        fd = (np.asarray(self.F(betas, th, x + h)) - np.asarray(self.F(betas, th, x - h))) / (2 * h)
        an = np.asarray(self.dF_dx(betas, th, x))
        denom = np.maximum(np.abs(fd), 1e-8)
        if np.max(np.abs(fd - an) / denom) > 1e-5:
            raise ValidationFailed("dF_dx disagrees with finite differences of F")

    def base_positions(self, th, s: float):
        return (np.asarray(th, dtype=float) + s * self.rho_flow) % 1.0

    def induced_base(self) -> BaseSystem:
        return BaseSystem.rotation((self.rho_flow * self.t0) % 1.0)


def _integrate_state(sys: ScalarFlowSystem, beta, th, x0, t_total: float, steps: int):
    """RK4 of the state alone (no derivative), for plain map evaluation."""
    x = np.asarray(x0, dtype=float).copy()
    h = t_total / steps
    s = 0.0
    blown = np.zeros(np.shape(x), dtype=bool)
    with np.errstate(invalid="ignore", over="ignore"):
        for _ in range(steps):
            th0 = sys.base_positions(th, s)
            th1 = sys.base_positions(th, s + 0.5 * h)
            th2 = sys.base_positions(th, s + h)
            k1 = np.asarray(sys.F(beta, th0, x), dtype=float)
            k2 = np.asarray(sys.F(beta, th1, x + 0.5 * h * k1), dtype=float)
            k3 = np.asarray(sys.F(beta, th1, x + 0.5 * h * k2), dtype=float)
            k4 = np.asarray(sys.F(beta, th2, x + h * k3), dtype=float)
            x_new = x + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
            newly = ~blown & (np.isnan(x_new) | (np.abs(x_new) > sys.x_bound))
            if np.any(newly):
                sign = np.where(np.isnan(x_new), np.sign(x), np.sign(x_new))
                x_new = np.where(newly, np.copysign(np.inf, np.where(sign == 0, 1.0, sign)), x_new)
                blown = blown | newly
            frozen = blown & np.isinf(x)
            x = np.where(frozen, x, x_new)
            s += h
    return x, blown


def _integrate(sys: ScalarFlowSystem, beta, th, x0, t_total: float, steps: int):
    """Joint RK4 of the state and the log fibre derivative.

    A trajectory that leaves the safety bound is frozen at signed
    infinity: the time-t map is monotone where defined, so the signed
    value keeps order comparisons (escape tests, inverse bisection)
    meaningful; its derivative lane becomes NaN.
    """
    x = np.asarray(x0, dtype=float).copy()
    log_d = np.zeros_like(x)
    h = t_total / steps
    s = 0.0
    blown = np.zeros(np.shape(x), dtype=bool)
    with np.errstate(invalid="ignore", over="ignore"):
        for _ in range(steps):
            th0 = sys.base_positions(th, s)
            th1 = sys.base_positions(th, s + 0.5 * h)
            th2 = sys.base_positions(th, s + h)
            k1 = np.asarray(sys.F(beta, th0, x), dtype=float)
            l1 = np.asarray(sys.dF_dx(beta, th0, x), dtype=float)
            x2 = x + 0.5 * h * k1
            k2 = np.asarray(sys.F(beta, th1, x2), dtype=float)
            l2 = np.asarray(sys.dF_dx(beta, th1, x2), dtype=float)
            x3 = x + 0.5 * h * k2
            k3 = np.asarray(sys.F(beta, th1, x3), dtype=float)
            l3 = np.asarray(sys.dF_dx(beta, th1, x3), dtype=float)
            x4 = x + h * k3
            k4 = np.asarray(sys.F(beta, th2, x4), dtype=float)
            l4 = np.asarray(sys.dF_dx(beta, th2, x4), dtype=float)
            x_new = x + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
            log_d = log_d + (h / 6.0) * (l1 + 2 * l2 + 2 * l3 + l4)
            newly = ~blown & (np.isnan(x_new) | (np.abs(x_new) > sys.x_bound))
            if np.any(newly):
                sign = np.where(np.isnan(x_new), np.sign(x), np.sign(x_new))
                x_new = np.where(newly, np.copysign(np.inf, np.where(sign == 0, 1.0, sign)), x_new)
                log_d = np.where(newly, np.nan, log_d)
                blown = blown | newly
            frozen = blown & np.isinf(x)
            x = np.where(frozen, x, x_new)
            s += h
    return x, np.exp(log_d), blown


def _choose_steps(sys: ScalarFlowSystem, beta, th, x, t_total: float) -> tuple:
    # accuracy only matters where the endpoint is still near the strip;
    # lanes running off to blowup never meet an absolute target
    lo = np.min(np.asarray(sys.gamma.lower(th))) - 1.0
    hi = np.max(np.asarray(sys.gamma.upper(th))) + 1.0
    steps = _MIN_STEPS
    cur, deriv, blown = _integrate(sys, beta, th, x, t_total, steps)
    while steps < _MAX_STEPS:
        prev = cur
        steps *= 2
        cur, deriv, blown = _integrate(sys, beta, th, x, t_total, steps)
        with np.errstate(invalid="ignore"):
            matters = np.isfinite(cur) & (cur >= lo) & (cur <= hi)
            ok = ~matters | (np.abs(cur - prev) < sys.step_target)
        if np.all(ok):
            break
    return steps, cur, deriv, blown


def time_t0_map(sys: ScalarFlowSystem, beta: float, theta, x,
                t_total: float | None = None):
    """(x_{t0}, d x_{t0}/dx) of the induced map at one or many points.

    Raises Blowup when a scalar trajectory leaves the safety bound; in
    batch mode blown lanes come back as NaN.
    """
    t_total = sys.t0 if t_total is None else t_total
    scalar = np.ndim(x) == 0 and np.ndim(theta) == 0
    _, xt, deriv, blown = _choose_steps(sys, beta, theta, x, t_total)
    if scalar:
        if np.any(blown) or not np.all(np.isfinite(xt)):
            raise Blowup(f"trajectory exceeded |x| = {sys.x_bound:g} before t = {t_total}")
        return float(xt), float(deriv)
    return xt, deriv


def verify_flow_boundaries(sys: ScalarFlowSystem, beta: float, thetas,
                           orientation: str, n_checks: int = 8) -> dict:
    """Check boundary trajectories stay on the trapping side of the strip.

    The concave orientation requires trajectories started on either
    boundary curve to stay at or below it along the whole period; the
    convex orientation requires at or above. Checked at n_checks
    sub-interval endpoints.
    """
    th = np.asarray(thetas, dtype=float)
    dt = sys.t0 / n_checks
    worst = -np.inf
    for which in ("lower", "upper"):
        start = sys.gamma.lower(th) if which == "lower" else sys.gamma.upper(th)
        x = np.full(th.shape, start, dtype=float) if np.ndim(start) == 0 \
            else np.asarray(start, dtype=float).copy()
        cur_th = th.copy()
        for k in range(1, n_checks + 1):
            x, _, _ = _integrate(sys, beta, cur_th, x, dt, 64)
            cur_th = sys.base_positions(th, k * dt)
            b = sys.gamma.lower(cur_th) if which == "lower" else sys.gamma.upper(cur_th)
            if orientation == "concave_decreasing_in_beta":
                worst = max(worst, float(np.max(x - b)))
            else:
                worst = max(worst, float(np.max(b - x)))
    return {"max_violation": worst, "trapped": bool(worst <= 1e-9)}


def as_fibre_family(sys: ScalarFlowSystem, beta_range=(0.0, 1.0),
                    name: str | None = None) -> CallableFibres:
    """Wrap the induced time-t0 map so the graph machinery runs unchanged.

    The structural conditions are validated on the induced map itself by
    finite differences: strict monotonicity in x, a constant convexity
    sign, and a constant beta-derivative sign, with the two signs paired
    as convex/increasing or concave/decreasing. ValidationFailed names
    the first condition that a sample violates.
    """
    rng = np.random.default_rng(5)
    betas = np.linspace(beta_range[0], beta_range[1], 5)
    th_grid = rng.uniform(0.0, 1.0, 8)
    steps = _MIN_STEPS
    sign_xx = []
    sign_b = []
    n_checked = n_total = 0
    hx, hb = 1e-4, 1e-5
    with np.errstate(invalid="ignore"):
        for beta in betas:
            lo = np.asarray(sys.gamma.lower(th_grid)) + np.zeros_like(th_grid)
            hi = np.asarray(sys.gamma.upper(th_grid)) + np.zeros_like(th_grid)
            for u in np.linspace(0.05, 0.95, 12):
                x = lo + u * (hi - lo)
                steps_here, g0, _, _ = _choose_steps(sys, beta, th_grid, x, sys.t0)
                steps = max(steps, steps_here)
                gp, _, _ = _integrate(sys, beta, th_grid, x + hx, sys.t0, steps_here)
                gm, _, _ = _integrate(sys, beta, th_grid, x - hx, sys.t0, steps_here)
                gbp, _, _ = _integrate(sys, beta + hb, th_grid, x, sys.t0, steps_here)
                gbm, _, _ = _integrate(sys, beta - hb, th_grid, x, sys.t0, steps_here)
                # a trajectory that leaves the safety bound before t0 has no
                # induced-map value there; skip it, escape handles it later
                ok = (np.isfinite(g0) & np.isfinite(gp) & np.isfinite(gm)
                      & np.isfinite(gbp) & np.isfinite(gbm))
                n_total += len(ok)
                n_checked += int(ok.sum())
                if not ok.any():
                    continue
                if not ((gp - gm)[ok] > 0.0).all():
                    raise ValidationFailed("induced map is not strictly increasing in x")
                d2 = (gp - 2 * g0 + gm)[ok]
                if np.max(np.abs(d2)) < 1e-12:
                    raise ValidationFailed("induced map has degenerate convexity")
                sign_xx.extend(np.sign(d2).tolist())
                db = ((gbp - gbm) / (2 * hb))[ok]
                if np.min(np.abs(db)) < 1e-12:
                    raise ValidationFailed("induced map has degenerate beta-dependence")
                sign_b.extend(np.sign(db).tolist())
    if n_checked < max(8, n_total // 4):
        raise ValidationFailed("induced map is undefined on most of the strip "
                               "(trajectories blow up before t0)")
    sxx = set(sign_xx)
    sb = set(sign_b)
    if len(sxx) != 1:
        raise ValidationFailed("induced map has no constant convexity sign")
    if len(sb) != 1:
        raise ValidationFailed("induced map has no constant beta-derivative sign")
    if sxx == {1.0} and sb == {1.0}:
        orientation = "convex_increasing_in_beta"
    elif sxx == {-1.0} and sb == {-1.0}:
        orientation = "concave_decreasing_in_beta"
    else:
        raise ValidationFailed(
            "convexity and beta-monotonicity signs are not paired as "
            "convex/increasing or concave/decreasing")

    frozen_steps = steps

    def eval_fn(beta, th, x):
        xt, _ = _integrate_state(sys, beta, th, np.asarray(x, dtype=float), sys.t0, frozen_steps)
        return xt

    def deriv_fn(beta, th, x):
        _, d, _ = _integrate(sys, beta, th, np.asarray(x, dtype=float), sys.t0, frozen_steps)
        return d

    fam = CallableFibres(
        eval_fn, sys.gamma, orientation=orientation, beta_range=beta_range,
        theta_dim=1, deriv_x_fn=deriv_fn, name=name or f"{sys.name}_t0map",
        validate=False)
    fam.integration_steps = frozen_steps
    return fam


# -- built-in vector fields -------------------------------------------


def linear_field(a: float, b0: float = 0.0, b_amp: float = 0.0):
    """F = a*x + b(theta); beta has no effect (test field)."""

    def F(beta, th, x):
        return a * np.asarray(x, dtype=float) + b0 \
            + b_amp * np.sin(2.0 * np.pi * np.asarray(th, dtype=float)) \
            + 0.0 * np.asarray(beta, dtype=float)

    def dF(beta, th, x):
        return np.full(np.broadcast_shapes(np.shape(x), np.shape(th), np.shape(beta)), a)

    return F, dF


def quadratic_cap_field(c0: float, c_amp: float = 0.0):
    """F = -(x-1)^2 + c(theta) - beta; concave with a genuine tangency."""

    def F(beta, th, x):
        x = np.asarray(x, dtype=float)
        return -(x - 1.0) ** 2 + c0 \
            + c_amp * np.cos(2.0 * np.pi * np.asarray(th, dtype=float)) \
            - np.asarray(beta, dtype=float)

    def dF(beta, th, x):
        x = np.asarray(x, dtype=float)
        return -2.0 * (x - 1.0) + 0.0 * (np.asarray(th, dtype=float) + np.asarray(beta, dtype=float))

    return F, dF
