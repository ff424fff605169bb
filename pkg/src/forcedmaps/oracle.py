"""Independent ground truth: 1-d tangency solvers and closed forms.

Everything here analyses a single monotone concave interval map in
isolation, with no knowledge of the pullback engine (this module must
never import it). Used to cross-check the engine on bases where the
forcing degenerates: finite periodic orbits and the identity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, NoBracket
from .fibre_maps import FibreFamily

_RESIDUAL_TOL = 1e-12


def closed_form_betac_arctan(alpha: float, offset_const: float) -> float:
    """Exact saddle-node parameter of x -> arctan(alpha*x) - 2*beta - offset_const.

    The tangency point is x* = sqrt(alpha-1)/alpha, where the slope
    alpha/(1+(alpha*x*)^2) equals one exactly; eliminating x* from the
    fixed-point condition gives the parameter in closed form.
    """
    if alpha <= 1.0:
        raise DomainError("alpha must exceed 1 for a tangency to exist")
    s = math.sqrt(alpha - 1.0)
    return 0.5 * math.atan(s) - s / (2.0 * alpha) - offset_const / 2.0


def arctan_tangency_point(alpha: float) -> float:
    if alpha <= 1.0:
        raise DomainError("alpha must exceed 1 for a tangency to exist")
    return math.sqrt(alpha - 1.0) / alpha


@dataclass
class SaddleNode1D:
    """Tangency parameter and point of a concave 1-d family."""

    beta_star: float
    x_star: float
    residual_fixed_point: float
    residual_unit_slope: float


def _slope_one_point(g_x, beta: float, x_domain: tuple[float, float]) -> float:
    """x with g'(x) = 1; g' strictly decreasing on the domain."""
    lo, hi = float(x_domain[0]), float(x_domain[1])
    width = hi - lo
    for _ in range(8):
        if g_x(beta, hi) < 1.0:
            break
        hi += width
    else:
        raise NoBracket("slope never falls below one on the expanded domain")
    if g_x(beta, lo) <= 1.0:
        # steepest point is the left edge; expand a little before giving up
        for _ in range(8):
            lo -= width
            if g_x(beta, lo) > 1.0:
                break
        else:
            raise NoBracket("slope never exceeds one: no tangency in the domain")
    for _ in range(90):
        mid = 0.5 * (lo + hi)
        if g_x(beta, mid) > 1.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def solve_saddle_node_1d(g, g_x, x_domain: tuple[float, float],
                         beta_range: tuple[float, float] = (0.0, 1.0)) -> SaddleNode1D:
    """Solve g(x)=x, g'(x)=1 for a strictly increasing concave family.

    ``g(beta, x)`` must be strictly decreasing in beta so that the peak
    of g(x)-x decreases through zero exactly once on beta_range; the
    endpoints must bracket that crossing (NoBracket otherwise). The pair
    is polished by damped Newton inside the bisection bracket.
    """
    b_lo, b_hi = float(beta_range[0]), float(beta_range[1])

    def headroom(beta: float) -> tuple[float, float]:
        xs = _slope_one_point(g_x, beta, x_domain)
        return g(beta, xs) - xs, xs

    h_lo, _ = headroom(b_lo)
    h_hi, _ = headroom(b_hi)
    if h_lo < 0.0 or h_hi > 0.0:
        raise NoBracket(
            f"endpoint behaviour does not bracket a tangency: "
            f"headroom({b_lo})={h_lo:.3g}, headroom({b_hi})={h_hi:.3g}")

    lo, hi = b_lo, b_hi
    for _ in range(48):
        mid = 0.5 * (lo + hi)
        h, _ = headroom(mid)
        if h > 0.0:
            lo = mid
        else:
            hi = mid
    beta = 0.5 * (lo + hi)
    x = _slope_one_point(g_x, beta, x_domain)

    hb = 1e-7
    hx = 1e-7
    res = None
    for _ in range(60):
        r1 = g(beta, x) - x
        r2 = g_x(beta, x) - 1.0
        norm = max(abs(r1), abs(r2))
        if res is not None and norm >= res and norm < 1e-9:
            break
        res = norm
        if norm < 1e-15:
            break
        a11 = g_x(beta, x) - 1.0
        a12 = (g(beta + hb, x) - g(beta - hb, x)) / (2 * hb)
        a21 = (g_x(beta, x + hx) - g_x(beta, x - hx)) / (2 * hx)
        a22 = (g_x(beta + hb, x) - g_x(beta - hb, x)) / (2 * hb)
        det = a11 * a22 - a12 * a21
        if det == 0.0:
            break
        dx = (-r1 * a22 + r2 * a12) / det
        db = (-a11 * r2 + a21 * r1) / det
        step = 1.0
        for _ in range(20):
            xb, bb = x + step * dx, beta + step * db
            if lo - (hi - lo) <= bb <= hi + (hi - lo) and \
                    max(abs(g(bb, xb) - xb), abs(g_x(bb, xb) - 1.0)) < norm:
                x, beta = xb, bb
                break
            step *= 0.5
        else:
            break
    return SaddleNode1D(
        beta_star=beta,
        x_star=x,
        residual_fixed_point=abs(g(beta, x) - x),
        residual_unit_slope=abs(g_x(beta, x) - 1.0),
    )


@dataclass
class IdentityBetacResult:
    """Per-fibre tangency parameters over an identity base."""

    beta_c: float
    beta_hat: float
    argmin: float | tuple
    argmax: float | tuple
    beta_star: np.ndarray


def identity_base_betac(fam: FibreFamily, samples) -> IdentityBetacResult:
    """Brute-force per-fibre analysis when the base map is the identity.

    With no motion in the base every fibre bifurcates on its own; the
    full-graph critical parameter is the minimum per-fibre tangency
    parameter (first fibre to lose its pair), the last-bounded-orbit
    parameter is the maximum (last fibre standing).
    """
    samples = np.asarray(samples, dtype=float)
    rows = samples if samples.ndim > 1 else samples[:, None]
    betas = np.empty(len(rows))
    for i, row in enumerate(rows):
        th = row[0] if fam.theta_dim == 1 else row

        def g(beta, x, th=th):
            return float(fam.eval(beta, th, x))

        def g_x(beta, x, th=th):
            return float(fam.deriv_x(beta, th, x))

        lo = fam.gamma.lower(th)
        hi = fam.gamma.upper(th)
        sol = solve_saddle_node_1d(g, g_x, (float(lo), float(hi)), fam.beta_range)
        betas[i] = sol.beta_star
    i_min = int(np.argmin(betas))
    i_max = int(np.argmax(betas))

    def theta_of(i):
        return float(rows[i][0]) if fam.theta_dim == 1 else tuple(rows[i])

    return IdentityBetacResult(
        beta_c=float(betas[i_min]),
        beta_hat=float(betas[i_max]),
        argmin=theta_of(i_min),
        argmax=theta_of(i_max),
        beta_star=betas,
    )
