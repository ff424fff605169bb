"""Parametrised monotone fibre maps restricted to a trapping strip.

Each family evaluates f_{beta,theta}(x) together with its x-derivatives,
its beta-derivative and a fibre inverse. Families carry an orientation
describing the joint sign of convexity and beta-monotonicity:

* ``convex_increasing_in_beta``: convex fibres, f increasing in beta; the
  forward graph transform of the lower boundary is monotone increasing.
* ``concave_decreasing_in_beta``: the mirrored situation (the arctan
  example families); the forward transform of the upper boundary is
  monotone decreasing.
* ``none``: no convexity claim (test tables, affine maps); only
  monotonicity in x is validated.

Evaluation outside the strip is allowed on purpose: escape detection
compares iterates against the boundaries instead of raising.
"""

from __future__ import annotations

import math
from typing import Callable, Optional

import numpy as np

from .base_systems import BasePoint
from .errors import ConfigError, ValidationFailed

ORIENTATIONS = ("convex_increasing_in_beta", "concave_decreasing_in_beta", "none")

_HALF_PI = math.pi / 2.0


class GammaBoundary:
    """Lower and upper boundary curves of the trapping strip.

    Constant boundaries (the usual case) evaluate to plain floats, which
    broadcast against any batch; curve boundaries receive whatever theta
    batch the engine is working with.
    """

    def __init__(self, lower: Callable, upper: Callable,
                 lower_const: float | None = None, upper_const: float | None = None):
        self._lower = lower
        self._upper = upper
        self.lower_const = lower_const
        self.upper_const = upper_const

    @classmethod
    def constant(cls, lo: float, hi: float) -> "GammaBoundary":
        lo, hi = float(lo), float(hi)
        if not lo < hi:
            raise ConfigError("lower boundary must lie strictly below the upper one")
        return cls(lambda th: lo, lambda th: hi, lower_const=lo, upper_const=hi)

    @property
    def is_constant(self) -> bool:
        return self.lower_const is not None and self.upper_const is not None

    def lower(self, th):
        if self.lower_const is not None:
            return self.lower_const
        return np.asarray(self._lower(th), dtype=float)

    def upper(self, th):
        if self.upper_const is not None:
            return self.upper_const
        return np.asarray(self._upper(th), dtype=float)


def _lead_shape(th):
    th = np.asarray(th)
    return th.shape[:1] if th.ndim >= 1 else ()


def _theta_coord(th, i):
    th = np.asarray(th, dtype=float)
    return th[..., i] if th.ndim >= 1 else th


class FibreFamily:
    """Common behaviour of all fibre-map families.

    Subclasses implement eval/deriv_x/deriv_xx/deriv_beta/inverse as
    vectorised numpy expressions accepting scalars or batches. ``inverse``
    returns NaN where the target value has no preimage.
    """

    kind = "abstract"

    def __init__(self, orientation: str, gamma: GammaBoundary,
                 beta_range: tuple[float, float] = (0.0, 1.0), theta_dim: int = 1):
        if orientation not in ORIENTATIONS:
            raise ConfigError(f"unknown orientation {orientation!r}")
        self.orientation = orientation
        self.gamma = gamma
        self.beta_range = (float(beta_range[0]), float(beta_range[1]))
        self.theta_dim = theta_dim

    def eval(self, beta, th, x):
        raise NotImplementedError

    def deriv_x(self, beta, th, x):
        raise NotImplementedError

    def deriv_xx(self, beta, th, x):
        raise NotImplementedError

    def deriv_beta(self, beta, th, x):
        raise NotImplementedError

    def inverse(self, beta, th, y):
        raise NotImplementedError

    # scalar fast paths: long sequential orbits dominate Lyapunov sums,
    # so families may override these with math-module implementations
    def scalar_eval(self, beta, th, x) -> float:
        return float(self.eval(beta, th, x))

    def scalar_deriv_x(self, beta, th, x) -> float:
        return float(self.deriv_x(beta, th, x))

    def scalar_inverse(self, beta, th, y) -> float:
        return float(self.inverse(beta, th, y))

    # -- construction-time sign validation ----------------------------

    def _validate_orientation(self, n_samples: int = 1000, seed: int = 7):
        rng = np.random.default_rng(seed)
        b0, b1 = self.beta_range
        betas = rng.uniform(b0, b1, n_samples)
        th = rng.uniform(0.0, 1.0, (n_samples, self.theta_dim))
        if self.theta_dim == 1:
            th = th[:, 0]
        lo = self.gamma.lower(th)
        hi = self.gamma.upper(th)
        # interior points: convexity may degenerate exactly on the boundary
        x = lo + (0.01 + 0.99 * rng.uniform(size=n_samples)) * (hi - lo)
        dx = np.asarray(self.deriv_x(betas, th, x))
        if not (dx > 0.0).all():
            raise ValidationFailed("fibre maps are not strictly increasing in x on the strip")
        if self.orientation == "none":
            return
        dxx = np.asarray(self.deriv_xx(betas, th, x))
        db = np.asarray(self.deriv_beta(betas, th, x))
        if self.orientation == "convex_increasing_in_beta":
            ok = (dxx > 0.0).all() and (db > 0.0).all()
        else:
            ok = (dxx < 0.0).all() and (db < 0.0).all()
        if not ok:
            raise ValidationFailed(
                f"sampled convexity/beta-monotonicity signs contradict orientation {self.orientation!r}")


class ArctanFibres(FibreFamily):
    """arctan(alpha*x) - 2*beta - forcing_amp*(s(theta) + 1).

    s is sin(2*pi*theta) over a circle base and the product
    sin(2*pi*theta1)*sin(2*pi*theta2) over a torus base. Concave on the
    strip [0, 2] and strictly decreasing in beta.
    """

    def __init__(self, alpha: float, forcing_amp: float, theta_dim: int = 1,
                 gamma: GammaBoundary | None = None, beta_range=(0.0, 1.0)):
        if alpha <= 0:
            raise ConfigError("alpha must be positive")
        self.alpha = float(alpha)
        self.forcing_amp = float(forcing_amp)
        self.kind = "arctan_1d" if theta_dim == 1 else "arctan_2d"
        super().__init__("concave_decreasing_in_beta",
                         gamma or GammaBoundary.constant(0.0, 2.0),
                         beta_range, theta_dim)
        self._validate_orientation()

    def offset(self, beta, th):
        """Total subtracted term: 2*beta + forcing_amp*(s(theta)+1)."""
        if self.theta_dim == 1:
            s = np.sin(2.0 * np.pi * np.asarray(th, dtype=float))
        else:
            s = (np.sin(2.0 * np.pi * _theta_coord(th, 0))
                 * np.sin(2.0 * np.pi * _theta_coord(th, 1)))
        return 2.0 * np.asarray(beta, dtype=float) + self.forcing_amp * (s + 1.0)

    def eval(self, beta, th, x):
        return np.arctan(self.alpha * np.asarray(x, dtype=float)) - self.offset(beta, th)

    def deriv_x(self, beta, th, x):
        x = np.asarray(x, dtype=float)
        return self.alpha / (1.0 + (self.alpha * x) ** 2)

    def deriv_xx(self, beta, th, x):
        x = np.asarray(x, dtype=float)
        a = self.alpha
        return -2.0 * a**3 * x / (1.0 + (a * x) ** 2) ** 2

    def deriv_beta(self, beta, th, x):
        return np.full(np.broadcast_shapes(np.shape(beta), np.shape(x)), -2.0)

    def inverse(self, beta, th, y):
        z = np.asarray(y, dtype=float) + self.offset(beta, th)
        with np.errstate(invalid="ignore"):
            return np.where(np.abs(z) < _HALF_PI, np.tan(np.clip(z, -_HALF_PI, _HALF_PI)) / self.alpha, np.nan)

    def _scalar_offset(self, beta, th):
        if self.theta_dim == 1:
            s = math.sin(2.0 * math.pi * float(th))
        else:
            s = math.sin(2.0 * math.pi * float(th[0])) * math.sin(2.0 * math.pi * float(th[1]))
        return 2.0 * beta + self.forcing_amp * (s + 1.0)

    def scalar_eval(self, beta, th, x) -> float:
        return math.atan(self.alpha * x) - self._scalar_offset(beta, th)

    def scalar_deriv_x(self, beta, th, x) -> float:
        return self.alpha / (1.0 + (self.alpha * x) ** 2)

    def scalar_inverse(self, beta, th, y) -> float:
        z = y + self._scalar_offset(beta, th)
        if abs(z) < _HALF_PI:
            return math.tan(z) / self.alpha
        return math.nan


def arctan_1d(alpha: float, forcing_amp: float, **kw) -> ArctanFibres:
    return ArctanFibres(alpha, forcing_amp, theta_dim=1, **kw)


def arctan_2d(alpha: float, forcing_amp: float, **kw) -> ArctanFibres:
    return ArctanFibres(alpha, forcing_amp, theta_dim=2, **kw)


class AffineFibres(FibreFamily):
    """slope*x + intercept - 2*beta; degenerate convexity, test use only."""

    kind = "affine_test"

    def __init__(self, slope: float, intercept: float = 0.0,
                 gamma: GammaBoundary | None = None, beta_range=(0.0, 1.0), theta_dim: int = 1):
        if slope <= 0:
            raise ConfigError("slope must be positive")
        self.slope = float(slope)
        self.intercept = float(intercept)
        super().__init__("none", gamma or GammaBoundary.constant(0.0, 2.0), beta_range, theta_dim)

    def eval(self, beta, th, x):
        return self.slope * np.asarray(x, dtype=float) + self.intercept - 2.0 * np.asarray(beta, dtype=float)

    def deriv_x(self, beta, th, x):
        return np.full(np.broadcast_shapes(np.shape(beta), np.shape(x)), self.slope)

    def deriv_xx(self, beta, th, x):
        return np.zeros(np.broadcast_shapes(np.shape(beta), np.shape(x)))

    def deriv_beta(self, beta, th, x):
        return np.full(np.broadcast_shapes(np.shape(beta), np.shape(x)), -2.0)

    def inverse(self, beta, th, y):
        return (np.asarray(y, dtype=float) + 2.0 * np.asarray(beta, dtype=float) - self.intercept) / self.slope


class TableFibres(FibreFamily):
    """Piecewise-linear monotone fibre map from tabulated values.

    Intended for oracle tests. Linear extrapolation with the end-segment
    slopes keeps the map invertible on the whole line, so the inverse
    never reports a missing preimage. Theta-independent; beta enters as
    the usual -2*beta shift.
    """

    kind = "custom_table"

    def __init__(self, xs, ys, gamma: GammaBoundary | None = None, beta_range=(0.0, 1.0)):
        xs = np.asarray(xs, dtype=float)
        ys = np.asarray(ys, dtype=float)
        if xs.ndim != 1 or xs.shape != ys.shape or len(xs) < 2:
            raise ConfigError("table needs matching 1-d knot arrays of length >= 2")
        if not ((np.diff(xs) > 0).all() and (np.diff(ys) > 0).all()):
            raise ConfigError("table knots must be strictly increasing in x and y")
        self.xs, self.ys = xs, ys
        self._slopes = np.diff(ys) / np.diff(xs)
        super().__init__("none", gamma or GammaBoundary.constant(xs[0], xs[-1]), beta_range)

    def _interp(self, x, xs, ys, slopes):
        x = np.asarray(x, dtype=float)
        core = np.interp(x, xs, ys)
        left = ys[0] + (x - xs[0]) * slopes[0]
        right = ys[-1] + (x - xs[-1]) * slopes[-1]
        return np.where(x < xs[0], left, np.where(x > xs[-1], right, core))

    def eval(self, beta, th, x):
        return self._interp(x, self.xs, self.ys, self._slopes) - 2.0 * np.asarray(beta, dtype=float)

    def deriv_x(self, beta, th, x):
        x = np.asarray(x, dtype=float)
        idx = np.clip(np.searchsorted(self.xs, x, side="right") - 1, 0, len(self._slopes) - 1)
        return self._slopes[idx]

    def deriv_xx(self, beta, th, x):
        return np.zeros(np.broadcast_shapes(np.shape(beta), np.shape(x)))

    def deriv_beta(self, beta, th, x):
        return np.broadcast_to(-2.0, np.broadcast_shapes(np.shape(beta), np.shape(x))).copy()

    def inverse(self, beta, th, y):
        z = np.asarray(y, dtype=float) + 2.0 * np.asarray(beta, dtype=float)
        return self._interp(z, self.ys, self.xs, 1.0 / self._slopes)


class CallableFibres(FibreFamily):
    """Fibre family defined by callables (used for flow-induced maps).

    ``eval_fn(beta, th, x)`` must be vectorised over th/x. Derivatives
    default to central finite differences; the inverse defaults to a
    monotone bisection over the widened strip with an explicit range
    guard (NaN when the target is outside the reachable range).
    """

    kind = "custom"

    def __init__(self, eval_fn, gamma: GammaBoundary, orientation: str = "none",
                 beta_range=(0.0, 1.0), theta_dim: int = 1,
                 deriv_x_fn=None, inverse_fn=None, name: str = "custom",
                 validate: bool = True):
        self.name = name
        self._eval_fn = eval_fn
        self._deriv_x_fn = deriv_x_fn
        self._inverse_fn = inverse_fn
        super().__init__(orientation, gamma, beta_range, theta_dim)
        if validate:
            self._validate_orientation(n_samples=300)

    def eval(self, beta, th, x):
        return np.asarray(self._eval_fn(beta, th, x), dtype=float)

    def deriv_x(self, beta, th, x, h: float = 1e-6):
        if self._deriv_x_fn is not None:
            return np.asarray(self._deriv_x_fn(beta, th, x), dtype=float)
        return (self.eval(beta, th, np.asarray(x) + h) - self.eval(beta, th, np.asarray(x) - h)) / (2 * h)

    def deriv_xx(self, beta, th, x, h: float = 1e-4):
        x = np.asarray(x, dtype=float)
        return (self.eval(beta, th, x + h) - 2 * self.eval(beta, th, x) + self.eval(beta, th, x - h)) / h**2

    def deriv_beta(self, beta, th, x, h: float = 1e-6):
        b = np.asarray(beta, dtype=float)
        return (self.eval(b + h, th, x) - self.eval(b - h, th, x)) / (2 * h)

    def inverse(self, beta, th, y, iters: int = 64):
        if self._inverse_fn is not None:
            return np.asarray(self._inverse_fn(beta, th, y), dtype=float)
        y = np.asarray(y, dtype=float)
        lead = np.broadcast_shapes(_lead_shape(th), y.shape)
        lo = np.broadcast_to(self.gamma.lower(th) - 2.0, lead).astype(float).copy()
        hi = np.broadcast_to(self.gamma.upper(th) + 2.0, lead).astype(float).copy()
        flo = self.eval(beta, th, lo)
        fhi = self.eval(beta, th, hi)
        reachable = (flo <= y) & (y <= fhi)
        for _ in range(iters):
            mid = 0.5 * (lo + hi)
            below = self.eval(beta, th, mid) < y
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
        out = 0.5 * (lo + hi)
        return np.where(reachable, out, np.nan)


# -- point-level operations (scalar convenience API) -------------------


def _theta_scalar(fam: FibreFamily, theta):
    if isinstance(theta, BasePoint):
        return theta.as_array()
    if fam.theta_dim == 1:
        return float(theta)
    return np.asarray(theta, dtype=float).reshape(2)


def evaluate(fam: FibreFamily, beta: float, theta, x: float) -> float:
    """f_{beta,theta}(x); evaluation outside the strip is permitted."""
    return float(fam.eval(beta, _theta_scalar(fam, theta), x))


def deriv_x(fam: FibreFamily, beta: float, theta, x: float) -> float:
    return float(fam.deriv_x(beta, _theta_scalar(fam, theta), x))


def deriv_xx(fam: FibreFamily, beta: float, theta, x: float) -> float:
    return float(fam.deriv_xx(beta, _theta_scalar(fam, theta), x))


def deriv_beta(fam: FibreFamily, beta: float, theta, x: float) -> float:
    return float(fam.deriv_beta(beta, _theta_scalar(fam, theta), x))


def inverse(fam: FibreFamily, beta: float, theta, y: float) -> Optional[float]:
    """Preimage of y under the fibre map, or None when there is none."""
    v = float(fam.inverse(beta, _theta_scalar(fam, theta), y))
    return None if math.isnan(v) else v


def verify_gamma_compatibility(system, fam: FibreFamily, beta: float, thetas) -> dict:
    """Check which trapping inequalities the boundaries satisfy.

    For the concave orientation the monotone transforms require
    f(upper) <= upper after one forward step and inverse(lower) >= lower
    after one backward step; the convex orientation mirrors both. Returns
    the worst signed violations so callers can record the direction.
    """
    th = np.asarray(thetas, dtype=float)
    th_next = system.forward_many(th)
    lo, hi = fam.gamma.lower(th), fam.gamma.upper(th)
    lo_next, hi_next = fam.gamma.lower(th_next), fam.gamma.upper(th_next)
    f_hi = fam.eval(beta, th, hi + np.zeros(len(th)))
    f_lo = fam.eval(beta, th, lo + np.zeros(len(th)))
    inv_lo_next = fam.inverse(beta, th, lo_next + np.zeros(len(th)))
    inv_hi_next = fam.inverse(beta, th, hi_next + np.zeros(len(th)))

    def min_margin(preimages, bound):
        # a missing preimage means the whole fibre maps past the bound,
        # which satisfies the trapping inequality vacuously
        defined = ~np.isnan(preimages)
        if not defined.any():
            return float("inf")
        return float(np.min((preimages - bound)[defined]))

    report = {
        "forward_upper_max_excess": float(np.max(f_hi - hi_next)),
        "forward_lower_max_excess": float(np.max(f_lo - lo_next)),
        "inverse_lower_min_margin": min_margin(inv_lo_next, lo),
        "inverse_upper_min_margin": min_margin(inv_hi_next, hi),
    }
    if fam.orientation == "concave_decreasing_in_beta":
        report["compatible"] = bool(report["forward_upper_max_excess"] <= 1e-12
                                    and report["inverse_lower_min_margin"] >= -1e-12)
    elif fam.orientation == "convex_increasing_in_beta":
        report["compatible"] = bool(np.min(f_lo - lo_next) >= -1e-12)
    else:
        report["compatible"] = True
    return report
