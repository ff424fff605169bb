"""Bounding invariant graphs by exact orbit pullback, and their diagnostics.

The two bounding graphs of the trapping strip are obtained as monotone
limits of the graph transforms: the attracting one by composing fibre
maps along the backward base orbit starting from the boundary curve, the
repelling one by composing fibre inverses along the forward orbit. Both
are evaluated per sample point with no interpolation, so non-continuous
(pinched) graphs are represented faithfully at sample resolution.

Escape is a value, not an error: a sample whose pullback leaves the
widened strip is marked escaped and carries NaN. All computations are
pure functions of immutable inputs; per-sample work parallelises across
a thread pool without changing any result.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dc_field

import numpy as np

from .base_systems import BasePoint, BaseSystem, as_base_point, frac_times
from .errors import ConfigError, GraphEscaped, MismatchedFields
from .fibre_maps import FibreFamily

ESCAPE_MARGIN = 0.5
CONV_TOL = 1e-10
MAX_DEPTH = 10**6
TOL_PINCH = 1e-3
TOL_COLLAPSE = 1e-9
STRIP_EPS = 1e-9

UPPER = "upper_bounding"
LOWER = "lower_bounding"

_PINCH_DELTAS = (1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1)


def _canon_which(which: str) -> str:
    w = {"upper": UPPER, "lower": LOWER, UPPER: UPPER, LOWER: LOWER}.get(which)
    if w is None:
        raise ConfigError(f"unknown graph selector {which!r}")
    return w


def attracting_which(fam: FibreFamily) -> str:
    """The bounding graph reached by forward pullback for this family."""
    return UPPER if fam.orientation == "concave_decreasing_in_beta" else LOWER


def _resolve(fam: FibreFamily, which: str):
    """(transform, start_upper, escape_below, escape_above) for a graph."""
    which = _canon_which(which)
    o = fam.orientation
    if o == "concave_decreasing_in_beta":
        if which == UPPER:
            return "forward", True, True, False
        return "inverse", False, False, True
    if o == "convex_increasing_in_beta":
        if which == LOWER:
            return "forward", False, False, True
        return "inverse", True, True, False
    # no convexity information: both boundaries flow forward to the
    # attracting object, escape is checked on both sides
    return "forward", which == UPPER, True, True


# -- orbit position streams --------------------------------------------


class _Walker:
    """Streams base positions along an orbit for a batch of start points."""

    def position(self):
        raise NotImplementedError

    def shift(self, delta: int):
        raise NotImplementedError


class _RotationWalker(_Walker):
    # positions are recomputed from the integer offset each time, so
    # there is no accumulation error at any depth
    def __init__(self, system: BaseSystem, thetas, k0: int):
        self._th0 = np.asarray(thetas, dtype=float)
        self._rho = system.rho
        self._k = k0

    def position(self):
        return (self._th0 + frac_times(self._k, self._rho)) % 1.0

    def shift(self, delta: int):
        self._k += delta


class _IndexWalker(_Walker):
    def __init__(self, system: BaseSystem, thetas, k0: int):
        self._points = system.points
        self._idx = np.atleast_1d(system.match_indices(thetas))
        self._k = k0

    def position(self):
        return self._points[(self._idx + self._k) % len(self._points)]

    def shift(self, delta: int):
        self._k += delta


class _ConstWalker(_Walker):
    def __init__(self, thetas):
        self._th = np.asarray(thetas, dtype=float)

    def position(self):
        return self._th

    def shift(self, delta: int):
        pass


class _StepWalker(_Walker):
    def __init__(self, system: BaseSystem, thetas, k0: int):
        self._system = system
        self._th = system.iterate_many(np.asarray(thetas, dtype=float), k0)

    def position(self):
        return self._th

    def shift(self, delta: int):
        if delta == 1:
            self._th = self._system.forward_many(self._th)
        elif delta == -1:
            self._th = self._system.backward_many(self._th)
        else:
            self._th = self._system.iterate_many(self._th, delta)


class _StoredWalker(_Walker):
    # a chaotic base cannot replay a jump by re-stepping (rounding grows
    # exponentially and the walked path never returns to its start), so
    # the outbound orbit is stored and indexed
    def __init__(self, system: BaseSystem, thetas, k0: int):
        th = np.asarray(thetas, dtype=float)
        step = system.forward_many if k0 > 0 else system.backward_many
        orbit = [th]
        for _ in range(abs(k0)):
            orbit.append(step(orbit[-1]))
        self._orbit = orbit           # orbit[j] = omega^{sign*j}(theta)
        self._sign = 1 if k0 > 0 else -1
        self._j = abs(k0)

    def position(self):
        return self._orbit[self._j]

    def shift(self, delta: int):
        self._j += delta * self._sign
        if not 0 <= self._j < len(self._orbit):
            raise ConfigError("stored-orbit walker moved outside its range")


def _make_walker(system: BaseSystem, thetas, k0: int) -> _Walker:
    if system.kind == "rotation":
        return _RotationWalker(system, thetas, k0)
    if system.kind == "periodic":
        return _IndexWalker(system, thetas, k0)
    if system.kind == "identity":
        return _ConstWalker(thetas)
    if k0 != 0:
        return _StoredWalker(system, thetas, k0)
    return _StepWalker(system, thetas, k0)


# -- vectorised pullback cores ------------------------------------------


def _boundary(fam, th, upper: bool):
    b = fam.gamma.upper(th) if upper else fam.gamma.lower(th)
    return b


def _start_values(fam, th, upper: bool, n: int):
    b = _boundary(fam, th, upper)
    return np.full(n, b, dtype=float) if np.ndim(b) == 0 else np.asarray(b, dtype=float).copy()


_STORED_POSITION_BUDGET = 2_000_000


def _pullback_values(system, fam, beta, thetas, depth, which,
                     stop_on_escape: bool = False):
    """Depth-n transform values at the given samples, NaN where escaped.

    Bases that need stored orbits are processed in sample chunks to keep
    memory bounded; with stop_on_escape the remaining chunks after a
    detected escape come back as unevaluated NaN lanes with the escape
    flag unset, so only the presence of escapes is meaningful then.
    """
    transform, start_upper, esc_below, esc_above = _resolve(fam, which)
    thetas = np.asarray(thetas, dtype=float)
    n = thetas.shape[0]

    if system.kind == "torus" and depth > 0 and n * depth > _STORED_POSITION_BUDGET:
        chunk = max(4, _STORED_POSITION_BUDGET // depth)
        values = np.full(n, np.nan)
        escaped = np.zeros(n, dtype=bool)
        for i0 in range(0, n, chunk):
            v, e = _pullback_values(system, fam, beta, thetas[i0:i0 + chunk],
                                    depth, which, stop_on_escape)
            values[i0:i0 + len(v)] = v
            escaped[i0:i0 + len(e)] = e
            if stop_on_escape and e.any():
                break
        return values, escaped

    escaped = np.zeros(n, dtype=bool)
    const = fam.gamma.is_constant
    lo_c = fam.gamma.lower_const
    hi_c = fam.gamma.upper_const

    if transform == "forward":
        walk = _make_walker(system, thetas, -depth)
        th = walk.position()
        x = _start_values(fam, th, start_upper, n)
        for _ in range(depth):
            x = np.asarray(fam.eval(beta, th, x), dtype=float)
            walk.shift(+1)
            th = walk.position()
            lo = lo_c if const else fam.gamma.lower(th)
            hi = hi_c if const else fam.gamma.upper(th)
            with np.errstate(invalid="ignore"):
                bad = ~np.isfinite(x)
                if esc_below:
                    bad |= x < lo - ESCAPE_MARGIN
                if esc_above:
                    bad |= x > hi + ESCAPE_MARGIN
            newly = bad & ~escaped
            if newly.any():
                escaped |= newly
                x[escaped] = np.nan
                if stop_on_escape or escaped.all():
                    x[escaped] = np.nan
                    return x, escaped
    else:
        walk = _make_walker(system, thetas, depth)
        th = walk.position()
        x = _start_values(fam, th, start_upper, n)
        for _ in range(depth):
            walk.shift(-1)
            th = walk.position()
            x = np.asarray(fam.inverse(beta, th, x), dtype=float)
            lo = lo_c if const else fam.gamma.lower(th)
            hi = hi_c if const else fam.gamma.upper(th)
            with np.errstate(invalid="ignore"):
                bad = ~np.isfinite(x)
                if esc_below:
                    bad |= x < lo - ESCAPE_MARGIN
                if esc_above:
                    bad |= x > hi + ESCAPE_MARGIN
            newly = bad & ~escaped
            if newly.any():
                escaped |= newly
                x[escaped] = np.nan
                if stop_on_escape or escaped.all():
                    return x, escaped

    # a value that ends outside the strip is in transit and will escape
    lo = lo_c if const else fam.gamma.lower(thetas)
    hi = hi_c if const else fam.gamma.upper(thetas)
    with np.errstate(invalid="ignore"):
        out = ~escaped & ((x < lo - STRIP_EPS) | (x > hi + STRIP_EPS))
    if out.any():
        escaped |= out
        x[escaped] = np.nan
    return x, escaped


# -- public types -------------------------------------------------------


@dataclass
class GraphField:
    """Sampled approximation of a bounding invariant graph."""

    samples: np.ndarray
    values: np.ndarray
    escaped: np.ndarray
    depth: int
    which: str
    beta: float

    @property
    def n(self) -> int:
        return len(self.values)

    @property
    def alive(self) -> np.ndarray:
        return ~self.escaped

    def point(self, i: int) -> BasePoint:
        row = self.samples[i] if self.samples.ndim > 1 else self.samples[i]
        return as_base_point(row, 2 if self.samples.ndim > 1 else 1)


@dataclass
class PinchingReport:
    """Minimum gap between the bounding graphs with a classification."""

    min_gap: float
    argmin: BasePoint
    classification: str
    tol_pinch: float
    tol_collapse: float
    n_samples: int
    depth: int
    median_gap: float
    fraction_below: dict = dc_field(default_factory=dict)


@dataclass
class IntervalField:
    """Per-sample fibre sections of the set of strip-bounded orbits."""

    samples: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    empty: np.ndarray
    depth: int
    beta: float

    @property
    def fraction_bounded(self) -> float:
        return float(np.mean(~self.empty))


# -- public operations ---------------------------------------------------


def pullback_graph_point(system: BaseSystem, fam: FibreFamily, beta: float,
                         theta, n: int, which: str) -> float:
    """Depth-n graph transform at a single base point.

    Returns the pulled-back value; NaN means the orbit escaped the
    widened strip (or a fibre inverse had no preimage).
    """
    if n < 0:
        raise ConfigError("pullback depth must be non-negative")
    if isinstance(theta, BasePoint):
        theta = theta.as_array()
    th = np.asarray([theta], dtype=float) if system.dimension == 1 \
        else np.asarray(theta, dtype=float).reshape(1, 2)
    if n == 0:
        _, start_upper, _, _ = _resolve(fam, which)
        return float(np.atleast_1d(_boundary(fam, th, start_upper) + np.zeros(1))[0])
    vals, _ = _pullback_values(system, fam, beta, th, n, which)
    return float(vals[0])


def compute_graph_field(system: BaseSystem, fam: FibreFamily, beta: float,
                        samples, n: int, which: str, threads: int = 1) -> GraphField:
    """Depth-n transform over a sample batch; deterministic for fixed order."""
    samples = np.asarray(samples, dtype=float)
    if samples.shape[0] == 0:
        raise ConfigError("sample set must be nonempty")
    if n < 1:
        raise ConfigError("field depth must be >= 1")
    which = _canon_which(which)
    if threads > 1 and samples.shape[0] >= 2 * threads:
        chunks = np.array_split(np.arange(samples.shape[0]), threads)
        def work(idx):
            return _pullback_values(system, fam, beta, samples[idx], n, which)
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(work, chunks))
        values = np.concatenate([p[0] for p in parts])
        escaped = np.concatenate([p[1] for p in parts])
    else:
        values, escaped = _pullback_values(system, fam, beta, samples, n, which)
    return GraphField(samples, values, escaped, n, which, float(beta))


def adaptive_graph_field(system: BaseSystem, fam: FibreFamily, beta: float,
                         samples, which: str, conv_tol: float = CONV_TOL,
                         max_depth: int = MAX_DEPTH, start_depth: int = 64,
                         threads: int = 1, stop_on_escape: bool = False):
    """Double the pullback depth until the field settles.

    Returns (field, converged). The schedule stops as soon as the largest
    change on co-surviving samples between successive depths is below
    conv_tol, or the depth would exceed max_depth. With stop_on_escape
    the first escaping sample aborts the schedule (the field is partial
    but its escape flag is definitive, escapes are monotone in depth).
    """
    samples = np.asarray(samples, dtype=float)
    depth = min(start_depth, max_depth)
    prev = None
    while True:
        fld = compute_graph_field(system, fam, beta, samples, depth, which, threads)
        if stop_on_escape and fld.escaped.any():
            return fld, False
        if fld.escaped.all():
            return fld, True
        if prev is not None:
            both = fld.alive & ~np.isnan(prev)
            delta = np.max(np.abs(fld.values[both] - prev[both])) if both.any() else 0.0
            if delta < conv_tol:
                return fld, True
        prev = fld.values
        if depth * 2 > max_depth:
            return fld, False
        depth *= 2


def _position_fn(system: BaseSystem, theta0):
    """O(1) orbit position closure, or None when only stepping works."""
    if system.kind == "rotation":
        t0 = float(theta0)
        rho = system.rho
        return lambda k: (t0 + frac_times(k, rho)) % 1.0
    if system.kind == "identity":
        th = float(theta0) if system.dimension == 1 else np.asarray(theta0, dtype=float)
        return lambda k: th
    if system.kind == "periodic":
        i0 = system.match_indices(theta0)
        pts = system.points
        p = len(pts)
        return lambda k: pts[(i0 + k) % p]
    return None


def lyapunov(system: BaseSystem, fam: FibreFamily, beta: float, theta0,
             which: str, n_steps: int, warmup: int | None = None) -> float:
    """Birkhoff average of log fibre derivative along a bounding graph.

    The graph value is carried along the orbit by the exact transform
    identities, so every term uses the pullback value of ever-increasing
    depth at its own orbit point. Raises GraphEscaped when the graph does
    not exist along the orbit. On a non-ergodic base the result is
    specific to theta0 and must not be averaged across orbits.
    """
    transform, start_upper, esc_below, esc_above = _resolve(fam, _canon_which(which))
    if isinstance(theta0, BasePoint):
        theta0 = theta0.as_array()
    if system.dimension == 2:
        theta0 = np.asarray(theta0, dtype=float).reshape(2)
    else:
        theta0 = float(theta0)

    if warmup is None:
        warmup = _adaptive_warmup(system, fam, beta, theta0, which)

    pos = _position_fn(system, theta0)
    const = fam.gamma.is_constant
    lo_c, hi_c = fam.gamma.lower_const, fam.gamma.upper_const

    def bound_at(th, upper):
        if const:
            return hi_c if upper else lo_c
        b = fam.gamma.upper(th) if upper else fam.gamma.lower(th)
        return float(np.atleast_1d(b)[0])

    if pos is None:
        # stepping base: store the walked positions (replaying a jump on
        # a chaotic base would not return to the start point)
        cur = np.asarray([theta0]) if system.dimension == 1 else theta0.reshape(1, 2)
        if transform == "forward":
            seq = [cur[0]]
            back = cur
            for _ in range(warmup):
                back = system.backward_many(back)
                seq.append(back[0])
            seq.reverse()
            fwd = cur
            for _ in range(n_steps):
                fwd = system.forward_many(fwd)
                seq.append(fwd[0])
            pos = lambda k: np.asarray(seq[k + warmup])
        else:
            seq = [cur[0]]
            fwd = cur
            for _ in range(n_steps + warmup):
                fwd = system.forward_many(fwd)
                seq.append(fwd[0])
            pos = lambda k: np.asarray(seq[k])

    log_sum = 0.0
    if transform == "forward":
        th = pos(-warmup)
        x = bound_at(th, start_upper)
        for k in range(-warmup, n_steps):
            if k >= 0:
                d = fam.scalar_deriv_x(beta, th, x)
                if not d > 0.0 or not math.isfinite(x):
                    raise GraphEscaped(f"graph lost at orbit step {k}")
                log_sum += math.log(d)
            x = fam.scalar_eval(beta, th, x)
            th = pos(k + 1)
            if not math.isfinite(x) \
                    or (esc_below and x < bound_at(th, False) - ESCAPE_MARGIN) \
                    or (esc_above and x > bound_at(th, True) + ESCAPE_MARGIN):
                raise GraphEscaped(f"pullback escaped the strip at orbit step {k}")
    else:
        top = n_steps + warmup
        th = pos(top)
        x = bound_at(th, start_upper)
        for k in range(top - 1, -1, -1):
            th = pos(k)
            x = fam.scalar_inverse(beta, th, x)
            if not math.isfinite(x) \
                    or (esc_below and x < bound_at(th, False) - ESCAPE_MARGIN) \
                    or (esc_above and x > bound_at(th, True) + ESCAPE_MARGIN):
                raise GraphEscaped(f"inverse pullback escaped at orbit step {k}")
            if k < n_steps:
                log_sum += math.log(fam.scalar_deriv_x(beta, th, x))
    return log_sum / n_steps


def _adaptive_warmup(system, fam, beta, theta0, which,
                     tol: float = 1e-12, cap: int = 2**20) -> int:
    th = np.asarray([theta0], dtype=float) if system.dimension == 1 \
        else np.asarray(theta0, dtype=float).reshape(1, 2)
    depth, prev = 256, None
    while depth <= cap:
        vals, esc = _pullback_values(system, fam, beta, th, depth, which)
        if esc[0]:
            raise GraphEscaped("no bounding graph at this parameter along the orbit")
        if prev is not None and abs(float(vals[0]) - prev) < tol:
            return depth
        prev = float(vals[0])
        depth *= 2
    return cap


def pinching_report(lower: GraphField, upper: GraphField,
                    tol_pinch: float = TOL_PINCH,
                    tol_collapse: float = TOL_COLLAPSE) -> PinchingReport:
    """Gap statistics of a lower/upper pair over matching samples."""
    if lower.samples.shape != upper.samples.shape or \
            not np.array_equal(lower.samples, upper.samples):
        raise MismatchedFields("graph fields sample different base points")
    if lower.beta != upper.beta:
        raise MismatchedFields("graph fields belong to different parameters")
    if not np.array_equal(lower.escaped, upper.escaped):
        raise MismatchedFields("escape masks of the two graph fields disagree")
    alive = lower.alive
    if not alive.any():
        raise GraphEscaped("no surviving samples to compare")
    gap = upper.values[alive] - lower.values[alive]
    gap = np.maximum(gap, 0.0)
    i_alive = int(np.argmin(gap))
    idx = np.flatnonzero(alive)[i_alive]
    min_gap = float(gap[i_alive])
    if min_gap < tol_collapse:
        classification = "collapsed"
    elif min_gap < tol_pinch:
        classification = "weakly_pinched"
    else:
        classification = "uniformly_separated"
    fraction_below = {f"{d:g}": float(np.mean(gap < d)) for d in _PINCH_DELTAS}
    return PinchingReport(
        min_gap=min_gap,
        argmin=lower.point(idx),
        classification=classification,
        tol_pinch=tol_pinch,
        tol_collapse=tol_collapse,
        n_samples=lower.n,
        depth=max(lower.depth, upper.depth),
        median_gap=float(np.median(gap)),
        fraction_below=fraction_below,
    )


def bounded_set(system: BaseSystem, fam: FibreFamily, beta: float,
                samples, depth: int, threads: int = 1) -> IntervalField:
    """Fibre intervals between the bounding graphs; Empty where either escaped.

    A crossed pair (upper below lower at the same sample) certifies an
    empty fibre section as well, even before either pullback escapes.
    """
    lo_f = compute_graph_field(system, fam, beta, samples, depth, LOWER, threads)
    hi_f = compute_graph_field(system, fam, beta, samples, depth, UPPER, threads)
    with np.errstate(invalid="ignore"):
        crossed = hi_f.values < lo_f.values
    empty = lo_f.escaped | hi_f.escaped | crossed
    lo = np.where(empty, np.nan, lo_f.values)
    hi = np.where(empty, np.nan, hi_f.values)
    return IntervalField(np.asarray(samples, dtype=float), lo, hi, empty, depth, float(beta))


def contraction_check(system: BaseSystem, fam: FibreFamily, beta: float,
                      field, n_max: int, inverted: bool | None = None):
    """Smallest n with sup over traced orbits of the n-step derivative < 1.

    Returns (n, alpha_bound) or None when no such n <= n_max exists. For
    a repelling graph field pass inverted=True (the default infers it
    from the field's side) to check contraction of the inverse map
    instead. Escaped samples are ignored; interval fields are traced at
    both endpoints and the midpoint of each fibre section.
    """
    if isinstance(field, IntervalField):
        keep = ~field.empty
        th0 = field.samples[keep]
        starts = [field.lo[keep], 0.5 * (field.lo[keep] + field.hi[keep]), field.hi[keep]]
        thetas = np.concatenate([th0] * 3, axis=0)
        x = np.concatenate(starts)
        if inverted is None:
            inverted = False
    else:
        keep = field.alive
        thetas = field.samples[keep]
        x = field.values[keep].copy()
        if inverted is None:
            inverted = _resolve(fam, field.which)[0] == "inverse"
    if len(x) == 0:
        return None

    log_prod = np.zeros(len(x))
    if not inverted:
        walk = _make_walker(system, thetas, 0)
        th = walk.position()
        for k in range(n_max):
            log_prod += np.log(fam.deriv_x(beta, th, x))
            worst = float(np.max(log_prod))
            if worst < 0.0:
                return k + 1, float(math.exp(worst))
            x = np.asarray(fam.eval(beta, th, x), dtype=float)
            if np.isnan(x).any():
                raise GraphEscaped("orbit escaped while tracing the derivative product")
            walk.shift(+1)
            th = walk.position()
    else:
        walk = _make_walker(system, thetas, 0)
        for k in range(n_max):
            walk.shift(-1)
            th = walk.position()
            x = np.asarray(fam.inverse(beta, th, x), dtype=float)
            if np.isnan(x).any():
                raise GraphEscaped("inverse orbit escaped while tracing the derivative product")
            log_prod -= np.log(fam.deriv_x(beta, th, x))
            worst = float(np.max(log_prod))
            if worst < 0.0:
                return k + 1, float(math.exp(worst))
    return None
