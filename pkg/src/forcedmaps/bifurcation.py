"""Critical-parameter search by monotone bisection on graph existence.

Existence of a bounding invariant graph is monotone in the parameter:
fibre maps move one way in beta, so the attracting pullback either
settles (graphs exist) or leaves the strip (none exist), and the
transition happens at a single critical value. The searches below
bracket that value by bisection on the existence verdict; a budget-
exhausted verdict is treated as existence when tightening from below,
because critical slowing down near the transition would otherwise bias
the estimate low.

Two flavours of the last parameter are exposed: the graphs-over-all-of-
the-base one (every sample survives) and the last-bounded-orbit one
(some sample survives). On a minimal base they coincide.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .base_systems import BasePoint, BaseSystem
from .errors import ConfigError, GraphEscaped, NotInvariant, PreconditionFailed
from .fibre_maps import FibreFamily
from .graph_engine import (CONV_TOL, LOWER, MAX_DEPTH, UPPER, attracting_which,
                           compute_graph_field, lyapunov, _pullback_values)

_INVARIANCE_TOL = 1e-9


@dataclass
class ExistenceResult:
    verdict: str          # "exists" | "escaped" | "undecided"
    depth: int
    n_escaped: int
    n_samples: int


@dataclass
class BifurcationResult:
    """A bracketed critical parameter estimate."""

    beta_c: float
    bracket: tuple[float, float]
    tol: float
    existence_depth: int
    restricted_to: str | None
    method: str
    n_samples: int
    verdict_lo: str
    verdict_hi: str

    def payload(self) -> dict:
        return {
            "beta_c": self.beta_c,
            "bracket": list(self.bracket),
            "tol": self.tol,
            "restricted_to": self.restricted_to,
            "method": self.method,
            "samples": self.n_samples,
            "n_max": self.existence_depth,
            "verdict_lo": self.verdict_lo,
            "verdict_hi": self.verdict_hi,
        }


@dataclass
class SweepRow:
    """One parameter value of a bifurcation-diagram sweep."""

    beta: float
    min_gap: float | None
    lambda_upper: float | None
    lambda_lower: float | None
    fraction_bounded: float


def existence_check(system: BaseSystem, fam: FibreFamily, beta: float, samples,
                    n_max: int = MAX_DEPTH, mode: str = "all",
                    conv_tol: float = CONV_TOL, start_depth: int = 64,
                    threads: int = 1) -> ExistenceResult:
    """Adaptive-depth existence test using only the attracting pullback.

    mode "all": graphs must survive at every sample (escape anywhere is
    decisive). mode "any": at least one bounded sample suffices, and the
    verdict is escape only once every sample has escaped.
    """
    if mode not in ("all", "any"):
        raise ConfigError(f"unknown existence mode {mode!r}")
    samples = np.asarray(samples, dtype=float)
    n = samples.shape[0]
    if n == 0:
        raise ConfigError("sample set must be nonempty")
    which = attracting_which(fam)
    depth = min(start_depth, max(1, n_max))
    prev = None
    while True:
        if threads > 1:
            fld = compute_graph_field(system, fam, beta, samples, depth, which, threads)
            values, escaped = fld.values, fld.escaped
        else:
            values, escaped = _pullback_values(system, fam, beta, samples, depth, which,
                                               stop_on_escape=(mode == "all"))
        n_esc = int(escaped.sum())
        if mode == "all" and n_esc > 0:
            return ExistenceResult("escaped", depth, n_esc, n)
        if mode == "any" and n_esc == n:
            return ExistenceResult("escaped", depth, n_esc, n)
        alive = ~escaped
        if prev is not None:
            both = alive & ~np.isnan(prev)
            delta = float(np.max(np.abs(values[both] - prev[both]))) if both.any() else 0.0
            if delta < conv_tol:
                return ExistenceResult("exists", depth, n_esc, n)
        prev = values
        if depth * 2 > n_max:
            return ExistenceResult("undecided", depth, n_esc, n)
        depth *= 2


def has_invariant_graph(system: BaseSystem, fam: FibreFamily, beta: float,
                        samples, n_max: int = MAX_DEPTH, mode: str = "all",
                        threads: int = 1) -> str:
    """Existence verdict at one parameter: exists, escaped or undecided."""
    return existence_check(system, fam, beta, samples, n_max, mode, threads=threads).verdict


def _bisect(system, fam, samples, tol, n_max, mode, threads, label, method="bisection"):
    b_lo, b_hi = fam.beta_range
    v0 = existence_check(system, fam, b_lo, samples, n_max, mode, threads=threads)
    if v0.verdict != "exists":
        raise PreconditionFailed(
            f"no invariant graph detected at beta={b_lo} (verdict {v0.verdict})")
    v1 = existence_check(system, fam, b_hi, samples, n_max, mode, threads=threads)
    if v1.verdict != "escaped":
        raise PreconditionFailed(
            f"invariant graph persists at beta={b_hi} (verdict {v1.verdict})")
    lo, hi = b_lo, b_hi
    verdict_lo, verdict_hi = v0.verdict, v1.verdict
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        v = existence_check(system, fam, mid, samples, n_max, mode, threads=threads)
        if v.verdict == "escaped":
            hi, verdict_hi = mid, v.verdict
        else:
            # undecided tightens conservatively from below
            lo, verdict_lo = mid, v.verdict
    return BifurcationResult(
        beta_c=0.5 * (lo + hi),
        bracket=(lo, hi),
        tol=tol,
        existence_depth=n_max,
        restricted_to=label,
        method=method,
        n_samples=len(np.asarray(samples)),
        verdict_lo=verdict_lo,
        verdict_hi=verdict_hi,
    )


def find_beta_c(system: BaseSystem, fam: FibreFamily, tol: float = 1e-4,
                samples=None, n_max: int = MAX_DEPTH, threads: int = 1) -> BifurcationResult:
    """Critical parameter of graph existence over the whole sampled base."""
    if samples is None:
        raise ConfigError("samples are required")
    return _bisect(system, fam, samples, tol, n_max, "all", threads, None)


def verify_invariant_set(system: BaseSystem, points) -> np.ndarray:
    """Check a finite point set is setwise fixed by the base map."""
    pts = np.asarray(points, dtype=float)
    fwd = system.forward_many(pts)
    a = pts.reshape(len(pts), -1)
    b = fwd.reshape(len(pts), -1)
    d = np.abs(a[:, None, :] - b[None, :, :]) % 1.0
    d = np.minimum(d, 1.0 - d).max(axis=-1)
    if not (d.min(axis=0) < _INVARIANCE_TOL).all():
        raise NotInvariant("the point set is not forward invariant under the base map")
    return pts


def orbit_segment(system: BaseSystem, seed, length: int) -> np.ndarray:
    """Approximate an invariant sub-base by a long orbit of a seed point."""
    if isinstance(seed, BasePoint):
        seed = seed.as_array()
    cur = np.asarray([seed], dtype=float) if system.dimension == 1 \
        else np.asarray(seed, dtype=float).reshape(1, 2)
    rows = [cur[0]]
    for _ in range(length - 1):
        cur = system.forward_many(cur)
        rows.append(cur[0])
    return np.asarray(rows)


def find_beta_c_restricted(system: BaseSystem, fam: FibreFamily, M,
                           tol: float = 1e-6, n_max: int = MAX_DEPTH,
                           label: str | None = None, threads: int = 1,
                           verify: bool = True) -> BifurcationResult:
    """Critical parameter over an invariant subset of the base.

    M is either a finite invariant point set (verified setwise fixed, a
    NotInvariant error otherwise) or a precomputed orbit-segment array
    standing in for an invariant circle (pass verify=False, the segment
    is invariant by construction only approximately).
    """
    pts = np.asarray([p.as_array() if isinstance(p, BasePoint) else p for p in M], dtype=float)
    if system.dimension == 2:
        pts = pts.reshape(-1, 2)
    else:
        pts = pts.reshape(-1)
    if verify:
        verify_invariant_set(system, pts)
    if label is None:
        label = f"invariant_set[{len(pts)}]"
    return _bisect(system, fam, pts, tol, n_max, "all", threads, label)


def find_beta_hat(system: BaseSystem, fam: FibreFamily, tol: float = 1e-4,
                  samples=None, n_max: int = MAX_DEPTH, threads: int = 1) -> BifurcationResult:
    """Last parameter with any strip-bounded orbit at sample resolution."""
    if samples is None:
        raise ConfigError("samples are required")
    return _bisect(system, fam, samples, tol, n_max, "any", threads, None,
                   method="bisection")


def sweep(system: BaseSystem, fam: FibreFamily, beta_grid, samples,
          n_max: int = 2**14, lyap_steps: int = 10000,
          threads: int = 1) -> list[SweepRow]:
    """Diagnostics along an ascending parameter grid.

    Each row carries the minimum gap between the bounding graphs, the
    two Lyapunov exponents seeded at the first sample, and the bounded
    fraction of the sample set; the gap and exponents are absent past
    escape.
    """
    beta_grid = [float(b) for b in beta_grid]
    if any(b2 <= b1 for b1, b2 in zip(beta_grid, beta_grid[1:])):
        raise ConfigError("beta grid must be sorted strictly ascending")
    samples = np.asarray(samples, dtype=float)
    theta0 = samples[0]
    rows = []
    for beta in beta_grid:
        up = compute_graph_field(system, fam, beta, samples, n_max, UPPER, threads)
        lo = compute_graph_field(system, fam, beta, samples, n_max, LOWER, threads)
        both = up.alive & lo.alive
        with np.errstate(invalid="ignore"):
            crossed = both & (up.values < lo.values)
        bounded = both & ~crossed
        fraction = float(np.mean(bounded))
        if bounded.any():
            gap = up.values[bounded] - lo.values[bounded]
            min_gap = float(np.min(gap))
        else:
            min_gap = None
        lam_u = lam_l = None
        if bounded.any():
            try:
                lam_u = lyapunov(system, fam, beta, theta0, UPPER, lyap_steps)
                lam_l = lyapunov(system, fam, beta, theta0, LOWER, lyap_steps)
            except GraphEscaped:
                lam_u = lam_l = None
        rows.append(SweepRow(beta, min_gap, lam_u, lam_l, fraction))
    return rows
