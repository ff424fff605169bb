"""Invertible driving systems on the circle and the 2-torus.

The driving (base) transformation is a closed enumeration: rigid circle
rotation, a two-shear torus map, a finite periodic orbit, or the identity.
All kinds have closed-form inverses, so forward and backward orbits are
exact up to rounding; long rotation orbits use a compensated product so
positional error stays at machine level independently of orbit length.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

GOLDEN_MEAN = (math.sqrt(5.0) - 1.0) / 2.0

_SPLIT = 134217729.0  # 2**27 + 1
_MATCH_TOL = 1e-9


def _two_prod(a: float, b: float) -> tuple[float, float]:
    p = a * b
    ca = _SPLIT * a
    ah = ca - (ca - a)
    al = a - ah
    cb = _SPLIT * b
    bh = cb - (cb - b)
    bl = b - bh
    err = ((ah * bh - p) + ah * bl + al * bh) + al * bl
    return p, err


def frac_times(n: int, rho: float) -> float:
    """frac(n * rho) with the product compensated, exact to ~1 ulp of 1."""
    p, err = _two_prod(float(n), rho)
    return ((p % 1.0) + err) % 1.0


@dataclass(frozen=True)
class BasePoint:
    """A point of the base space, coordinates taken modulo 1."""

    coords: tuple[float, ...]

    def __post_init__(self):
        if len(self.coords) not in (1, 2):
            raise ConfigError(f"base point must have 1 or 2 coordinates, got {len(self.coords)}")
        object.__setattr__(self, "coords", tuple(float(c) % 1.0 for c in self.coords))

    @property
    def dimension(self) -> int:
        return len(self.coords)

    def as_array(self):
        c = self.coords
        return np.float64(c[0]) if len(c) == 1 else np.array(c, dtype=float)


def as_base_point(row, dimension: int) -> BasePoint:
    if dimension == 1:
        return BasePoint((float(row),))
    return BasePoint(tuple(float(c) for c in np.asarray(row).reshape(2)))


def _circle_dist(a, b):
    d = np.abs(np.asarray(a, float) - np.asarray(b, float)) % 1.0
    return np.minimum(d, 1.0 - d)


class BaseSystem:
    """Closed enumeration of invertible base maps.

    Instances are immutable after construction and safe to share across
    workers; every operation is a pure function of its arguments.

    Array convention: a batch of points is an ndarray of shape (n,) in
    dimension 1 and (n, 2) in dimension 2.
    """

    def __init__(self, kind: str, dimension: int, rho: float | None = None, points=None):
        if kind not in ("rotation", "torus", "identity", "periodic"):
            raise ConfigError(f"unknown base kind {kind!r}")
        self.kind = kind
        self.dimension = dimension
        self.rho = rho
        if points is not None:
            pts = np.atleast_1d(np.asarray(points, dtype=float)) % 1.0
            if dimension == 2:
                pts = pts.reshape(-1, 2)
            self.points = pts
        else:
            self.points = None

    @classmethod
    def rotation(cls, rho: float = GOLDEN_MEAN) -> "BaseSystem":
        return cls("rotation", 1, rho=float(rho))

    @classmethod
    def torus(cls) -> "BaseSystem":
        return cls("torus", 2)

    @classmethod
    def identity(cls, dimension: int = 1) -> "BaseSystem":
        return cls("identity", dimension)

    @classmethod
    def periodic_orbit(cls, points) -> "BaseSystem":
        rows = [p.coords if isinstance(p, BasePoint) else tuple(np.atleast_1d(p)) for p in points]
        dim = len(rows[0])
        if any(len(r) != dim for r in rows):
            raise ConfigError("periodic orbit points must share one dimension")
        arr = np.asarray(rows, dtype=float) % 1.0
        if dim == 1:
            arr = arr.reshape(-1)
        return cls("periodic", dim, points=arr)

    def __repr__(self):
        extra = ""
        if self.kind == "rotation":
            extra = f", rho={self.rho!r}"
        elif self.kind == "periodic":
            extra = f", {len(self.points)} points"
        return f"BaseSystem({self.kind}{extra})"

    # -- batched maps -------------------------------------------------

    def forward_many(self, th):
        th = np.asarray(th, dtype=float)
        if self.kind == "identity":
            return th.copy()
        if self.kind == "rotation":
            return (th + self.rho) % 1.0
        if self.kind == "torus":
            t1, t2 = th[..., 0], th[..., 1]
            t2n = (t2 + 0.5 * np.sin(2.0 * np.pi * t1)) % 1.0
            t1n = (t1 + 0.5 * np.sin(2.0 * np.pi * t2n)) % 1.0
            return np.stack([t1n, t2n], axis=-1)
        idx = self.match_indices(th)
        return self.points[(idx + 1) % len(self.points)]

    def backward_many(self, th):
        th = np.asarray(th, dtype=float)
        if self.kind == "identity":
            return th.copy()
        if self.kind == "rotation":
            return (th - self.rho) % 1.0
        if self.kind == "torus":
            # reverse the two shears in the opposite order
            t1, t2 = th[..., 0], th[..., 1]
            t1o = (t1 - 0.5 * np.sin(2.0 * np.pi * t2)) % 1.0
            t2o = (t2 - 0.5 * np.sin(2.0 * np.pi * t1o)) % 1.0
            return np.stack([t1o, t2o], axis=-1)
        idx = self.match_indices(th)
        return self.points[(idx - 1) % len(self.points)]

    def iterate_many(self, th, n: int):
        """n-fold forward (n > 0) or backward (n < 0) image of a batch."""
        th = np.asarray(th, dtype=float)
        if n == 0 or self.kind == "identity":
            return th.copy()
        if self.kind == "rotation":
            return (th + frac_times(n, self.rho)) % 1.0
        if self.kind == "periodic":
            idx = self.match_indices(th)
            return self.points[(idx + n) % len(self.points)]
        step = self.forward_many if n > 0 else self.backward_many
        for _ in range(abs(n)):
            th = step(th)
        return th

    def match_indices(self, th):
        """Indices of stored periodic points matching a batch, tol 1e-9."""
        th2 = np.asarray(th, dtype=float).reshape(-1, 1) if self.dimension == 1 \
            else np.asarray(th, dtype=float).reshape(-1, 2)
        pts = self.points.reshape(len(self.points), -1)
        d = _circle_dist(th2[:, None, :], pts[None, :, :]).max(axis=-1)
        idx = d.argmin(axis=1)
        if (d[np.arange(len(idx)), idx] > _MATCH_TOL).any():
            raise ConfigError("point does not lie on the stored periodic orbit")
        if np.asarray(th, dtype=float).ndim == self.dimension - 1:
            return int(idx[0])
        return idx


# -- point-level operations -------------------------------------------


def _point_to_batch(system: BaseSystem, point: BasePoint):
    if point.dimension != system.dimension:
        raise ConfigError("point dimension does not match the base system")
    if system.dimension == 1:
        return np.array([point.coords[0]])
    return np.array([point.coords])


def _batch_to_point(system: BaseSystem, batch) -> BasePoint:
    row = batch[0]
    return as_base_point(row, system.dimension)


def forward(system: BaseSystem, point: BasePoint) -> BasePoint:
    """One forward step of the base map."""
    return _batch_to_point(system, system.forward_many(_point_to_batch(system, point)))


def backward(system: BaseSystem, point: BasePoint) -> BasePoint:
    """One backward step; forward(backward(p)) == p to within 1e-12."""
    return _batch_to_point(system, system.backward_many(_point_to_batch(system, point)))


def orbit(system: BaseSystem, point: BasePoint, n: int, direction: str = "forward") -> list[BasePoint]:
    """The n+1 points point, ω^{±1}(point), ..., ω^{±n}(point)."""
    if n < 0:
        raise ConfigError("orbit length must be non-negative")
    if direction not in ("forward", "backward"):
        raise ConfigError(f"unknown direction {direction!r}")
    step = system.forward_many if direction == "forward" else system.backward_many
    batch = _point_to_batch(system, point)
    out = [_batch_to_point(system, batch)]
    for _ in range(n):
        batch = step(batch)
        out.append(_batch_to_point(system, batch))
    return out


def sample_thetas(system: BaseSystem, n: int, mode: str = "grid", seed: int = 0):
    """Sample points of the base space for field computations.

    Uniform grid by default; 'lowdiscrepancy' draws a seeded Halton set.
    For a 2-d grid the count is rounded to the nearest square. A periodic
    base always returns its own stored points.
    """
    if system.kind == "periodic":
        return system.points.copy()
    if mode not in ("grid", "lowdiscrepancy"):
        raise ConfigError(f"unknown sampling mode {mode!r}")
    if n < 1:
        raise ConfigError("sample count must be positive")
    if mode == "lowdiscrepancy":
        from scipy.stats import qmc

        sampler = qmc.Halton(d=system.dimension, scramble=True, seed=seed)
        pts = sampler.random(n)
        return pts[:, 0].copy() if system.dimension == 1 else pts
    if system.dimension == 1:
        return np.arange(n, dtype=float) / n
    k = max(1, round(math.sqrt(n)))
    g = np.arange(k, dtype=float) / k
    t1, t2 = np.meshgrid(g, g, indexing="ij")
    return np.column_stack([t1.ravel(), t2.ravel()])
