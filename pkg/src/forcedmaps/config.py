"""Run configuration: JSON schema parsing and CLI flag resolution.

Schema (all sections optional unless a command needs them):

    {
      "base":  {"kind": "rotation"|"torus"|"identity"|"periodic",
                "rho": number?, "points": [[x,y], ...]?, "dimension": 1|2?},
      "fibre": {"kind": "arctan1d"|"arctan2d",
                "alpha": number, "gamma": number, "Gamma": [lo, hi]},
      "flow":  {"t0": number, "rho_flow": number,
                "field": "linear"|"quadratic_cap", "params": {...}},
      "beta": number, "beta_grid": [start, stop, count] | [b0, b1, ...],
      "samples": int, "depth": int|"auto", "tol": number, "n_max": int,
      "seed": int, "sampling": "grid"|"lowdiscrepancy", "threads": int,
      "theta0": number|[t1,t2], "lyap_steps": int,
      "target": "beta_c"|"beta_hat",
      "restrict": {"points": [[...], ...]} | {"seed_point": [...], "orbit_len": int}
    }

Command-line flags override file values; every JSON artifact embeds the
resolved configuration so a run can be reproduced byte for byte.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from .base_systems import BaseSystem, GOLDEN_MEAN
from .errors import ConfigError
from .fibre_maps import FibreFamily, GammaBoundary, arctan_1d, arctan_2d
from .flow_adapter import ScalarFlowSystem, linear_field, quadratic_cap_field

_DEFAULTS = {
    "samples": 2000,
    "depth": 10000,
    "tol": None,          # resolved per base kind
    "n_max": 10**6,
    "seed": 0,
    "sampling": "grid",
    "threads": 0,         # 0 = machine parallelism
    "lyap_steps": 100000,
    "target": "beta_c",
    "format": "json",
    "plot": True,
}

# sampled continuum bases tolerate less than exact finite ones
_TOL_BY_KIND = {"rotation": 1e-4, "torus": 1e-4, "identity": 1e-6, "periodic": 1e-6}


def load_config_file(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except FileNotFoundError as e:
        raise ConfigError(f"config file not found: {path}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"config file is not valid JSON: {e}") from e
    if not isinstance(data, dict):
        raise ConfigError("config root must be a JSON object")
    return data


def build_base(cfg: dict) -> BaseSystem:
    kind = cfg.get("kind")
    if kind == "rotation":
        return BaseSystem.rotation(float(cfg.get("rho", GOLDEN_MEAN)))
    if kind == "torus":
        return BaseSystem.torus()
    if kind == "identity":
        return BaseSystem.identity(int(cfg.get("dimension", 1)))
    if kind == "periodic":
        pts = cfg.get("points")
        if not pts:
            raise ConfigError("periodic base needs a 'points' list")
        return BaseSystem.periodic_orbit([tuple(p) if isinstance(p, (list, tuple)) else (p,)
                                          for p in pts])
    raise ConfigError(f"unknown base kind {kind!r}")


def build_fibre(cfg: dict) -> FibreFamily:
    kind = cfg.get("kind")
    if kind not in ("arctan1d", "arctan2d"):
        raise ConfigError(f"unknown fibre kind {kind!r}")
    if "alpha" not in cfg or "gamma" not in cfg:
        raise ConfigError("fibre config needs 'alpha' and 'gamma'")
    lo, hi = cfg.get("Gamma", [0.0, 2.0])
    gamma = GammaBoundary.constant(float(lo), float(hi))
    maker = arctan_1d if kind == "arctan1d" else arctan_2d
    return maker(float(cfg["alpha"]), float(cfg["gamma"]), gamma=gamma)


def build_flow(cfg: dict) -> ScalarFlowSystem:
    field_kind = cfg.get("field")
    params = cfg.get("params", {})
    if field_kind == "linear":
        F, dF = linear_field(float(params.get("a", -1.0)),
                             float(params.get("b0", 0.0)),
                             float(params.get("b_amp", 0.0)))
    elif field_kind == "quadratic_cap":
        F, dF = quadratic_cap_field(float(params.get("c0", 0.5)),
                                    float(params.get("c_amp", 0.0)))
    else:
        raise ConfigError(f"unknown flow field {field_kind!r}")
    g = cfg.get("Gamma", [0.0, 2.0])
    return ScalarFlowSystem(
        F, dF,
        t0=float(cfg.get("t0", 1.0)),
        rho_flow=float(cfg.get("rho_flow", 0.0)),
        gamma=GammaBoundary.constant(float(g[0]), float(g[1])),
        x_bound=float(cfg.get("x_bound", 1e6)),
        name=field_kind,
    )


@dataclass
class RunConfig:
    """Resolved settings for one CLI invocation."""

    raw: dict
    base: BaseSystem | None = None
    fibre: FibreFamily | None = None
    flow: ScalarFlowSystem | None = None
    out_dir: str = "out"
    params: dict = field(default_factory=dict)

    def require_system(self):
        if self.base is None or self.fibre is None:
            raise ConfigError("this command needs 'base' and 'fibre' config sections")
        if self.base.dimension != self.fibre.theta_dim:
            raise ConfigError("base dimension and fibre theta dimension disagree")
        return self.base, self.fibre

    def resolved(self) -> dict:
        """The configuration that actually ran, embedded in every JSON output."""
        return {"config": self.raw, "out": self.out_dir, **self.params}


def resolve(config: dict, overrides: dict, out_dir: str) -> RunConfig:
    """Merge file config with CLI flag overrides; flags win."""
    raw = dict(config)
    params = dict(_DEFAULTS)
    for key in ("beta", "beta_grid", "samples", "depth", "tol", "n_max", "seed",
                "sampling", "threads", "theta0", "lyap_steps", "target", "format",
                "plot", "alpha", "offset", "restrict", "which"):
        if key in config:
            params[key] = config[key]
    for key, val in overrides.items():
        if val is not None:
            params[key] = val
            raw[key] = val
    rc = RunConfig(raw=raw, out_dir=out_dir, params=params)
    if "base" in config:
        rc.base = build_base(config["base"])
    if "fibre" in config:
        rc.fibre = build_fibre(config["fibre"])
    if "flow" in config:
        rc.flow = build_flow(config["flow"])
    if params.get("tol") is None and rc.base is not None:
        params["tol"] = _TOL_BY_KIND[rc.base.kind]
    if not params.get("threads"):
        params["threads"] = os.cpu_count() or 1
    return rc


def ensure_writable(out_dir: str):
    """Fail before computing when outputs cannot be written."""
    try:
        os.makedirs(out_dir, exist_ok=True)
        probe = os.path.join(out_dir, ".write_probe")
        with open(probe, "w") as fh:
            fh.write("")
        os.remove(probe)
    except OSError as e:
        raise ConfigError(f"output directory {out_dir!r} is not writable: {e}") from e


def beta_grid_from(params: dict) -> list[float]:
    grid = params.get("beta_grid")
    if grid is None:
        raise ConfigError("this command needs 'beta_grid'")
    if len(grid) == 3 and isinstance(grid[2], int) and grid[2] > 1:
        lo, hi, n = float(grid[0]), float(grid[1]), int(grid[2])
        return list(np.linspace(lo, hi, n))
    return [float(b) for b in grid]
