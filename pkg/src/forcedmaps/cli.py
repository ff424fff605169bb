"""Command-line front end.

Subcommands: graphs, betac, sweep, lyap, oracle, flowmap. Flags override
config-file values. Exit codes: 0 success, 2 configuration error,
3 precondition failure, 4 numerical failure. Diagnostics go to stderr;
artifacts (CSV, JSON and, on the report paths, PNG figures) go to the
output directory.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import bifurcation, graph_engine, oracle, report
from .base_systems import sample_thetas
from .config import (RunConfig, beta_grid_from, ensure_writable,
                     load_config_file, resolve)
from .errors import (Blowup, ConfigError, ForcedMapsError, GraphEscaped,
                     MismatchedFields, NoBracket, NotInvariant,
                     PreconditionFailed, ValidationFailed)
from .flow_adapter import as_fibre_family, time_t0_map
from .graph_engine import (LOWER, UPPER, adaptive_graph_field,
                           compute_graph_field, lyapunov, pinching_report)


def _warn(msg: str):
    print(f"warning: {msg}", file=sys.stderr)


def _samples_for(rc: RunConfig, base):
    return sample_thetas(base, int(rc.params["samples"]),
                         rc.params.get("sampling", "grid"), int(rc.params["seed"]))


def _field_pair(rc: RunConfig, base, fam, beta, samples):
    depth = rc.params["depth"]
    threads = int(rc.params["threads"])
    if depth == "auto":
        up, _ = adaptive_graph_field(base, fam, beta, samples, UPPER,
                                     max_depth=int(rc.params["n_max"]), threads=threads)
        lo, _ = adaptive_graph_field(base, fam, beta, samples, LOWER,
                                     max_depth=int(rc.params["n_max"]), threads=threads)
        # adaptive schedules may stop at different depths; recompute the
        # shallower one so the pair shares a depth
        if up.depth != lo.depth:
            d = max(up.depth, lo.depth)
            up = compute_graph_field(base, fam, beta, samples, d, UPPER, threads)
            lo = compute_graph_field(base, fam, beta, samples, d, LOWER, threads)
        return lo, up
    depth = int(depth)
    lo = compute_graph_field(base, fam, beta, samples, depth, LOWER, threads)
    up = compute_graph_field(base, fam, beta, samples, depth, UPPER, threads)
    return lo, up


def cmd_graphs(rc: RunConfig) -> int:
    base, fam = rc.require_system()
    if rc.params.get("beta") is None:
        raise ConfigError("graphs needs a beta (config key 'beta' or --beta)")
    beta = float(rc.params["beta"])
    samples = _samples_for(rc, base)
    lo, up = _field_pair(rc, base, fam, beta, samples)
    report.write_graph_field_csv(lo, report.out_path(rc.out_dir, "lower.csv"))
    report.write_graph_field_csv(up, report.out_path(rc.out_dir, "upper.csv"))
    if up.escaped.all():
        _warn(f"upper graph escaped at every sample (beta = {beta:g}); "
              "no invariant graphs in the strip")
    payload = {"beta": beta, **rc.resolved()}
    try:
        rep = pinching_report(lo, up)
        payload.update(report.pinching_payload(rep))
    except (MismatchedFields, GraphEscaped) as e:
        payload.update({"min_gap": None, "classification": None, "note": str(e)})
        _warn(f"pinching report unavailable: {e}")
    report.dump_json(payload, report.out_path(rc.out_dir, "pinching.json"))
    if rc.params.get("plot", True):
        report.render_graphs_png(lo, up, report.out_path(rc.out_dir, "graphs.png"), beta)
    return 0


def _restricted(rc: RunConfig, base, fam):
    restrict = rc.params["restrict"]
    tol = float(rc.params["tol"] or 1e-6)
    n_max = int(rc.params["n_max"])
    threads = int(rc.params["threads"])
    if "points" in restrict:
        pts = [tuple(p) if isinstance(p, (list, tuple)) else (p,) for p in restrict["points"]]
        return bifurcation.find_beta_c_restricted(
            base, fam, pts, tol=tol, n_max=n_max, threads=threads)
    if "seed_point" in restrict:
        seed = restrict["seed_point"]
        seed = tuple(seed) if isinstance(seed, (list, tuple)) else (seed,)
        seg = bifurcation.orbit_segment(base, np.asarray(seed, dtype=float)
                                        if len(seed) > 1 else float(seed[0]),
                                        int(restrict.get("orbit_len", 10000)))
        return bifurcation.find_beta_c_restricted(
            base, fam, seg, tol=tol, n_max=n_max, threads=threads,
            label=f"orbit_segment(seed={list(seed)})", verify=False)
    raise ConfigError("restrict needs 'points' or 'seed_point'")


def cmd_betac(rc: RunConfig) -> int:
    base, fam = rc.require_system()
    if rc.params.get("restrict"):
        result = _restricted(rc, base, fam)
    else:
        samples = _samples_for(rc, base)
        tol = float(rc.params["tol"])
        n_max = int(rc.params["n_max"])
        threads = int(rc.params["threads"])
        if rc.params.get("target", "beta_c") == "beta_hat":
            result = bifurcation.find_beta_hat(base, fam, tol, samples, n_max, threads)
        else:
            result = bifurcation.find_beta_c(base, fam, tol, samples, n_max, threads)
    payload = {**result.payload(), **rc.resolved()}
    if rc.params.get("format", "json") == "csv":
        path = report.out_path(rc.out_dir, "betac.csv")
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("beta_c,bracket_lo,bracket_hi,tol,restricted_to,method,samples,n_max\n")
            fh.write(",".join([report.fmt(result.beta_c), report.fmt(result.bracket[0]),
                               report.fmt(result.bracket[1]), report.fmt(result.tol),
                               result.restricted_to or "", result.method,
                               str(result.n_samples), str(result.existence_depth)]) + "\n")
    else:
        report.dump_json(payload, report.out_path(rc.out_dir, "betac.json"))
    print(f"beta_c = {result.beta_c:.10g}  bracket = "
          f"[{result.bracket[0]:.10g}, {result.bracket[1]:.10g}]")
    return 0


def cmd_sweep(rc: RunConfig) -> int:
    base, fam = rc.require_system()
    grid = beta_grid_from(rc.params)
    samples = _samples_for(rc, base)
    depth = rc.params["depth"]
    depth = 10000 if depth == "auto" else int(depth)
    rows = bifurcation.sweep(base, fam, grid, samples, n_max=depth,
                             lyap_steps=min(int(rc.params["lyap_steps"]), 20000),
                             threads=int(rc.params["threads"]))
    report.write_sweep_csv(rows, report.out_path(rc.out_dir, "sweep.csv"))
    if rc.params.get("plot", True):
        report.render_sweep_png(rows, report.out_path(rc.out_dir, "sweep.png"))
    return 0


def cmd_lyap(rc: RunConfig) -> int:
    base, fam = rc.require_system()
    if rc.params.get("beta") is None:
        raise ConfigError("lyap needs a beta (config key 'beta' or --beta)")
    beta = float(rc.params["beta"])
    theta0 = rc.params.get("theta0")
    if theta0 is None:
        theta0 = 0.0 if base.dimension == 1 else (0.0, 0.0)
    n_steps = int(rc.params["lyap_steps"])
    lam_u = lyapunov(base, fam, beta, theta0 if base.dimension == 1
                     else np.asarray(theta0, dtype=float), UPPER, n_steps)
    lam_l = lyapunov(base, fam, beta, theta0 if base.dimension == 1
                     else np.asarray(theta0, dtype=float), LOWER, n_steps)
    payload = {"beta": beta, "theta0": theta0, "n_steps": n_steps,
               "lambda_upper": lam_u, "lambda_lower": lam_l, **rc.resolved()}
    report.dump_json(payload, report.out_path(rc.out_dir, "lyap.json"))
    print(f"lambda_upper = {lam_u:.6g}  lambda_lower = {lam_l:.6g}")
    return 0


def cmd_oracle(rc: RunConfig) -> int:
    alpha = rc.params.get("alpha")
    offset = rc.params.get("offset")
    if alpha is None or offset is None:
        raise ConfigError("oracle needs --alpha and --offset (or config keys)")
    alpha, offset = float(alpha), float(offset)
    closed = oracle.closed_form_betac_arctan(alpha, offset)

    def g(beta, x):
        return float(np.arctan(alpha * x) - 2.0 * beta - offset)

    def g_x(beta, x):
        return float(alpha / (1.0 + (alpha * x) ** 2))

    sol = oracle.solve_saddle_node_1d(g, g_x, (0.0, 2.0), beta_range=(-5.0, 5.0))
    payload = {
        "alpha": alpha, "offset": offset,
        "beta_c_closed_form": closed,
        "beta_c_newton": sol.beta_star,
        "x_star": sol.x_star,
        "residual_fixed_point": sol.residual_fixed_point,
        "residual_unit_slope": sol.residual_unit_slope,
        **rc.resolved(),
    }
    report.dump_json(payload, report.out_path(rc.out_dir, "oracle.json"))
    print(f"beta_c = {closed:.10f} (closed form), {sol.beta_star:.10f} (tangency solve)")
    return 0


def cmd_flowmap(rc: RunConfig) -> int:
    if rc.flow is None:
        raise ConfigError("flowmap needs a 'flow' config section")
    fam = as_fibre_family(rc.flow)
    beta = float(rc.params.get("beta") or 0.0)
    n_th = min(int(rc.params["samples"]), 64)
    thetas = np.arange(n_th, dtype=float) / n_th
    lo = rc.flow.gamma.lower(thetas)
    hi = rc.flow.gamma.upper(thetas)
    xs = np.linspace(float(np.min(lo)), float(np.max(hi)), 33)
    path = report.out_path(rc.out_dir, "flowmap.csv")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("theta,x,fx,dfx\n")
        for x in xs:
            fx, dfx = time_t0_map(rc.flow, beta, thetas, np.full(n_th, x))
            for j in range(n_th):
                fh.write(",".join([report.fmt(thetas[j]), report.fmt(x),
                                   report.fmt(fx[j]), report.fmt(dfx[j])]) + "\n")
    report.dump_json({"beta": beta, "orientation": fam.orientation,
                      "integration_steps": fam.integration_steps, **rc.resolved()},
                     report.out_path(rc.out_dir, "flowmap.json"))
    return 0


_COMMANDS = {
    "graphs": cmd_graphs,
    "betac": cmd_betac,
    "sweep": cmd_sweep,
    "lyap": cmd_lyap,
    "oracle": cmd_oracle,
    "flowmap": cmd_flowmap,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="forcedmaps",
        description="Invariant graphs, Lyapunov exponents and saddle-node "
                    "bifurcation analysis of forced monotone interval maps.")
    sub = p.add_subparsers(dest="command", required=True)
    for name, help_text in [
        ("graphs", "bounding graph fields and a pinching report at one beta"),
        ("betac", "bisect the critical parameter (full base or restricted)"),
        ("sweep", "diagnostics along a beta grid"),
        ("lyap", "Lyapunov exponents of both bounding graphs at one beta"),
        ("oracle", "closed-form and tangency-solver bifurcation point"),
        ("flowmap", "sample the time-t0 map induced by a scalar flow"),
    ]:
        sp = sub.add_parser(name, help=help_text)
        sp.add_argument("--config", help="JSON config file")
        sp.add_argument("--beta", type=float)
        sp.add_argument("--samples", type=int)
        sp.add_argument("--depth", help="pullback depth (integer or 'auto')")
        sp.add_argument("--tol", type=float)
        sp.add_argument("--threads", type=int)
        sp.add_argument("--out", default="out", help="output directory (default: out)")
        sp.add_argument("--format", choices=("csv", "json"))
        sp.add_argument("--seed", type=int)
        sp.add_argument("--no-plot", action="store_true",
                        help="skip PNG rendering on report paths")
        if name == "oracle":
            sp.add_argument("--alpha", type=float)
            sp.add_argument("--offset", type=float)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load_config_file(args.config) if args.config else {}
        overrides = {
            "beta": args.beta,
            "samples": args.samples,
            "tol": args.tol,
            "threads": args.threads,
            "format": args.format,
            "seed": args.seed,
        }
        if args.depth is not None:
            overrides["depth"] = args.depth if args.depth == "auto" else int(args.depth)
        if args.no_plot:
            overrides["plot"] = False
        if getattr(args, "alpha", None) is not None:
            overrides["alpha"] = args.alpha
        if getattr(args, "offset", None) is not None:
            overrides["offset"] = args.offset
        rc = resolve(config, overrides, args.out)
        ensure_writable(rc.out_dir)
        return _COMMANDS[args.command](rc)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except (PreconditionFailed, NotInvariant, ValidationFailed) as e:
        print(f"error: {e}", file=sys.stderr)
        return 3
    except (NoBracket, Blowup, GraphEscaped, MismatchedFields, ForcedMapsError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 4
    except Exception as e:  # internal numerical failure
        print(f"internal error: {type(e).__name__}: {e}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
