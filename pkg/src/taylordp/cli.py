"""Command-line front end.

Subcommands: solve-exact, solve-tapi, compare, bounds, reproduce.  Runs are
driven by INI config files (see docs/formats.md) or a small set of inline
flags; artifacts are CSV files whose bytes are deterministic across runs of
the same configuration.  The one-line run summary

    model, alpha, h, mode, max_rel_err, mean_rel_err, iters, wall_time

goes to stdout (timing is never written into the CSVs).

Exit codes: 0 success, 2 configuration/validation error, 1 solver error
(with a machine-readable category on stderr).
"""

from __future__ import annotations

import argparse
import hashlib
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import exact
from .bounds import (corner_states, discounted_accumulation, gap_report,
                     taylor_remainder, third_derivative_proxy)
from .config import ConfigError, ExperimentConfig, load_config
from .errors import LatticeMismatch, TaylorDpError
from .lattice import uniform_max_jump
from .models.routing import table_params, build_routing
from .report import (summary_line, write_chain_csv, write_gap_csv,
                     write_moments_csv, write_value_policy_csv)
from .tapi import TapiOptions, tapi_exact_improvement_variant, tapi_solve


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    jobs = getattr(args, "jobs", None) or os.environ.get("TAYLORDP_THREADS")
    if jobs:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ.setdefault(var, str(jobs))
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: config: {exc}", file=sys.stderr)
        return 2
    except LatticeMismatch as exc:
        print(f"error: lattice-mismatch: {exc}", file=sys.stderr)
        return 1
    except TaylorDpError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


def _build_parser():
    parser = argparse.ArgumentParser(prog="taylordp")
    sub = parser.add_subparsers(required=True)

    def common(p):
        p.add_argument("--config", help="INI experiment file")
        p.add_argument("--model", default=None)
        p.add_argument("--alpha", type=float, default=None)
        p.add_argument("--M", type=int, default=None)
        p.add_argument("--cost", default=None, help="service_rate cost variant")
        p.add_argument("--out-dir", default=None)
        p.add_argument("--jobs", type=int, default=None,
                       help="bound worker threads (also honors TAYLORDP_THREADS)")

    p = sub.add_parser("solve-exact", help="exact policy iteration on the fine lattice")
    common(p)
    p.set_defaults(func=cmd_solve_exact)

    p = sub.add_parser("solve-tapi", help="Taylored approximate policy iteration")
    common(p)
    p.add_argument("--h", type=int, default=None)
    p.add_argument("--improvement", choices=("approx", "exact"), default=None)
    p.add_argument("--disaggregation", choices=("multilinear", "pc"), default=None)
    p.add_argument("--one-step", choices=("on", "off"), default=None)
    p.add_argument("--out", default=None, help="fine value/policy CSV path")
    p.set_defaults(func=cmd_solve_tapi)

    p = sub.add_parser("compare", help="exactly evaluate two configs' policies and report gaps")
    p.add_argument("--config-a", required=True)
    p.add_argument("--config-b", required=True, help="baseline (reference) config")
    p.add_argument("--out-dir", default="out")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("bounds", help="remainder/accumulation/proxy diagnostics for oracle models")
    common(p)
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("reproduce", help="recompute benchmark table rows")
    p.add_argument("--table", type=int, choices=(1, 5), required=True)
    p.add_argument("--tier", choices=("fast", "full"), default="fast")
    p.add_argument("--out-dir", default="out")
    p.set_defaults(func=cmd_reproduce)
    return parser


def _config_from_args(args, mode) -> ExperimentConfig:
    if args.config:
        cfg = load_config(args.config)
    else:
        cfg = ExperimentConfig(mode=mode)
        if args.model:
            cfg.model_name = args.model
        if args.alpha is not None:
            cfg.alpha = args.alpha
        if args.M is not None:
            cfg.model_params["M"] = args.M
        if getattr(args, "cost", None):
            cfg.model_params["cost"] = args.cost
    if getattr(args, "h", None) is not None:
        cfg.h = args.h
    if getattr(args, "improvement", None):
        cfg.improvement = args.improvement
    if getattr(args, "disaggregation", None):
        cfg.disaggregation = args.disaggregation
    if getattr(args, "one_step", None):
        cfg.one_step = args.one_step == "on"
    if getattr(args, "out_dir", None):
        cfg.out_dir = args.out_dir
    cfg.mode = mode
    if cfg.model_name not in ("service_rate", "inventory", "routing", "heavy_traffic"):
        raise ConfigError(f"unknown model {cfg.model_name!r}")
    if cfg.h < 1:
        raise ConfigError("h must be a positive integer")
    return cfg


def _policy_for(cfg: ExperimentConfig, model):
    """Solve per the config's mode; returns (policy, values-or-None, iterations)."""
    if cfg.mode == "solve-exact":
        pi = exact.policy_iteration(model.mdp)
        return pi.policy, pi.values, pi.iterations
    if cfg.mode == "solve-tapi":
        solver = tapi_exact_improvement_variant if cfg.improvement == "exact" else tapi_solve
        res = solver(model.problem, cfg.tapi_options())
        return res.fine_policy, res.fine_values, res.iterations
    if cfg.mode == "heuristic-max-overflow":
        mdp = model.mdp
        policy = np.empty(mdp.n_states, dtype=np.int64)
        for i in range(mdp.n_states):
            totals = [np.sum(u) for u in mdp.actions_at(i)]
            policy[i] = int(np.argmax(totals))
        return policy, None, 0
    raise ConfigError(f"unknown mode {cfg.mode!r}")


def cmd_solve_exact(args) -> int:
    cfg = _config_from_args(args, "solve-exact")
    model = cfg.build_model()
    t0 = time.perf_counter()
    pi = exact.policy_iteration(model.mdp)
    out = Path(cfg.out_dir)
    write_value_policy_csv(out / f"{cfg.model_name}_exact_values.csv",
                           model.mdp, pi.values, pi.policy)
    print(summary_line(cfg.model_name, cfg.alpha, "", "exact", None, None,
                       pi.iterations, time.perf_counter() - t0))
    return 0


def cmd_solve_tapi(args) -> int:
    cfg = _config_from_args(args, "solve-tapi")
    model = cfg.build_model()
    t0 = time.perf_counter()
    solver = tapi_exact_improvement_variant if cfg.improvement == "exact" else tapi_solve
    res = solver(model.problem, cfg.tapi_options())
    out = Path(cfg.out_dir)
    path = Path(args.out) if getattr(args, "out", None) else out / f"{cfg.model_name}_tapi_h{cfg.h}.csv"
    write_value_policy_csv(path, model.mdp, res.fine_values, res.fine_policy)
    write_chain_csv(out / f"{cfg.model_name}_chain_h{cfg.h}.csv", res.chain)
    print(summary_line(cfg.model_name, cfg.alpha, cfg.h, f"tapi-{cfg.improvement}",
                       None, None, res.iterations, time.perf_counter() - t0))
    return 0


def cmd_compare(args) -> int:
    cfg_a = load_config(args.config_a)
    cfg_b = load_config(args.config_b)
    model_a = cfg_a.build_model()
    model_b = cfg_b.build_model()
    if model_a.mdp.lattice != model_b.mdp.lattice:
        raise LatticeMismatch(f"{model_a.mdp.lattice} vs {model_b.mdp.lattice}")
    t0 = time.perf_counter()
    pol_a, _, iters = _policy_for(cfg_a, model_a)
    pol_b, _, _ = _policy_for(cfg_b, model_b)
    v_a = exact.policy_evaluation(model_b.mdp, pol_a)
    v_b = exact.policy_evaluation(model_b.mdp, pol_b)
    rep = gap_report(v_a, v_b)
    rho = uniform_max_jump(model_b.mdp) if model_b.mdp.lattice.dim > 1 else 1
    corners = corner_states(model_b.mdp.lattice, rho)
    out = Path(args.out_dir)
    write_gap_csv(out / "compare_gaps.csv", model_b.mdp.lattice, v_b, v_a, rep,
                  corner_mask=corners)
    print(summary_line(cfg_a.model_name, cfg_a.alpha, cfg_a.h, f"{cfg_a.mode}-vs-{cfg_b.mode}",
                       rep.max_rel, rep.mean_rel, iters, time.perf_counter() - t0))
    return 0


def cmd_bounds(args) -> int:
    cfg = _config_from_args(args, "solve-exact")
    if cfg.model_name == "service_rate":
        # the closed form needs the quartic cost at the fixed control 1/2
        cfg.model_params.setdefault("cost", "quartic")
        cfg.model_params.setdefault("fixed_u", 0.5)
    model = cfg.build_model()
    oracle = getattr(model, "oracle", None)
    if oracle is None:
        raise ConfigError("bounds needs a model with a closed-form oracle "
                          "(service_rate quartic fixed_u=0.5 or heavy_traffic)")
    try:
        phi = oracle()
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    t0 = time.perf_counter()
    mdp = model.mdp
    policy = np.zeros(mdp.n_states, dtype=np.int64)
    v_u = exact.policy_evaluation(mdp, policy)
    states = mdp.lattice.states().astype(np.float64)
    v_hat = phi.value(states)
    remainder = taylor_remainder(model.problem, policy, phi)
    accumulation = discounted_accumulation(mdp, policy, np.abs(remainder))
    proxy = third_derivative_proxy(v_u) if mdp.lattice.dim == 1 else None
    rep = gap_report(v_hat, v_u)
    corners = corner_states(mdp.lattice, 1.0)
    out = Path(cfg.out_dir)
    write_gap_csv(out / f"{cfg.model_name}_bounds.csv", mdp.lattice, v_u, v_hat, rep,
                  remainder=remainder, accumulation=accumulation, proxy=proxy,
                  corner_mask=corners)
    write_moments_csv(out / f"{cfg.model_name}_moments.csv", model.problem)
    print(summary_line(cfg.model_name, cfg.alpha, "", "bounds", rep.max_rel,
                       rep.mean_rel, 0, time.perf_counter() - t0))
    return 0


def _cached_exact(model, cache_dir: Path, key: str):
    cache_dir.mkdir(parents=True, exist_ok=True)
    digest = hashlib.sha256(key.encode()).hexdigest()[:16]
    path = cache_dir / f"exact_{digest}.npz"
    if path.exists():
        data = np.load(path)
        return data["values"], data["policy"]
    pi = exact.policy_iteration(model.mdp)
    np.savez(path, values=pi.values, policy=pi.policy)
    return pi.values, pi.policy


def cmd_reproduce(args) -> int:
    out = Path(args.out_dir)
    rows = []
    if args.table == 5:
        alphas = (0.99,) if args.tier == "fast" else (0.99, 0.999)
        factors = (0.8,) if args.tier == "fast" else (0.8, 1.0)
        hs = (1, 2, 4)
        print("table 5: lam_factor, alpha, h, tapi, exact_improv, one_step")
        for factor in factors:
            for alpha in alphas:
                params = table_params(J=2, alpha=alpha, lam_factor=factor)
                model = build_routing(params)
                v_star, _ = _cached_exact(model, out / "cache", f"t5-{alpha}-{factor}")
                for h in hs:
                    r_tapi = tapi_solve(model.problem, TapiOptions(h=h))
                    r_exact = tapi_exact_improvement_variant(model.problem, TapiOptions(h=h))
                    r_one = tapi_solve(model.problem, TapiOptions(h=h, one_step=True))
                    cells = [gap_report(r.fine_values, v_star).max_rel
                             for r in (r_tapi, r_exact, r_one)]
                    row = (factor, alpha, h, *[round(c, 4) for c in cells])
                    rows.append(row)
                    print(", ".join(map(str, row)))
    else:
        alphas = (0.99,) if args.tier == "fast" else (0.99, 0.999)
        factors = (0.7,) if args.tier == "fast" else (0.7, 0.8)
        hs = (4,) if args.tier == "fast" else (2, 4, 8)
        print("table 1: lam_factor, alpha, h, max_rel, mean_rel")
        for factor in factors:
            for alpha in alphas:
                params = table_params(J=3, alpha=alpha, lam_factor=factor)
                model = build_routing(params)
                v_star, _ = _cached_exact(model, out / "cache", f"t1-{alpha}-{factor}")
                for h in hs:
                    res = tapi_exact_improvement_variant(model.problem, TapiOptions(h=h))
                    rep = gap_report(res.fine_values, v_star)
                    row = (factor, alpha, h, round(rep.max_rel, 4), round(rep.mean_rel, 5))
                    rows.append(row)
                    print(", ".join(map(str, row)))
    out.mkdir(parents=True, exist_ok=True)
    with (out / f"table{args.table}_{args.tier}.csv").open("w") as fh:
        for row in rows:
            fh.write(",".join(map(str, row)) + "\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
