"""Command-line front end.

Subcommands compute allocations (solve), Monte Carlo rate statistics
(evaluate), threshold sweeps (sweep), and RSS triangulation statistics
(positioning).  All outputs are CSV plus a run-manifest JSON; stdout stays
machine-clean and diagnostics go to stderr.  Re-running with identical
inputs reproduces outputs byte for byte.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import re
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .allocator import (
    InfeasibleError,
    RobustConfig,
    solve_bernstein,
    solve_cvar_sca,
    solve_perfect,
)
from .channel import DiffuseParams, los_gain
from .montecarlo import ErrorModel, allocation_error_model, rate_cdf, sweep
from .positioning import estimate_position, rse, simulate_rss
from .scenario import ScenarioError, default_scenario, load_scenario, scenario_to_dict
from . import fisher

SCHEMES = ("perfect", "nonrobust", "bernstein", "cvar")

_RATE_RE = re.compile(r"^\s*([0-9.eE+-]+)\s*(Mbps|mbps)?\s*$")


def parse_rate(text: str) -> float:
    """Rate in bit/s; a Mbps suffix is accepted."""
    mobj = _RATE_RE.match(text)
    if not mobj:
        raise argparse.ArgumentTypeError(f"cannot parse rate {text!r}")
    value = float(mobj.group(1))
    if mobj.group(2):
        value *= 1e6
    return value


def _apply_thread_env() -> None:
    threads = os.environ.get("VLPC_THREADS")
    if threads:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ.setdefault(var, threads)


def _load(args):
    if args.scenario:
        return load_scenario(args.scenario)
    return default_scenario()


def _solve(scenario, scheme, rate_threshold, p_out):
    cfg = RobustConfig(rate_threshold=rate_threshold, outage_probability=p_out)
    if scheme in ("perfect", "nonrobust"):
        alloc = solve_perfect(scenario, rate_threshold)
    elif scheme == "bernstein":
        alloc = solve_bernstein(scenario, cfg)
    elif scheme == "cvar":
        alloc = solve_cvar_sca(scenario, cfg)
    else:
        raise ValueError(f"unknown scheme {scheme!r}")
    return alloc


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(float(v)) if isinstance(v, float) else v for v in row])


def _write_manifest(out_dir: Path, command: str, config: dict, scenario, extra=None) -> None:
    manifest = {
        "library_version": __version__,
        "command": command,
        "config": config,
        "scenario": scenario_to_dict(scenario),
    }
    if extra:
        manifest["results"] = extra
    with open(out_dir / "run_manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _diffuse(scenario, args):
    serving_gain = max(
        float(los_gain(led, scenario.ue_position, scenario.pd)) for led in scenario.leds
    )
    return DiffuseParams.from_ratio(
        serving_gain, args.diffuse_ratio_db, args.decay_ns * 1e-9, args.delay_ns * 1e-9
    )


def cmd_solve(args) -> int:
    scenario = _load(args)
    alloc = _solve(scenario, args.scheme, args.rate, args.pout)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = [
        [i, float(p), float(alloc.p_c) if i == alloc.serving_index else 0.0]
        for i, p in enumerate(alloc.p_p)
    ]
    _write_csv(out / "allocation.csv", ["led_index", "p_p_w", "p_c_w"], rows)
    _write_manifest(
        out,
        "solve",
        {"scheme": args.scheme, "rate_bps": args.rate, "pout": args.pout},
        scenario,
        extra={
            "serving_index": alloc.serving_index,
            "sqrt_crlb_m": float(np.sqrt(alloc.crlb_value)),
            "p_c_w": alloc.p_c,
            "sum_p_p_w": alloc.sum_p_p,
            "status": alloc.status,
        },
    )
    return 0


def cmd_evaluate(args) -> int:
    scenario = _load(args)
    alloc = _solve(scenario, args.scheme, args.rate, args.pout)
    model = allocation_error_model(scenario, alloc, args.error_model)
    diffuse = _diffuse(scenario, args) if args.channel == "los_diffuse" else None
    result = rate_cdf(
        scenario,
        alloc,
        model,
        threshold=args.rate,
        num_samples=args.samples,
        channel_kind=args.channel,
        diffuse=diffuse,
        seed=args.seed,
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_csv(
        out / "rate_cdf.csv",
        ["rate_mbps", "cdf"],
        [[float(g / 1e6), float(c)] for g, c in zip(result.grid, result.cdf)],
    )
    _write_manifest(
        out,
        "evaluate",
        {
            "scheme": args.scheme,
            "rate_bps": args.rate,
            "pout": args.pout,
            "samples": args.samples,
            "channel": args.channel,
            "error_model": args.error_model,
            "seed": args.seed,
        },
        scenario,
        extra={"outage": result.outage, "p_c_w": alloc.p_c, "sum_p_p_w": alloc.sum_p_p},
    )
    return 0


def cmd_sweep(args) -> int:
    scenario = _load(args)
    grid = np.linspace(args.rate_min, args.rate_max, args.steps)
    schemes = (args.scheme,) if args.scheme else ("perfect", "bernstein", "cvar")
    rows = sweep(scenario, grid, args.pout, schemes=schemes)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    header = ["rate_mbps", "scheme", "sqrt_crlb_m", "p_c_w", "sum_p_p_w", "status"]
    _write_csv(out / "sweep.csv", header, [[row[k] for k in header] for row in rows])
    _write_manifest(
        out,
        "sweep",
        {
            "scheme": args.scheme or "all",
            "rate_min_bps": args.rate_min,
            "rate_max_bps": args.rate_max,
            "steps": args.steps,
            "pout": args.pout,
        },
        scenario,
    )
    return 0


def cmd_positioning(args) -> int:
    scenario = _load(args)
    alloc = _solve(scenario, args.scheme, args.rate, args.pout)
    rng_seeds = np.random.SeedSequence(args.seed).spawn(args.samples)
    errors = np.empty(args.samples)
    for i, ss in enumerate(rng_seeds):
        meas = simulate_rss(scenario, alloc.p_p, np.random.default_rng(ss))
        est = estimate_position(scenario, meas)
        errors[i] = rse(est.position, scenario.ue_position)
    errors.sort()
    cdf = np.arange(1, args.samples + 1) / args.samples
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_csv(
        out / "positioning.csv",
        ["rse_m", "cdf"],
        [[float(e), float(c)] for e, c in zip(errors, cdf)],
    )
    _write_manifest(
        out,
        "positioning",
        {
            "scheme": args.scheme,
            "rate_bps": args.rate,
            "pout": args.pout,
            "samples": args.samples,
            "seed": args.seed,
        },
        scenario,
        extra={
            "median_rse_m": float(np.median(errors)),
            "sqrt_crlb_m": float(np.sqrt(alloc.crlb_value)),
        },
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vlpc", description="robust positioning/communication power allocation"
    )
    parser.add_argument("--scenario", help="scenario JSON path (default: reference room)")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, samples=False):
        p.add_argument("--scheme", choices=SCHEMES, default="bernstein")
        p.add_argument("--rate", type=parse_rate, default=2e8, help="threshold, e.g. 200Mbps")
        p.add_argument("--pout", type=float, default=0.01)
        p.add_argument("--out", required=True, help="output directory")
        if samples:
            p.add_argument("--samples", type=int, default=10000)
            p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("solve", help="compute one allocation")
    common(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("evaluate", help="Monte Carlo rate CDF and outage")
    common(p, samples=True)
    p.add_argument("--channel", choices=("los", "los_diffuse"), default="los")
    p.add_argument(
        "--error-model",
        choices=("gaussian", "uniform_ellipse", "two_point_mixture"),
        default="gaussian",
    )
    p.add_argument("--diffuse-ratio-db", type=float, default=12.0)
    p.add_argument("--decay-ns", type=float, default=15.0)
    p.add_argument("--delay-ns", type=float, default=10.0)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("sweep", help="solve all schemes over a rate grid")
    p.add_argument("--scheme", choices=("perfect", "bernstein", "cvar"))
    p.add_argument("--rate-min", type=parse_rate, required=True)
    p.add_argument("--rate-max", type=parse_rate, required=True)
    p.add_argument("--steps", type=int, default=10)
    p.add_argument("--pout", type=float, default=0.01)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("positioning", help="RSS triangulation error CDF")
    common(p, samples=True)
    p.set_defaults(func=cmd_positioning)
    return parser


def run(argv=None) -> int:
    _apply_thread_env()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    try:
        return args.func(args)
    except InfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return 1
    except (ScenarioError, FileNotFoundError, ValueError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
