"""Command line entry point: ``exflow run | validate-map | fit``."""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .geometry import validate_map
from .harness import (
    FIT_COLUMNS,
    SCENARIOS,
    Scenario,
    cli_overrides,
    fit_column,
    format_fit,
    parse_config,
    parse_pairs,
    read_csv,
)


def _window(text: str) -> tuple[float, float]:
    try:
        lo, hi = (float(s) for s in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected <t_lo>:<t_hi>, got {text!r}") from None
    if not lo < hi:
        raise argparse.ArgumentTypeError("window needs t_lo < t_hi")
    return lo, hi


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="exflow", description="Vortex blobs outside an obstacle.")
    sub = ap.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a scenario and write diagnostics")
    r.add_argument("--scenario", required=True, choices=sorted(SCENARIOS))
    r.add_argument("--config", type=Path, help="config file whose keys override the preset")
    r.add_argument("--out", type=Path, default=Path("."))
    r.add_argument("--dt", type=float)
    r.add_argument("--t-end", type=float)
    r.add_argument("--n", type=int, dest="grid_n", help="grid_n for every patch")
    r.add_argument("--seed", type=int)

    v = sub.add_parser("validate-map", help="grid check of the conformal map")
    v.add_argument("--config", type=Path, required=True)
    v.add_argument("--r-max", type=float, default=10.0)
    v.add_argument("--samples", type=int, default=4096)

    f = sub.add_parser("fit", help="fit a growth exponent to a diagnostics CSV")
    f.add_argument("--csv", type=Path, required=True)
    f.add_argument("--col", choices=sorted(FIT_COLUMNS), required=True)
    f.add_argument("--window", type=_window, required=True)
    return ap


def _cmd_run(args) -> int:
    from .harness import run_scenario

    base = dict(SCENARIOS[args.scenario])
    over = parse_pairs(args.config.read_text()) if args.config else {}
    n_patches = len({k.split(".")[0] for k in {**base, **over} if k.startswith("patch[")})
    over.update(cli_overrides(args.dt, args.t_end, args.grid_n, args.seed, n_patches))
    scenario = Scenario(args.scenario, over)
    result = run_scenario(scenario, args.out, config=scenario.config())
    sys.stdout.write((args.out / "fit.txt").read_text())
    if result.status:
        print(f"error: {result.error}", file=sys.stderr)
    return result.status


def _cmd_validate(args) -> int:
    cfg = parse_config(args.config)
    report = validate_map(cfg.map, args.r_max, args.samples)
    print("\n".join(report.lines()))
    return 0 if report.injectivity_ok else 1


def _cmd_fit(args) -> int:
    fit = fit_column(read_csv(args.csv), args.col, *args.window)
    print(format_fit(FIT_COLUMNS[args.col], fit))
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return {"run": _cmd_run, "validate-map": _cmd_validate, "fit": _cmd_fit}[args.command](args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
