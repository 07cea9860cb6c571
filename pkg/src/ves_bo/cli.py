"""Command-line entry point ``ves-bo``.

Subcommands::

    ves-bo run --benchmark branin --acq ves_gamma --iters 100 --repeats 10 --seed 0 --out runs/
    ves-bo ks-compare --benchmark branin --iters 100 --seed 0 --out ks/
    ves-bo plot --in runs/ --out regret.svg
    ves-bo list-benchmarks

Every ``run``/``ks-compare`` flag may also come from a TOML file given with
``--config`` (keys use underscores, e.g. ``mc_samples = 64``); flags win.
Exit status is 0 on success, 2 for configuration errors and 3 for runtime failures.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

import tomli

from .acquisition import AcqKind, AcquisitionSpec
from .benchmarks import get_benchmark, list_benchmarks
from .errors import ConfigError, VesError
from .harness import ExperimentConfig, emit_plot, ks_equivalence_study, read_aggregate_csv, run_suite

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3

DEFAULTS = {
    "benchmark": None,
    "acq": "ves_gamma",
    "iters": 100,
    "repeats": 10,
    "seed": 0,
    "out": None,
    "n_init": 20,
    "mc_samples": 128,
    "inner_iters": 5,
    "lambda_reg": 1.0,
    "clamp": 1e-10,
    "workers": 1,
}


def _clamp(text: str):
    if str(text).lower() in ("none", "off", "0"):
        return None
    return float(text)


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--config", type=Path, help="TOML file with default values for these flags")
    p.add_argument("--benchmark", help="benchmark name (see list-benchmarks)")
    p.add_argument("--iters", type=int, help="BO iterations per run (default 100)")
    p.add_argument("--repeats", type=int, help="independent repeats (default 10)")
    p.add_argument("--seed", type=int, help="seed base (default 0)")
    p.add_argument("--out", type=Path, help="output directory")
    p.add_argument("--n-init", dest="n_init", type=int, help="initial uniform design size (default 20)")
    p.add_argument("--workers", type=int, help="parallel processes over repeats (default 1)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ves-bo", description="Variational entropy search BO experiments")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a BO suite and write per-run and aggregate CSVs")
    _add_common(run)
    run.add_argument("--acq", choices=[k.value for k in AcqKind], help="acquisition (default ves_gamma)")
    run.add_argument("--mc-samples", dest="mc_samples", type=int, help="posterior paths per iteration")
    run.add_argument("--inner-iters", dest="inner_iters", type=int, help="VES inner iterations N")
    run.add_argument("--lambda-reg", dest="lambda_reg", type=float, help="shape regularization weight")
    run.add_argument("--clamp", type=_clamp, help="floor for z, or 'none' to disable")

    ks = sub.add_parser("ks-compare", help="KS equivalence study of VES-Exp against LogEI")
    _add_common(ks)

    plot = sub.add_parser("plot", help="plot every aggregate.csv below a directory")
    plot.add_argument("--in", dest="inp", type=Path, required=True)
    plot.add_argument("--out", type=Path, required=True)

    sub.add_parser("list-benchmarks", help="print registry names")
    return parser


def resolve_options(args: argparse.Namespace) -> dict:
    """Merge built-in defaults, the optional TOML file and explicit flags (in that order)."""
    opts = dict(DEFAULTS)
    if getattr(args, "config", None) is not None:
        try:
            with open(args.config, "rb") as fh:
                data = tomli.load(fh)
        except (OSError, tomli.TOMLDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        data = {k.replace("-", "_"): v for k, v in data.items()}
        unknown = set(data) - set(DEFAULTS)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
        if "clamp" in data:
            data["clamp"] = _clamp(data["clamp"])
        opts.update(data)
    for key in DEFAULTS:
        val = getattr(args, key, None)
        if val is not None:
            opts[key] = val
    if opts["benchmark"] is None:
        raise ConfigError("--benchmark is required")
    return opts


def experiment_from_options(opts: dict) -> ExperimentConfig:
    try:
        spec = AcquisitionSpec(kind=AcqKind(opts["acq"]), mc_samples=int(opts["mc_samples"]),
                               inner_iters=int(opts["inner_iters"]),
                               regularization_lambda=float(opts["lambda_reg"]),
                               clamp_floor=opts["clamp"])
        cfg = ExperimentConfig(benchmark=opts["benchmark"], acquisition=spec, n_init=int(opts["n_init"]),
                               n_iters=int(opts["iters"]), n_repeats=int(opts["repeats"]),
                               seed_base=int(opts["seed"]), output_dir=opts["out"],
                               workers=int(opts["workers"]))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    cfg.resolve_benchmark()
    return cfg


def _cmd_run(args) -> int:
    cfg = experiment_from_options(resolve_options(args))
    if cfg.output_dir is None:
        raise ConfigError("--out is required")
    result = run_suite(cfg)
    for exc in result.failures:
        print(f"repeat {exc.trace.repeat} failed: {exc}", file=sys.stderr)
    print(f"{cfg.benchmark} {cfg.acquisition.kind.value}: {result.n_completed}/{cfg.n_repeats} runs completed")
    if result.traces and get_benchmark(cfg.benchmark).optimum_value is not None:
        final = sorted(result.final_regrets())
        print(f"median final simple regret {final[len(final) // 2]:.6g}")
    return EXIT_OK if not result.failures else EXIT_RUNTIME


def _cmd_ks(args) -> int:
    cfg = experiment_from_options(resolve_options(args))
    if cfg.output_dir is None:
        raise ConfigError("--out is required")
    report = ks_equivalence_study(cfg)
    print(f"KS passing rate {report.passing_rate:.4f} over {len(report.rows)} iterations "
          f"({report.methods[0]} vs {report.methods[1]}, alpha={report.alpha})")
    return EXIT_OK


def _cmd_plot(args) -> int:
    files = sorted(Path(args.inp).rglob("aggregate.csv"))
    if not files:
        raise ConfigError(f"no aggregate.csv below {args.inp}")
    rows = [r for f in files for r in read_aggregate_csv(f)]
    print(emit_plot(rows, args.out))
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "list-benchmarks":
            print("\n".join(list_benchmarks()))
            return EXIT_OK
        handler = {"run": _cmd_run, "ks-compare": _cmd_ks, "plot": _cmd_plot}[args.command]
        return handler(args)
    except ConfigError as exc:
        print(f"ves-bo: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (VesError, OSError) as exc:
        print(f"ves-bo: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
