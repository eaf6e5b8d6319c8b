"""Command-line driver: ``mixdual run ...`` and ``mixdual list``.

Exit codes of ``run``: 0 all checks passed, 1 some check failed, 2 bad
configuration, 3 solver failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import dataclass, fields, replace
from pathlib import Path

from . import experiments as ex
from .catalog import get_problem, listing
from .dual import Partition, parse_partition
from .errors import (InvalidPartition, MixDualError, NotEfficient, RecoveryFailed, SolverError,
                     SpecError)
from .report import Report
from .solver import SolverOptions

EXIT_OK, EXIT_CHECKS, EXIT_CONFIG, EXIT_SOLVER = 0, 1, 2, 3
MODES = ("weak", "strong", "converse", "invexity", "frontier", "static", "all")

class ConfigError(MixDualError):
    pass


@dataclass
class ExperimentConfig:
    problem: str = ""
    grid: int = 201
    partition: str = ""
    mode: str = "strong"
    tol: float = 1e-4
    weak_tol: float = 1e-6
    seed: int = 0
    out: str = "results"
    samples: int = 100
    pairs: int = 500
    weights: str = ""
    catalog: str = ""

    def validate(self) -> None:
        if not self.problem:
            raise ConfigError("no problem given (--problem NAME or path)")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {', '.join(MODES)}, got {self.mode!r}")
        if self.grid < 5:
            raise ConfigError(f"grid must have at least 5 nodes, got {self.grid}")
        if self.tol <= 0 or self.weak_tol <= 0:
            raise ConfigError("tolerances must be positive")
        if self.samples < 1 or self.pairs < 1:
            raise ConfigError("samples and pairs must be at least 1")


_SOLVER_KEYS = ("solver.tol", "solver.feas_tol", "solver.max_outer", "solver.max_inner",
                "solver.mu0", "solver.mu_min", "solver.rho0", "solver.rho_max",
                "solver.memory")


def read_config_file(path) -> dict:
    """``key = value`` lines; ``#`` starts a comment."""
    cfg = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        cfg[key] = value
    return cfg


def build_config(file_cfg: dict, flags: dict):
    """Merge file values with command-line flags (flags win)."""
    merged = dict(file_cfg)
    merged.update({k: v for k, v in flags.items() if v is not None})
    known = {f.name: f for f in fields(ExperimentConfig)}
    kw, solver_cfg = {}, {}
    for key, value in merged.items():
        if key in _SOLVER_KEYS:
            solver_cfg[key] = value
        elif key in known:
            typ = {"int": int, "float": float, "str": str}[known[key].type]
            try:
                kw[key] = typ(value)
            except ValueError:
                raise ConfigError(f"{key}: cannot read {value!r} as {known[key].type}") from None
        else:
            raise ConfigError(f"unknown configuration key {key!r}")
    cfg = ExperimentConfig(**kw)
    cfg.validate()
    try:
        opts = SolverOptions.from_config(solver_cfg)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad solver option: {exc}") from None
    return cfg, opts


def default_partition(m: int) -> Partition:
    """``J0 = {1}``, ``J1 = {2..m}`` (just ``J0 = {1}`` when ``m = 1``)."""
    if m == 1:
        return Partition(1, ((1,),))
    return Partition(m, ((1,), range(2, m + 1)))


def _parse_weights(text: str, p: int):
    if not text:
        return None
    try:
        w = [float(v) for v in text.replace(";", ",").split(",")]
    except ValueError:
        raise ConfigError(f"weights: cannot parse {text!r}") from None
    if len(w) != p or min(w) < 0 or abs(sum(w) - 1.0) > 1e-9:
        raise ConfigError(f"weights must be {p} non-negative numbers summing to 1")
    return w


def echo_config(cfg: ExperimentConfig, opts: SolverOptions, part: Partition) -> str:
    lines = [f"{f.name} = {getattr(cfg, f.name)}" for f in fields(cfg)]
    lines.append(f"partition.effective = {part}")
    lines += [f"solver.{f.name} = {getattr(opts, f.name)}" for f in fields(opts)
              if f.name not in ("N", "raise_on_failure")]
    return "\n".join(lines) + "\n"


def execute(cfg: ExperimentConfig, opts: SolverOptions, spec, part) -> ex.Outcome:
    weights = _parse_weights(cfg.weights, spec.p)
    runs = {
        "strong": lambda: ex.run_strong(spec, part, opts, cfg.tol, weights),
        "weak": lambda: ex.run_weak(spec, part, opts, cfg.weak_tol, cfg.samples, cfg.seed,
                                    weights, cfg.tol),
        "converse": lambda: ex.run_converse(spec, part, opts, cfg.tol, weights),
        "invexity": lambda: ex.run_invexity(spec, part, opts, cfg.pairs, cfg.seed, weights,
                                            cfg.tol),
        "frontier": lambda: ex.run_frontier(spec, opts, cfg.tol),
        "static": lambda: ex.run_static(spec, part, opts, cfg.weak_tol, cfg.samples, cfg.seed),
    }
    if cfg.mode == "static" and not spec.is_static:
        raise ConfigError(f"mode static needs a t-independent problem; {spec.name} is not")
    if cfg.mode == "all":
        order = ["strong", "weak", "converse", "invexity", "frontier"]
        if spec.is_static:
            order.append("static")
    else:
        order = [cfg.mode]
    outcome = ex.Outcome()
    for mode in order:
        try:
            outcome.merge(runs[mode]())
        except (RecoveryFailed, NotEfficient) as exc:
            rep = Report(f"{mode}[{spec.name}]")
            rep.add("pipeline", 1.0, False, note=f"{type(exc).__name__}: {exc}")
            outcome.reports.append(rep)
    return outcome


def write_outputs(out_dir: Path, cfg_text: str, outcome: ex.Outcome, header: str) -> str:
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "config.echo").write_text(cfg_text)
    for name, text in sorted(outcome.tables.items()):
        (out_dir / name).write_text(text)
    checks = "".join(r.to_csv(header=(k == 0)) for k, r in enumerate(outcome.reports))
    (out_dir / "checks.csv").write_text(checks or Report("none").to_csv())
    status = "PASS" if outcome.passed else "FAIL"
    parts = [header, f"overall: {status}", ""]
    parts += [r.summary() for r in outcome.reports]
    if outcome.messages:
        parts += ["", "messages:"] + [f"  {m}" for m in outcome.messages]
    summary = "\n".join(parts) + "\n"
    (out_dir / "summary.txt").write_text(summary)
    return summary


def cmd_run(args) -> int:
    flags = {k: getattr(args, k) for k in ("problem", "grid", "partition", "mode", "tol", "seed",
                                           "out", "samples", "pairs", "weights", "catalog")}
    try:
        file_cfg = read_config_file(args.config) if args.config else {}
        cfg, opts = build_config(file_cfg, flags)
        spec = get_problem(cfg.problem, cfg.catalog or None)
        part = parse_partition(cfg.partition, spec.m) if cfg.partition else default_partition(spec.m)
        if part.m != spec.m:
            raise InvalidPartition(f"partition covers {part.m} constraints, problem has {spec.m}")
    except (ConfigError, SpecError, InvalidPartition) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    opts = replace(opts, N=cfg.grid)
    cfg_text = echo_config(cfg, opts, part)
    out_dir = Path(cfg.out)
    header = f"problem {spec.name}, mode {cfg.mode}, N = {cfg.grid}, partition {part}"
    try:
        outcome = execute(cfg, opts, spec, part)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SolverError as exc:
        outcome = ex.Outcome(solver_failed=True, messages=[f"solver failure: {exc}"])
        print(write_outputs(out_dir, cfg_text, outcome, header), end="")
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    print(write_outputs(out_dir, cfg_text, outcome, header), end="")
    if outcome.solver_failed:
        return EXIT_SOLVER
    return EXIT_OK if outcome.passed else EXIT_CHECKS


def cmd_list(args) -> int:
    if args.catalog and not Path(args.catalog).is_dir():
        print(f"configuration error: {args.catalog} is not a directory", file=sys.stderr)
        return EXIT_CONFIG
    try:
        sys.stdout.write(listing(args.catalog, as_csv=args.csv))
    except SpecError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mixdual",
                                     description="Duality experiments for multiobjective "
                                                 "variational problems.")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment")
    run.add_argument("--problem", help="catalog name or path to a problem file")
    run.add_argument("--grid", type=int, help="number of grid nodes N (default 201)")
    run.add_argument("--partition", help='e.g. "J0={1};J1={2}" (default J0={1}, J1=rest)')
    run.add_argument("--mode", choices=MODES, help="experiment (default strong)")
    run.add_argument("--tol", type=float, help="check tolerance (default 1e-4)")
    run.add_argument("--seed", type=int, help="random seed (default 0)")
    run.add_argument("--out", help="output directory (default ./results)")
    run.add_argument("--samples", type=int, help="weak/static duality samples (default 100)")
    run.add_argument("--pairs", type=int, help="invexity sample pairs (default 500)")
    run.add_argument("--weights", help="scalarization weights, e.g. 0.5,0.5")
    run.add_argument("--catalog", help="directory of problem files to use as the catalog")
    run.add_argument("--config", help="key = value file; flags override it")
    run.set_defaults(func=cmd_run)

    lst = sub.add_parser("list", help="list catalog problems")
    lst.add_argument("--csv", action="store_true", help="machine-readable CSV listing")
    lst.add_argument("--catalog", help="directory of problem files")
    lst.set_defaults(func=cmd_list)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
