"""Command-line entry point: ``clebsch-mhd simulate | verify | flow | print-schema``.

Exit codes: 0 success, 1 a check failed, 2 bad input, 3 the run aborted.
"""

from __future__ import annotations

import argparse
import json
import math
import platform
import sys
import time
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from . import gauge as gg
from . import snapshot
from . import spectral as sp
from .dynamics import CFLWarning, ConfigError, SimulationAborted, SimulationConfig, config_schema, simulate
from .verification import SUITE_NAMES, TOL, Check, Context, run_suites

EXIT_OK, EXIT_CHECK_FAILED, EXIT_BAD_INPUT, EXIT_ABORTED = 0, 1, 2, 3
RUNTIME_ERRORS = (sp.DensityFloorError, sp.NonFiniteFieldError, FloatingPointError)


class InputError(Exception):
    pass


def load_config(path: str | None, dt: float | None = None, seed: int | None = None) -> SimulationConfig:
    data = {}
    if path is not None:
        p = Path(path)
        if not p.is_file():
            raise InputError(f"config file not found: {p}")
        try:
            data = json.loads(p.read_text())
        except json.JSONDecodeError as exc:
            raise InputError(f"config file {p} is not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise InputError(f"config file {p} must hold a JSON object")
    if dt is not None:
        data["dt"] = dt
    if seed is not None:
        data["seed"] = seed
    try:
        return SimulationConfig.from_dict(data)
    except ConfigError as exc:
        raise InputError(f"invalid config: {exc}") from exc


def _out_dir(path: str) -> Path:
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise InputError(f"cannot create output directory {out}: {exc}") from exc
    return out


def _manifest(command: str, config: SimulationConfig, started: float, **extra) -> dict:
    return {
        "command": command,
        "version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "config": config.to_dict(),
        "seed": config.seed,
        "wall_time_s": time.perf_counter() - started,
        **extra,
    }


def _write_json(path: Path, data: dict) -> None:
    path.write_text(json.dumps(data, indent=2, sort_keys=True, default=_json_default) + "\n")


def _json_default(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    raise TypeError(f"not serializable: {type(x).__name__}")


def _finite_or_none(x):
    return x if x is None or math.isfinite(x) else None


# -- subcommands --------------------------------------------------------------------


def cmd_simulate(args) -> int:
    started = time.perf_counter()
    config = load_config(args.config, args.dt, args.seed)
    out = _out_dir(args.out)
    status, code, error = "completed", EXIT_OK, None
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", CFLWarning)
        try:
            record = simulate(config, keep_states=args.snapshots)
        except SimulationAborted as exc:
            record, status, code, error = exc.record, "aborted", EXIT_ABORTED, str(exc)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    primary = "clebsch" if "clebsch" in record.series else "eulerian"
    record.series[primary].to_csv(out / "invariants.csv")
    record.series[primary].write_drift_report(out / "drift.json")
    if "clebsch" in record.series and "eulerian" in record.series:
        record.series["eulerian"].to_csv(out / "invariants_eulerian.csv")
    if args.snapshots:
        eos = config.eos()
        for kind, states in record.states.items():
            for st in states:
                step = int(round(st.time / config.dt))
                snapshot.save(out / "snapshots" / f"{kind}_{step:06d}", st, eos)
    manifest = _manifest("simulate", config, started, status=status, error=error, cfl=record.cfl,
                         max_drift={k: v.max_drift() for k, v in record.series.items() if len(v)},
                         cross_distance=record.max_distance if record.distances else None,
                         warnings=[str(w.message) for w in caught])
    _write_json(out / "manifest.json", manifest)
    print(f"{status}: {len(record.series[primary])} samples written to {out / 'invariants.csv'}")
    if error:
        print(f"error: {error}", file=sys.stderr)
    return code


def cmd_verify(args) -> int:
    started = time.perf_counter()
    if args.suite not in SUITE_NAMES:
        raise InputError(f"unknown suite {args.suite!r}; choose from {', '.join(SUITE_NAMES)}")
    config = load_config(args.config, args.dt, args.seed)
    out = _out_dir(args.out)
    ctx = Context.from_config(config, epsilon=_epsilon(args.epsilon), substeps=_substeps(args.substeps))
    checks = run_suites(ctx, args.suite)
    for c in checks:
        print(c.line())
    failed = [c for c in checks if not c.passed]
    manifest = _manifest("verify", config, started, suite=args.suite,
                         checks=[{**c.to_dict(), "value": _finite_or_none(c.value)} for c in checks],
                         passed=not failed)
    _write_json(out / "manifest.json", manifest)
    print(f"{len(checks) - len(failed)}/{len(checks)} checks passed")
    return EXIT_CHECK_FAILED if failed else EXIT_OK


def _epsilon(x: float) -> float:
    if not math.isfinite(x):
        raise InputError("epsilon must be finite")
    return x


def _substeps(n: int) -> int:
    if n < 1:
        raise InputError("substeps must be positive")
    return n


def cmd_flow(args) -> int:
    started = time.perf_counter()
    config = load_config(args.config, args.dt, args.seed)
    try:
        gen = gg.GaugeGenerator.parse(args.generator)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    epsilon, substeps = _epsilon(args.epsilon), _substeps(args.substeps)
    out = _out_dir(args.out)
    eos = config.eos()
    s = config.initial_state()
    report = gg.gauge_report(s, gen, epsilon, substeps, eos)
    snapshot.save(out / "before", s, eos)
    snapshot.save(out / "after", report.final, eos)
    (out / "gauge_report.txt").write_text(report.to_text())
    report.write_csv(out / "gauge_report.csv")
    checks = [
        Check("flow", f"flow/{gen.name}/finite_flow_change", report.change.max(), TOL["flow_change"]),
        Check("flow", f"flow/{gen.name}/infinitesimal", report.infinitesimal.max(), TOL["infinitesimal"]),
    ]
    if gen.conserving:
        checks.append(Check("flow", f"flow/{gen.name}/action_gap", report.action.relative_gap, TOL["action"]))
    elif report.action.scale > 0:
        checks.append(Check("flow", f"flow/{gen.name}/action_gap", report.action.relative_gap,
                            TOL["expected_gap"], ">=", expected_gap=True))
    print(report.to_text(), end="")
    for c in checks:
        print(c.line())
    failed = [c for c in checks if not c.passed]
    _write_json(out / "manifest.json", _manifest("flow", config, started, generator=gen.name, epsilon=epsilon,
                                                 substeps=substeps, checks=[c.to_dict() for c in checks],
                                                 passed=not failed))
    return EXIT_CHECK_FAILED if failed else EXIT_OK


def cmd_print_schema(args) -> int:
    print(json.dumps(config_schema(), indent=2))
    return EXIT_OK


# -- parser -------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="clebsch-mhd", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out_default):
        p.add_argument("--config", metavar="PATH", help="JSON config (see print-schema); defaults apply if omitted")
        p.add_argument("--out", metavar="DIR", default=out_default, help="output directory")
        p.add_argument("--dt", type=float, help="override the config time step")
        p.add_argument("--seed", type=int, help="override the config seed")

    p = sub.add_parser("simulate", help="run a trajectory and write invariants.csv")
    common(p, "run")
    p.add_argument("--snapshots", action="store_true", help="write state snapshots at sampled steps")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("verify", help="run verification suites")
    common(p, "verify")
    p.add_argument("--suite", default="all", metavar="NAME", help=f"one of {', '.join(SUITE_NAMES)}")
    p.add_argument("--epsilon", type=float, default=0.1, help="gauge flow parameter distance")
    p.add_argument("--substeps", type=int, default=20, help="RK4 substeps of the gauge flow")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("flow", help="apply a finite gauge flow and write a gauge report")
    common(p, "flow")
    p.add_argument("--generator", required=True, metavar="NAME",
                   help="C1, C2, C3, GM:<weight>, GH:<weight> or remark")
    p.add_argument("--epsilon", type=float, default=0.1)
    p.add_argument("--substeps", type=int, default=20)
    p.set_defaults(func=cmd_flow)

    p = sub.add_parser("print-schema", help="print the JSON schema of the config file")
    p.set_defaults(func=cmd_print_schema)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_BAD_INPUT if exc.code else EXIT_OK
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT
    except RUNTIME_ERRORS as exc:
        print(f"error: run aborted: {exc}", file=sys.stderr)
        return EXIT_ABORTED


if __name__ == "__main__":
    sys.exit(main())
