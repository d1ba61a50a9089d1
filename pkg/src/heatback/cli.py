"""Command-line entry point: ``heatback {forward,invert,bound,sweep,dump-operator}``.

Settings come from an optional config file (``key = value`` lines or a JSON
object) and are overridden by flags. Exit codes: 0 success, 1 usage or parse
error, 2 numerical or solvability failure, 3 I/O failure.
"""
from __future__ import annotations

import argparse
import contextlib
import csv
import json
import logging
import os
import statistics
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .bounds import BoundDomainError, error_bound
from .core import HeatbackError, ProblemConfig, SampledFunction, l2_norm
from .experiment import Instance, ProfileKind, TruthProfile, generate_truth, records_to_csv, sweep
from .forward import solve_forward
from .operator import OperatorMatrix, assemble_operator, dump_operator, load_operator
from .tikhonov import NoiseDominatesError, TikhonovSystem, select_alpha_discrepancy

log = logging.getLogger("heatback")

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC, EXIT_IO = 0, 1, 2, 3


class UsageError(Exception):
    pass


@dataclass
class CliConfig:
    """Everything a command can be told, from file and flags."""

    x0: float = 0.5
    t0: float = 1.0
    m: int = 800
    n_modes: int | None = None
    r1: float = 1.0
    profile: str = "poly_bump"
    fraction: float = 1.0
    x: float | None = None
    delta: float | None = None
    seed: int = 0
    deltas: list = field(default_factory=lambda: [1e-1, 1e-2, 1e-3, 1e-4])
    seeds: list = field(default_factory=lambda: [0, 1, 2, 3, 4])
    h_input: str | None = None
    f_input: str | None = None
    out: str | None = None
    summary: str | None = None
    operator_cache: str | None = None
    oracle_forward: bool = False

    def problem(self) -> ProblemConfig:
        return ProblemConfig(x0=self.x0, t0=self.t0, m=self.m, n_modes=self.n_modes, r1=self.r1)

    def truth_profile(self) -> TruthProfile:
        return TruthProfile(ProfileKind(self.profile), self.fraction)

    # -- serialization ---------------------------------------------------

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            value = getattr(self, f.name)
            if value is None:
                continue
            if isinstance(value, list):
                value = ",".join(_fmt_scalar(v) for v in value)
            else:
                value = _fmt_scalar(value)
            lines.append(f"{f.name} = {value}")
        return "\n".join(lines) + "\n"

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_mapping(cls, data: dict, base: "CliConfig | None" = None) -> "CliConfig":
        cfg = base if base is not None else cls()
        known = {f.name: f for f in fields(cls)}
        for key, raw in data.items():
            name = key.strip().replace("-", "_")
            if name not in known:
                raise UsageError(f"unknown config key {key!r}")
            setattr(cfg, name, _coerce(name, raw))
        return cfg

    @classmethod
    def parse(cls, text: str) -> "CliConfig":
        stripped = text.lstrip()
        if stripped.startswith("{"):
            try:
                data = json.loads(text)
            except json.JSONDecodeError as exc:
                raise UsageError(f"bad JSON config: {exc}") from exc
            if not isinstance(data, dict):
                raise UsageError("JSON config must be an object")
            return cls.from_mapping(data)
        data = {}
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"config line {lineno}: expected key = value")
            key, value = line.split("=", 1)
            data[key.strip()] = value.strip()
        return cls.from_mapping(data)


_INT_KEYS = {"m", "n_modes", "seed"}
_FLOAT_KEYS = {"x0", "t0", "r1", "fraction", "x", "delta"}


def _fmt_scalar(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _parse_bool(raw) -> bool:
    if isinstance(raw, bool):
        return raw
    s = str(raw).strip().lower()
    if s in {"1", "true", "yes", "on"}:
        return True
    if s in {"0", "false", "no", "off"}:
        return False
    raise UsageError(f"not a boolean: {raw!r}")


def _coerce(name: str, raw):
    try:
        if raw is None:
            return None
        if name in _INT_KEYS:
            if isinstance(raw, float) and not raw.is_integer():
                raise ValueError(raw)
            return int(raw)
        if name in _FLOAT_KEYS:
            return float(raw)
        if name == "deltas":
            items = raw if isinstance(raw, list) else str(raw).split(",")
            return [float(v) for v in items if str(v).strip()]
        if name == "seeds":
            items = raw if isinstance(raw, list) else str(raw).split(",")
            return [int(v) for v in items if str(v).strip()]
        if name == "oracle_forward":
            return _parse_bool(raw)
        return str(raw)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"bad value for {name}: {raw!r}") from exc


# -- CSV helpers -------------------------------------------------------------

def read_series(path: str, cfg: ProblemConfig) -> SampledFunction:
    """Read ``t,value`` (or bare ``value``) rows; a non-numeric first row is a header."""
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    values, times = [], []
    for k, row in enumerate(rows):
        try:
            nums = [float(c) for c in row]
        except ValueError:
            if k == 0:
                continue
            raise UsageError(f"{path}: row {k + 1} is not numeric: {row}")
        if len(nums) == 1:
            values.append(nums[0])
        elif len(nums) == 2:
            times.append(nums[0])
            values.append(nums[1])
        else:
            raise UsageError(f"{path}: row {k + 1} has {len(nums)} columns")
    if len(values) != cfg.m + 1:
        raise UsageError(f"{path}: expected {cfg.m + 1} samples for m={cfg.m}, got {len(values)}")
    if times and (len(times) != len(values)
                  or not np.allclose(times, cfg.grid.points, rtol=0, atol=1e-9 * cfg.t0)):
        raise UsageError(f"{path}: time column does not match the configured grid")
    try:
        return SampledFunction(cfg.grid, values)
    except ValueError as exc:
        raise UsageError(f"{path}: {exc}") from exc


def format_series(f: SampledFunction, header: str = "value") -> str:
    lines = [f"t,{header}"]
    lines += [f"{t:.17g},{v:.17g}" for t, v in zip(f.grid.points, f.values)]
    return "\n".join(lines) + "\n"


def _emit(text: str, path: str | None):
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


# -- commands ----------------------------------------------------------------

def _operator(cc: CliConfig, cfg: ProblemConfig) -> OperatorMatrix:
    if cc.operator_cache and os.path.exists(cc.operator_cache):
        op = load_operator(cc.operator_cache, cfg)
        log.info("loaded operator from %s", cc.operator_cache)
        return op
    op = assemble_operator(cfg)
    if cc.operator_cache:
        dump_operator(op, cc.operator_cache)
    return op


def cmd_forward(cc: CliConfig) -> int:
    cfg = cc.problem()
    x = cfg.x0 if cc.x is None else cc.x
    if not 0.0 <= x <= 1.0:
        raise UsageError(f"x must lie in [0, 1], got {x}")
    if cc.h_input:
        h = read_series(cc.h_input, cfg)
    else:
        h = generate_truth(cc.truth_profile(), cfg)
    _emit(format_series(solve_forward(h, x, cfg), "u"), cc.out)
    return EXIT_OK


def cmd_invert(cc: CliConfig) -> int:
    cfg = cc.problem()
    if not cc.f_input:
        raise UsageError("invert needs --f-input")
    if cc.delta is None or not cc.delta > 0:
        raise UsageError("invert needs a positive --delta")
    f = read_series(cc.f_input, cfg)
    op = _operator(cc, cfg)
    report = error_bound(cc.delta, cfg.r1, cfg.x0)
    summary = {"alpha": None, "residual": None, "bound": report.bound,
               "reconstruction_bound": report.reconstruction_bound,
               "asymptotic_valid": report.asymptotic_valid}
    code = EXIT_OK
    try:
        sol = select_alpha_discrepancy(op, f, cc.delta, system=TikhonovSystem(op))
        h = sol.h
        summary.update(alpha=sol.alpha, residual=sol.residual, converged=sol.converged,
                       bisection_steps=sol.bisection_steps)
    except NoiseDominatesError as exc:
        print(f"warning: {exc}; writing the zero reconstruction", file=sys.stderr)
        h = SampledFunction.zeros(cfg.grid)
        summary.update(residual=l2_norm(f), warning="noise dominates: ||f|| <= delta")
        code = EXIT_NUMERIC
    _emit(format_series(h, "h"), cc.out)
    text = json.dumps(summary, indent=2, sort_keys=True) + "\n"
    if cc.summary:
        _emit(text, cc.summary)
    elif cc.out and cc.out != "-":
        _emit(text, str(Path(cc.out).with_suffix(".json")))
    else:
        sys.stderr.write(text)
    return code


def cmd_bound(cc: CliConfig) -> int:
    if cc.delta is None:
        raise UsageError("bound needs --delta")
    try:
        report = error_bound(cc.delta, cc.r1, cc.x0)
    except BoundDomainError as exc:
        raise UsageError(str(exc)) from exc
    _emit(json.dumps(report.as_dict(), indent=2, sort_keys=True) + "\n", cc.out)
    return EXIT_OK


def sweep_summary(records) -> dict:
    by_delta: dict[float, list] = {}
    for r in records:
        by_delta.setdefault(r.delta, []).append(r)
    per_delta = [{
        "delta": d,
        "median_measured_error": statistics.median(r.measured_error for r in rs),
        "median_relative_error": statistics.median(r.relative_error for r in rs),
        "bound2omega": rs[0].bound2omega,
        "asymptotic_valid": rs[0].asymptotic_valid,
    } for d, rs in by_delta.items()]
    valid = [r for r in records if r.asymptotic_valid]
    return {
        "records": len(records),
        "per_delta": per_delta,
        "asymptotically_valid_records": len(valid),
        "bound_violations": sum(not r.bound_respected for r in valid),
        "bound_exceedances_all_records": sum(not r.bound_respected for r in records),
    }


def cmd_sweep(cc: CliConfig) -> int:
    cfg = cc.problem()
    inst = Instance(cfg, cc.truth_profile(), cc.oracle_forward, op=_operator(cc, cfg))
    records = sweep(cfg, inst.profile, cc.deltas, cc.seeds, relative=True, instance=inst)
    out = cc.out or "sweep.csv"
    _emit(records_to_csv(records), out)
    summary_path = cc.summary or (str(Path(out).with_suffix(".json")) if out != "-" else None)
    text = json.dumps(sweep_summary(records), indent=2, sort_keys=True) + "\n"
    if summary_path:
        _emit(text, summary_path)
    else:
        sys.stderr.write(text)
    return EXIT_OK


def cmd_dump_operator(cc: CliConfig) -> int:
    if not cc.out or cc.out == "-":
        raise UsageError("dump-operator needs --out PATH")
    dump_operator(assemble_operator(cc.problem()), cc.out)
    return EXIT_OK


COMMANDS = {
    "forward": cmd_forward,
    "invert": cmd_invert,
    "bound": cmd_bound,
    "sweep": cmd_sweep,
    "dump-operator": cmd_dump_operator,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key=value or JSON config file")
    common.add_argument("--x0", type=float)
    common.add_argument("--t0", type=float)
    common.add_argument("--m", type=int)
    common.add_argument("--n-modes", type=int)
    common.add_argument("--r1", type=float)
    common.add_argument("--delta", type=float)
    common.add_argument("--seed", type=int)
    common.add_argument("--profile", choices=[k.value for k in ProfileKind])
    common.add_argument("--fraction", type=float, help="truth class norm as a fraction of r1")
    common.add_argument("--out", help="output path ('-' for stdout)")
    common.add_argument("--summary", help="JSON summary path")
    common.add_argument("--oracle-forward", action="store_const", const=True, default=None,
                        help="make sweep data with the finite-difference solver")
    common.add_argument("--operator-cache", help="HBA1 matrix file to reuse or create")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = _Parser(prog="heatback", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    p = sub.add_parser("forward", parents=[common], help="sensor trace for a boundary history")
    p.add_argument("--x", type=float, help="observation point (default x0)")
    p.add_argument("--h-input", help="CSV of boundary samples (default: --profile truth)")
    p = sub.add_parser("invert", parents=[common], help="reconstruct h from sensor data")
    p.add_argument("--f-input", help="CSV of sensor samples")
    sub.add_parser("bound", parents=[common], help="a-priori error bound as JSON")
    p = sub.add_parser("sweep", parents=[common], help="synthetic noise-level sweep")
    p.add_argument("--deltas", help="comma-separated noise levels relative to ||f0||")
    p.add_argument("--seeds", help="comma-separated seeds")
    sub.add_parser("dump-operator", parents=[common], help="write the HBA1 operator matrix")
    return parser


def resolve_config(args: argparse.Namespace) -> CliConfig:
    if args.config:
        try:
            text = Path(args.config).read_text()
        except OSError as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from exc
        cc = CliConfig.parse(text)
    else:
        cc = CliConfig()
    overrides = {k: v for k, v in vars(args).items()
                 if k not in {"command", "config", "verbose"} and v is not None}
    return CliConfig.from_mapping(overrides, base=cc)


def _thread_limit():
    raw = os.environ.get("HEATBACK_THREADS")
    if not raw:
        return contextlib.nullcontext()
    from threadpoolctl import threadpool_limits
    return threadpool_limits(limits=max(1, int(raw)))


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cc = resolve_config(args)
        with _thread_limit():
            return COMMANDS[args.command](cc)
    except UsageError as exc:
        print(f"heatback {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"heatback {args.command}: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except HeatbackError as exc:
        print(f"heatback {args.command}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        # invalid ProblemConfig / TruthProfile values
        print(f"heatback {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
