"""Command line front end.

Every subcommand is deterministic in its flags, input files and ``--seed``.
Errors are reported as one line on stderr, ``error[<name>]: <message>``,
with a distinct exit code per error class.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import random
import sys
from typing import Sequence

from . import __version__, approx
from .agreement import AgreementInstance, check_instance, compliance_report
from .checks import check_normality, verify_lattice, verify_quasi_metric
from .documents import (
    DocumentError,
    dumps,
    instance_to_doc,
    load_instance,
    loads,
    space_from_doc,
)
from .lattice import IncomparableError, LatticeError, QuasiMetric, build_space
from .netsim import (
    BudgetError,
    CrashSchedule,
    Mode,
    NetworkConfig,
    SchedulerDeadlock,
    SchedulerPolicy,
    Scheduling,
    TraceError,
    replay,
    run_async_dr,
    run_sync,
)
from .protocols import generate_valid_instance

EXIT_OK = 0
EXIT_VIOLATIONS = 1
EXIT_USAGE = 2
EXIT_INPUT = 3
EXIT_BUDGET = 4
EXIT_PROTOCOL = 5
EXIT_TRACE = 6


class CliError(Exception):
    def __init__(self, code: int, name: str, message: str):
        super().__init__(message)
        self.code = code
        self.name = name


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError(EXIT_USAGE, "usage", message)


def _int_list(text: str) -> list[int]:
    return [int(t) for t in text.split(",") if t]


def _float_list(text: str) -> list[float]:
    return [float(t) for t in text.split(",") if t]


def _str_list(text: str) -> list[str]:
    return [t for t in text.split(",") if t]


SHORTHANDS = {
    "nonnormal": {"family": "table_chain", "params": {"m": 2, "table": [[0, 1, 5], [0, 2, 4], [1, 2, 5]]}},
}


def parse_lattice(spec: str) -> QuasiMetric:
    """A lattice document path, or ``family:key=value;key=value``.

    ``powerset:u=3`` gives unit weights on ``a, b, c`` and ``powerset:a=1;b=3``
    names the weights; ``nonnormal`` is the
    non-normal 3-chain.
    """
    if os.path.exists(spec):
        with open(spec) as fh:
            return space_from_doc(loads(fh.read()))
    if spec in SHORTHANDS:
        return space_from_doc(SHORTHANDS[spec])
    family, _, rest = spec.partition(":")
    params = {}
    for item in filter(None, rest.split(";")):
        key, _, val = item.partition("=")
        params[key] = val
    try:
        if family == "powerset" and "u" in params:
            u = int(params["u"])
            return build_space("powerset", {"weights": {chr(97 + i): 1 for i in range(u)}})
        if family == "powerset":
            return build_space("powerset", {"weights": {k: int(v) for k, v in params.items()}})
        return build_space(family, {k: int(v) for k, v in params.items()})
    except (ValueError, TypeError, LatticeError) as exc:
        raise DocumentError(f"bad lattice spec {spec!r}: {exc}") from None


def _scheduler(text: str, delay_target: int | None) -> SchedulerPolicy:
    if text in ("deliver-all", "deliver_all"):
        return SchedulerPolicy(Scheduling.DELIVER_ALL)
    if text in ("uniform", "uniform_random", "uniform-random"):
        return SchedulerPolicy(Scheduling.UNIFORM_RANDOM)
    if text == "delay-max":
        if delay_target is None:
            raise DocumentError("delay-max needs a unique maximum holder")
        return SchedulerPolicy.delay(delay_target)
    if text.startswith("delay:"):
        return SchedulerPolicy.delay(*_int_list(text[len("delay:"):]))
    raise CliError(EXIT_USAGE, "usage", f"unknown scheduler {text!r}")


def _emit(text: str, out: str | None) -> None:
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _fmt(d) -> str:
    return "inf" if d == float("inf") else str(d)


# ---------------------------------------------------------------------------
# Subcommands


def cmd_verify_lattice(args) -> int:
    qm = parse_lattice(args.lattice)
    problems = verify_lattice(qm.lattice)
    if not problems:
        problems = verify_quasi_metric(qm)
    normal, witness = (False, None) if problems else check_normality(qm)
    lat = qm.lattice
    if args.format == "json":
        doc = {
            "family": qm.family,
            "elements": len(lat),
            "violations": [str(v) for v in problems],
            "normal": normal,
            "normality_witness": None if witness is None else [lat.encode(e) for e in witness],
        }
        _emit(json.dumps(doc, sort_keys=True) + "\n", args.out)
    else:
        lines = [f"{'OK' if not problems else 'FAIL'}, {len(problems)} violations"]
        lines += [f"  {v}" for v in problems]
        if not problems:
            lines.append(f"normal: {'yes' if normal else f'no, witness {witness!r}'}")
        _emit("\n".join(lines) + "\n", args.out)
    return EXIT_VIOLATIONS if problems else EXIT_OK


def cmd_gen_instance(args) -> int:
    qm = parse_lattice(args.lattice)
    inst = generate_valid_instance(qm.lattice, args.n, random.Random(args.seed))
    _emit(dumps(instance_to_doc(inst, qm)), args.out)
    return EXIT_OK


def _initial_instance(args, qm: QuasiMetric) -> tuple[AgreementInstance, int | None]:
    """Base outputs for a protocol run and the unique maximum holder, if any."""
    lat = qm.lattice
    if args.instance:
        inst, _ = load_instance(args.instance, qm)
        if inst.n != args.n:
            raise DocumentError(f"instance has {inst.n} processes, --n is {args.n}")
    elif args.initial == "worst":
        low, high = lat.elements[0], lat.join_all(lat.elements)
        vals = [low] * (args.n - 1) + [high]
        inst = AgreementInstance(vals, vals)
    else:
        inst = generate_valid_instance(lat, args.n, random.Random(f"{args.seed}:instance"))
    top = lat.max(inst.outputs)
    holders = [i for i, y in enumerate(inst.outputs) if y == top]
    return inst, holders[0] if len(holders) == 1 else None


def _crash_schedule(args) -> CrashSchedule:
    if not args.crash_schedule:
        return CrashSchedule()
    with open(args.crash_schedule) as fh:
        try:
            return CrashSchedule.from_doc(loads(fh.read()))
        except (KeyError, TypeError, ValueError, AttributeError) as exc:
            raise DocumentError(f"bad crash schedule: {exc}") from None


def _protocol_summary(args, qm, inst, outcome) -> int:
    final = tuple(outcome.decisions.get(i, inst.outputs[i]) for i in range(inst.n))
    full = AgreementInstance(inst.inputs, inst.outputs, final, frozenset(outcome.crash_rounds))
    report = compliance_report(full, qm)
    valid = check_instance(full, qm, float("inf"), reconciled=True).valid
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(outcome.to_trace())
    summary = {
        "protocol": outcome.protocol,
        "n": inst.n,
        "f": args.f,
        "k": outcome.k,
        "seed": args.seed,
        "crashed": sorted(outcome.crash_rounds),
        "gamma": report.gamma,
        "gamma_reconciled": report.gamma_reconciled,
        "Dprime": report.Dprime,
        "valid": valid,
        "decisions": {str(i): qm.lattice.encode(v) for i, v in outcome.decisions.items()},
    }
    if args.format == "json":
        sys.stdout.write(json.dumps(summary, sort_keys=True) + "\n")
    else:
        sys.stdout.write(
            f"{outcome.protocol} n={inst.n} f={args.f}"
            + (f" k={outcome.k}" if outcome.k else "")
            + f" seed={args.seed} crashed={summary['crashed']}\n"
            f"gamma={_fmt(report.gamma)} gamma'={_fmt(report.gamma_reconciled)} "
            f"D'={_fmt(report.Dprime)} valid={'yes' if valid else 'no'}\n"
        )
    return EXIT_OK


def cmd_run_sync(args) -> int:
    qm = parse_lattice(args.lattice)
    world = NetworkConfig(args.n, args.f, Mode.SYNC_ROUNDS, seed=args.seed)
    inst, _ = _initial_instance(args, qm)
    outcome = run_sync(world, _crash_schedule(args), inst.outputs, qm)
    return _protocol_summary(args, qm, inst, outcome)


def cmd_run_dr(args) -> int:
    qm = parse_lattice(args.lattice)
    NetworkConfig(args.n, args.f)  # budget check before building anything
    inst, holder = _initial_instance(args, qm)
    world = NetworkConfig(
        args.n, args.f, Mode.ASYNC, _scheduler(args.scheduler, holder), seed=args.seed
    )
    outcome = run_async_dr(world, _crash_schedule(args), args.k, inst.outputs, qm)
    return _protocol_summary(args, qm, inst, outcome)


def cmd_replay(args) -> int:
    with open(args.trace) as fh:
        outcome = replay(fh.read())
    enc = outcome.qm.lattice.encode
    doc = {
        "protocol": outcome.protocol,
        "decisions": {str(i): enc(v) for i, v in outcome.decisions.items()},
        "crashed": sorted(outcome.crash_rounds),
        "events": len(outcome.events),
    }
    _emit(json.dumps(doc, sort_keys=True) + "\n", args.out)
    return EXIT_OK


TABLE_COLUMNS = ["n", "f", "p_f", "k", "initial", "sampling", "crash_mode", "runs", "successes", "rate", "ci95"]


def _row_values(row: approx.SweepRow) -> list:
    return [
        row.n, row.f, f"{row.p_f:g}", row.k, row.initial, row.sampling, row.crash_mode,
        row.runs, row.successes, f"{row.rate:.4f}", f"{row.ci95:.4f}",
    ]


def format_rows(result: approx.SweepResult, fmt: str, with_published: bool = True) -> str:
    header_note = f"seed={result.seed} version={__version__}"
    if fmt == "json":
        rows = []
        for r in result.rows:
            d = dict(zip(TABLE_COLUMNS, _row_values(r)))
            d.update(rate=r.rate, ci95=round(r.ci95, 6), p_f=r.p_f)
            d["published"] = approx.published_rate(r)
            d["left_state_space"] = r.left_state_space
            rows.append(d)
        return json.dumps({"seed": result.seed, "version": __version__, "rows": rows}, sort_keys=True) + "\n"
    cols = TABLE_COLUMNS + (["published"] if with_published else [])
    body = []
    for r in result.rows:
        vals = _row_values(r)
        if with_published:
            pub = approx.published_rate(r)
            vals.append("" if pub is None else f"{pub / 100:.3f}")
        body.append([str(v) for v in vals])
    if fmt == "csv":
        buf = io.StringIO()
        buf.write(f"# {header_note}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(cols)
        w.writerows(body)
        return buf.getvalue()
    widths = [max(len(c), *(len(b[i]) for b in body)) for i, c in enumerate(cols)]
    lines = [f"# {header_note}", "  ".join(c.rjust(w) for c, w in zip(cols, widths))]
    lines += ["  ".join(v.rjust(w) for v, w in zip(b, widths)) for b in body]
    return "\n".join(lines) + "\n"


def format_pivot(result: approx.SweepResult, fmt: str) -> str:
    """Rate table with one row per f and one column per k."""
    if fmt != "text":
        return format_rows(result, fmt)
    fs = sorted({r.f for r in result.rows})
    ks = sorted({r.k for r in result.rows})
    first = result.rows[0]
    lines = [
        f"# seed={result.seed} version={__version__} n={first.n} p_f={first.p_f:g} "
        f"initial={first.initial} sampling={first.sampling} crash={first.crash_mode} runs={first.runs}",
        "       " + "".join(f"{'k=' + str(k):>16}" for k in ks),
    ]
    for f in fs:
        cells = []
        for k in ks:
            r = result.get(f=f, k=k)
            cells.append(f"{100 * r.rate:6.1f}% ±{100 * r.ci95:4.1f}".rjust(16))
        lines.append(f"f={f:<5}" + "".join(cells))
    return "\n".join(lines) + "\n"


def _model_base(args) -> approx.ModelConfig:
    try:
        return approx.ModelConfig(
            n=args.n, f=args.f[0], p_f=args.pf[0], k=max(args.k), runs=args.runs,
            seed=args.seed, sampling=args.sampling[0], initial=args.initial[0],
            crash_mode=args.crash_mode[0],
        )
    except ValueError as exc:
        if "f < n" in str(exc):
            raise BudgetError(str(exc)) from None
        raise CliError(EXIT_USAGE, "usage", str(exc)) from None


def _check_fs(args) -> None:
    for f in args.f:
        if not 0 <= f < args.n:
            raise BudgetError(f"need 0 <= f < n, got n={args.n} f={f}")


def cmd_run_model(args) -> int:
    _check_fs(args)
    base = _model_base(args)
    result = approx.sweep(base, fs=args.f, ks=args.k)
    _emit(format_pivot(result, args.format), args.out)
    return EXIT_OK


PRESETS = {
    "table1": dict(initials=["random"], fs=[200, 800], ks=[2, 3, 4], pfs=[0.06]),
    "table2": dict(initials=["worst"], fs=[200, 800], ks=[2, 3, 4, 5], pfs=[0.06]),
    "pf-sweep": dict(initials=["random", "worst"], fs=[800], ks=[2, 3], pfs=[0.5, 0.6, 0.7, 0.8]),
}


def cmd_sweep(args) -> int:
    _check_fs(args)
    base = _model_base(args)
    axes = dict(
        fs=args.f, pfs=args.pf, ks=args.k, initials=args.initial,
        samplings=args.sampling, crash_modes=args.crash_mode,
    )
    result = approx.SweepResult(seed=args.seed)
    for name in args.preset or []:
        grid = dict(axes, **PRESETS[name])
        result.rows.extend(approx.sweep(base, **grid).rows)
    if not args.preset:
        result = approx.sweep(base, **axes)
    text = format_rows(result, args.format)
    if args.format == "text":
        misses = approx.discrepancies(result)
        compared = sum(approx.published_rate(r) is not None for r in result.rows)
        text += f"# compared with published rates: {compared}, outside ±5 pp: {len(misses)}\n"
        text += "".join(f"#   {d}\n" for d in misses)
    _emit(text, args.out)
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", default=None, help="output path (default stdout)")
    common.add_argument("--format", choices=["text", "csv", "json"], default="text")

    p = _Parser(prog="lattice-agreement", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("verify-lattice", parents=[common], help="check lattice and metric axioms")
    s.add_argument("--lattice", required=True)
    s.set_defaults(func=cmd_verify_lattice)

    s = sub.add_parser("gen-instance", parents=[common], help="generate a valid agreement instance")
    s.add_argument("--lattice", required=True)
    s.add_argument("--n", type=int, required=True)
    s.set_defaults(func=cmd_gen_instance)

    for name, func in (("run-sync", cmd_run_sync), ("run-dr", cmd_run_dr)):
        s = sub.add_parser(name, parents=[common], help=f"simulate {name[4:]} reconciliation")
        s.add_argument("--lattice", default="chain:m=10")
        s.add_argument("--n", type=int, required=True)
        s.add_argument("--f", type=int, required=True)
        s.add_argument("--instance", default=None, help="instance document with base outputs")
        s.add_argument("--initial", choices=["random", "worst"], default="random",
                       help="random valid outputs, or all-bottom with one top holder")
        s.add_argument("--crash-schedule", default=None)
        if name == "run-dr":
            s.add_argument("--k", type=int, required=True)
            s.add_argument("--scheduler", default="uniform",
                           help="deliver-all | uniform | delay-max | delay:i,j")
        s.set_defaults(func=func)

    s = sub.add_parser("replay", parents=[common], help="re-execute a recorded trace")
    s.add_argument("trace")
    s.set_defaults(func=cmd_replay)

    for name, func in (("run-model", cmd_run_model), ("sweep", cmd_sweep)):
        s = sub.add_parser(name, parents=[common], help="approximate-model Monte Carlo")
        s.add_argument("--n", type=int, default=1000)
        s.add_argument("--f", type=_int_list, default=[200])
        s.add_argument("--pf", type=_float_list, default=[0.06])
        s.add_argument("--k", type=_int_list, default=[2, 3, 4, 5])
        s.add_argument("--runs", type=int, default=1000)
        if name == "run-model":
            s.add_argument("--sampling", choices=["without", "with"], default="without",
                           type=str, action=_Single)
            s.add_argument("--initial", choices=["random", "worst"], default="random",
                           type=str, action=_Single)
            s.add_argument("--crash-mode", choices=["transient", "persistent"],
                           default="transient", type=str, action=_Single)
        else:
            s.add_argument("--sampling", type=_str_list, default=["without"])
            s.add_argument("--initial", type=_str_list, default=["random"])
            s.add_argument("--crash-mode", type=_str_list, default=["transient"])
            s.add_argument("--preset", type=_str_list, default=None,
                           help="comma list of table1, table2, pf-sweep")
        s.set_defaults(func=func)
    return p


class _Single(argparse.Action):
    """Store a single choice as a one-element list."""

    def __call__(self, parser, namespace, values, option_string=None):
        setattr(namespace, self.dest, [values])


def _normalize(args) -> None:
    if args.command not in ("run-model", "sweep"):
        return
    for name in ("sampling", "initial", "crash_mode"):
        val = getattr(args, name, None)
        if isinstance(val, str):
            setattr(args, name, [val])
    valid = {
        "sampling": {s.value for s in approx.Sampling},
        "initial": {"random", "worst"},
        "crash_mode": {c.value for c in approx.CrashMode},
    }
    if args.command == "sweep":
        for name, allowed in valid.items():
            bad = [v for v in getattr(args, name) if v not in allowed]
            if bad:
                raise CliError(EXIT_USAGE, "usage", f"--{name.replace('_', '-')}: bad value {bad[0]!r}")
        for name in args.preset or []:
            if name not in PRESETS:
                raise CliError(EXIT_USAGE, "usage", f"unknown preset {name!r}")


def main(argv: Sequence[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        _normalize(args)
        return args.func(args)
    except CliError as exc:
        code, name, msg = exc.code, exc.name, str(exc)
    except BudgetError as exc:
        code, name, msg = EXIT_BUDGET, "budget", str(exc)
    except (DocumentError, json.JSONDecodeError, FileNotFoundError, IsADirectoryError) as exc:
        code, name, msg = EXIT_INPUT, "input", str(exc)
    except TraceError as exc:
        code, name, msg = EXIT_TRACE, "trace", str(exc)
    except (SchedulerDeadlock, IncomparableError) as exc:
        code, name, msg = EXIT_PROTOCOL, "protocol", str(exc)
    except (LatticeError, ValueError) as exc:
        code, name, msg = EXIT_INPUT, "input", str(exc)
    sys.stderr.write(f"error[{name}]: {' '.join(msg.split())}\n")
    return code


if __name__ == "__main__":
    sys.exit(main())
