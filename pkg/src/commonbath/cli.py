"""Command-line interface.

Subcommands ``coeffs``, ``evolve``, ``run``, ``sweep``, ``check`` and ``parse``
write CSV (or TSV) with numbers at nine significant digits, so the same
inputs always give byte-identical output.

Exit codes: 0 success, 1 failed invariant, 2 usage or domain error,
3 bench-file error.
"""
from __future__ import annotations

import argparse
import csv
import io
import sys
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from . import bench as bf
from . import checks
from . import experiment as ex
from . import opensys as osys
from .errors import BenchFileError, DegenerateInputError, DomainError, UnsupportedInputError, WiringError

EXIT_OK, EXIT_INVARIANT, EXIT_USAGE, EXIT_BENCH = 0, 1, 2, 3


class UsageError(Exception):
    pass


def fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (float, int, np.floating, np.integer)):
        s = format(float(x), ".9g")
        return "0" if s == "-0" else s
    return str(x)


def write_table(args, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, delimiter="\t" if args.format == "tsv" else ",", lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(x) for x in row])
    text = buf.getvalue()
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def noise_from(args) -> ex.NoiseModel:
    base = ex.NoiseModel.lab() if args.noise == "lab" else ex.NoiseModel()
    nu_prep = base.nu_prep if args.nu_prep is None else args.nu_prep
    nu_dmzim = base.nu_dmzim if args.nu_dmzim is None else args.nu_dmzim
    return ex.NoiseModel(nu_prep, nu_dmzim)


# --------------------------------------------------------------------------
# subcommands


def cmd_coeffs(args) -> int:
    if args.p is not None:
        k = osys.coefficients_for_p(args.p)
        p = float(args.p)
    else:
        k = osys.map_coefficients(args.gt)
        p = osys.p_from_gt(k.gt)
    write_table(args, ["gt", "p", "A", "B", "C", "D", "E", "F"], [(k.gt, p) + k.as_tuple()])
    return EXIT_OK


def _rho_columns():
    return [(i, j) for i in range(4) for j in range(i, 4)]


def cmd_evolve(args) -> int:
    rho0 = osys.projector(args.initial)
    times, states = osys.master_trajectory(rho0, args.gamma, args.t, args.steps, args.every)
    cols = _rho_columns()
    header = ["t"] + [f"rho_{osys.BASIS[i]}_{osys.BASIS[j]}" for i, j in cols] + ["lambda", "C"]
    rows = []
    for t, rho in zip(times, states):
        lam = osys.lambda_value(rho)
        rows.append([t] + [rho[i, j].real for i, j in cols] + [lam, max(0.0, lam)])
    write_table(args, header, rows)
    return EXIT_OK


RUN_HEADER = (
    ["p", "gt", "theta1", "theta2"]
    + [f"I{k}" for k in range(1, 9)]
    + ["P_psi_plus", "P_psi_minus", "P_ee", "P_gg", "witness", "lambda", "calibrated"]
)


def _bench_intensities(args, angles: ex.AngleSetting, noise: ex.NoiseModel) -> ex.OutputIntensities:
    spec = bf.load_bench(args.bench)
    if spec.outputs != ex.PORTS:
        raise BenchFileError([bf.Diagnostic(0, 0, "run needs OUTPUT paths=O1,...,O8", ",".join(spec.outputs))])
    wanted = {
        "theta1": angles.theta1,
        "theta2": angles.theta2,
        "nu_prep": noise.nu_prep,
        "nu_dmzim": noise.nu_dmzim,
        "dphi_prep": args.dphi_prep,
        "dphi_cnot": args.dphi_cnot,
    }
    declared = spec.defaults
    got = bf.elaborate_and_run(spec, {k: v for k, v in wanted.items() if k in declared})
    return ex.OutputIntensities.from_values(list(got.values()))


def cmd_run(args) -> int:
    if (args.theta1 is None) != (args.theta2 is None):
        raise UsageError("--theta1 and --theta2 go together")
    if args.theta1 is not None:
        if args.p is not None:
            raise UsageError("give either --p or --theta1/--theta2")
        angles, p = ex.AngleSetting(args.theta1, args.theta2), None
    elif args.p is not None:
        p = float(args.p)
        angles = ex.rounded_angles(p) if args.paper_angles else ex.angles_for_p(p)
        if args.paper_angles:
            p = None
    else:
        raise UsageError("run needs --p or --theta1/--theta2")
    noise = noise_from(args)
    if args.bench:
        intensities = _bench_intensities(args, angles, noise)
    else:
        intensities = ex.run_angles(angles, noise, args.dphi_prep, args.dphi_cnot)
    calibrated = args.dphi_prep == ex.PREP_PHASE and args.dphi_cnot == ex.CNOT_PHASE
    rec = ex.make_record(angles, intensities, calibrated=calibrated, ccd_error=args.ccd_error, p=p)
    header = list(RUN_HEADER)
    row = (
        [rec.p, rec.gt, angles.theta1, angles.theta2]
        + list(intensities.values)
        + list(rec.populations.as_tuple())
        + [rec.witness, rec.lam, rec.calibrated]
    )
    if args.ccd_error is not None:
        header.append("lambda_err")
        row.append(rec.lambda_err)
    write_table(args, header, [row])
    return EXIT_OK


def cmd_sweep(args) -> int:
    if args.npoints < 1:
        raise DomainError(f"npoints must be >= 1, got {args.npoints}")
    ps = [0.0] if args.npoints == 1 else [float(x) for x in np.linspace(0.0, 1.0, args.npoints)]
    recs = ex.sweep(
        ps,
        noise_from(args),
        args.dphi_prep,
        workers=args.workers,
        dphi_cnot=args.dphi_cnot,
        rounded=args.paper_angles,
        ccd_error=args.ccd_error,
    )
    header = ["p", "lambda_circuit", "lambda_oracle", "C"]
    if args.ccd_error is not None:
        header.append("lambda_err")
    rows = []
    for p, rec in zip(ps, recs):
        row = [p, rec.lam, osys.lambda_value(osys.reduced_state_for_p(p)), max(0.0, rec.lam)]
        if args.ccd_error is not None:
            row.append(rec.lambda_err)
        rows.append(row)
    write_table(args, header, rows)
    return EXIT_OK


def cmd_check(args) -> int:
    results = checks.run_checks(noise_from(args), args.dphi_prep, args.dphi_cnot)
    write_table(args, ["invariant", "status", "detail"], [(r.name, r.status, r.detail) for r in results])
    return EXIT_OK if all(r.ok for r in results) else EXIT_INVARIANT


def cmd_parse(args) -> int:
    text = bf.read_bench_text(args.file)
    bench, errors = bf.parse_bench(text)
    if not errors:
        _, errors = bf.validate(bench)
    if errors:
        raise BenchFileError(errors)
    if args.canonical:
        out = bf.format_bench(bench)
        if args.out:
            Path(args.out).write_text(out, encoding="utf-8")
        else:
            sys.stdout.write(out)
        return EXIT_OK
    spec, _ = bf.validate(bench)
    rows = [
        ("statements", len(bench.statements)),
        ("elements", len(spec.statements)),
        ("source", f"{spec.source_path}:{spec.source_component}"),
        ("outputs", " ".join(spec.outputs)),
        ("params", " ".join(f"{k}={fmt(v)}" for k, v in spec.params)),
        ("errors", 0),
    ]
    write_table(args, ["field", "value"], rows)
    return EXIT_OK


# --------------------------------------------------------------------------
# parser


def _common() -> argparse.ArgumentParser:
    c = argparse.ArgumentParser(add_help=False)
    c.add_argument("--format", choices=("csv", "tsv"), default="csv")
    c.add_argument("--out", metavar="PATH", help="write here instead of standard output")
    c.add_argument("--config", metavar="PATH", help="key=value file of defaults; flags win")
    c.add_argument("--noise", choices=("ideal", "lab"), default="ideal", help="lab: nu_prep=0.97, nu_dmzim=0.93")
    c.add_argument("--nu-prep", type=float, help="visibility of the preparation MZIM")
    c.add_argument("--nu-dmzim", type=float, help="visibility of the measurement DMZIM")
    c.add_argument("--paper-angles", action="store_true", help="round plate angles to whole degrees")
    c.add_argument("--ccd-error", type=float, metavar="REL", help="relative intensity error to propagate into lambda")
    c.add_argument("--dphi-prep", "--dphi", type=float, default=ex.PREP_PHASE, help="phase on the three-mirror arm")
    c.add_argument("--dphi-cnot", type=float, default=ex.CNOT_PHASE, help="phase inside each CNOT")
    return c


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="commonbath", description="Common-bath entanglement simulator.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("coeffs", parents=[common], help="map coefficients A..F")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--gt", type=float)
    g.add_argument("--p", type=float)
    p.set_defaults(func=cmd_coeffs)

    p = sub.add_parser("evolve", parents=[common], help="integrate the master equation")
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--t", type=float, required=True)
    p.add_argument("--steps", type=int, default=1000)
    p.add_argument("--initial", default="eg", help="ee, eg, ge, gg, psi+ or psi-")
    p.add_argument("--every", type=int, default=10, help="emit every N steps (the final time is always emitted)")
    p.set_defaults(func=cmd_evolve)

    p = sub.add_parser("run", parents=[common], help="one bench run")
    p.add_argument("--p", type=float)
    p.add_argument("--theta1", type=float)
    p.add_argument("--theta2", type=float)
    p.add_argument("--bench", help="bench file path or packaged name (fig1.bench)")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", parents=[common], help="lambda over an even p grid")
    p.add_argument("--npoints", type=int, default=11)
    p.add_argument("--workers", type=int)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("check", parents=[common], help="oracle-equivalence invariants")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("parse", parents=[common], help="lint a bench file")
    p.add_argument("file", help="bench file path or packaged name")
    p.add_argument("--canonical", action="store_true", help="print the normalized bench text")
    p.set_defaults(func=cmd_parse)
    return parser


def _truthy(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise UsageError(f"not a boolean: {text!r}")


def read_config(path: str) -> dict[str, str]:
    out = {}
    for n, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, eq, value = line.partition("=")
        if not eq:
            raise UsageError(f"{path}:{n}: expected key=value")
        out[key.strip().replace("-", "_")] = value.strip()
    return out


def apply_config(parser: argparse.ArgumentParser, argv: Sequence[str]) -> None:
    """Turn config-file entries into parser defaults so command-line flags still win."""
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return
    entries = read_config(known.config)
    subparsers = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    used = set()
    for sp in subparsers.choices.values():
        actions = {a.dest: a for a in sp._actions}
        defaults = {}
        for key, text in entries.items():
            a = actions.get(key)
            if a is None or key in ("config", "help", "file"):
                continue
            if isinstance(a, argparse._StoreTrueAction):
                value = _truthy(text)
            else:
                value = a.type(text) if a.type else text
                if a.choices is not None and value not in a.choices:
                    raise UsageError(f"config {key}={text}: choose from {', '.join(a.choices)}")
            defaults[key] = value
            used.add(key)
        sp.set_defaults(**defaults)
    unknown = sorted(set(entries) - used)
    if unknown:
        raise UsageError(f"unknown config keys: {', '.join(unknown)}")


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        apply_config(parser, argv)
    except (UsageError, OSError, ValueError) as exc:
        print(f"commonbath: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except BenchFileError as exc:
        for d in exc.diagnostics:
            print(f"{args.file if args.command == 'parse' else args.bench}: {d}", file=sys.stderr)
        return EXIT_BENCH
    except FileNotFoundError as exc:
        print(f"commonbath: error: {exc}", file=sys.stderr)
        return EXIT_BENCH if getattr(args, "bench", None) or args.command == "parse" else EXIT_USAGE
    except (WiringError, UnsupportedInputError) as exc:
        print(f"commonbath: bench error: {exc}", file=sys.stderr)
        return EXIT_BENCH
    except (UsageError, DomainError, DegenerateInputError) as exc:
        print(f"commonbath: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
