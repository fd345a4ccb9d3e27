"""Command-line entry point: ``rcmsa {dist,anova,vaccine,endpoints,curve}``.

Exit codes: 0 success, 2 unparseable input or arguments, 3 invalid content.
Results go to stdout (or ``--out``), diagnostics to stderr.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import re
import sys
from decimal import ROUND_HALF_EVEN, Decimal
from fractions import Fraction
from importlib import resources
from pathlib import Path

import numpy as np

from .counting import CountingMeasure
from .errors import RCMError
from .measure import DiscreteMeasure, Kernel, MeasurableFn, RandomMeasure
from .rct import (
    DEFAULT_REPS,
    DISPERSION_RULES,
    VaccineTrial,
    curve_point,
    endpoint_table,
    parse_endpoints_csv,
    uncertainty_curve,
    vaccine_report,
)
from .sensitivity import Partition, anova_decompose, entropy, sensitivity_indices

EXIT_PARSE = 2
EXIT_INVALID = 3


class ParseError(Exception):
    pass


def round3(x: float) -> str:
    """Half-even rounding to three decimals for display."""
    return str(Decimal(repr(float(x))).quantize(Decimal("0.001"), rounding=ROUND_HALF_EVEN))


def data_path(name: str) -> Path:
    """Path of a bundled example file."""
    return Path(str(resources.files("rcmsa") / "data" / name))


def _read_text(source: str) -> tuple[str, str]:
    if source.startswith("bundled:"):
        path = data_path(source.split(":", 1)[1])
    else:
        path = Path(source)
    if path.is_file():
        return path.read_text(encoding="utf-8"), str(path)
    if source.lstrip().startswith(("{", "[")):
        return source, "<argument>"
    raise ParseError(f"{source}: no such file")


def _load_json(source: str) -> tuple[object, str, str]:
    text, name = _read_text(source)
    try:
        return json.loads(text), text, name
    except json.JSONDecodeError as exc:
        raise ParseError(f"{name}:{exc.lineno}:{exc.colno}: {exc.msg}") from None


def _line_of(text: str, key: str) -> int:
    m = re.search(r'"' + re.escape(str(key)) + r'"\s*:', text)
    return text.count("\n", 0, m.start()) + 1 if m else 1


def _at(name: str, text: str, key: str, exc: Exception) -> RCMError:
    return RCMError(f"{name}:{_line_of(text, key)}: {exc}")


def _emit(args, text: str) -> None:
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _dump_json(obj) -> str:
    return json.dumps(obj, indent=2, allow_nan=False) + "\n"


def _dump_csv(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def _key_value_csv(obj: dict) -> str:
    return _dump_csv(("field", "value"), [(k, json.dumps(v)) for k, v in obj.items()])


# -- subcommands ---------------------------------------------------------------


def cmd_dist(args) -> None:
    data, text, name = _load_json(args.distribution)
    try:
        kappa = CountingMeasure.from_dict(data)
    except RCMError as exc:
        raise _at(name, text, "kind", exc) from None
    report = {
        **kappa.to_dict(),
        "mean": kappa.mean(),
        "variance": kappa.variance(),
        "defect": kappa.defect(),
        "orthogonal": kappa.is_orthogonal(),
    }
    if args.sample:
        if args.sample < 2:
            raise RCMError("--sample needs at least 2 draws")
        draws = kappa.sample(np.random.default_rng(args.seed), size=args.sample)
        report["empirical"] = {
            "draws": args.sample,
            "seed": args.seed,
            "mean": float(draws.mean()),
            "variance": float(draws.var(ddof=1)),
        }
    _emit(args, _dump_json(report) if args.format != "csv" else _key_value_csv(report))


def _load_random_measure(source: str) -> RandomMeasure:
    data, text, name = _load_json(source)
    if not isinstance(data, dict) or "kappa" not in data or "nu" not in data:
        raise RCMError(f"{name}:1: measure file needs 'kappa' and 'nu' objects")
    try:
        kappa = CountingMeasure.from_dict(data["kappa"])
    except RCMError as exc:
        raise _at(name, text, "kappa", exc) from None
    nu_raw = data["nu"]
    if not isinstance(nu_raw, dict):
        raise _at(name, text, "nu", RCMError("'nu' must map point labels to weights"))
    for label, w in nu_raw.items():
        if isinstance(w, bool) or not isinstance(w, (int, float)) or w < 0:
            raise _at(name, text, label, RCMError(f"weight of point {label!r} must be a nonnegative number"))
    try:
        nu = DiscreteMeasure.from_mapping(nu_raw)
    except RCMError as exc:
        raise _at(name, text, "nu", exc) from None
    kernel = None
    if data.get("kernel") is not None:
        try:
            kernel = Kernel.from_dict(data["kernel"])
            missing = [x for x in nu.points if x not in kernel.laws]
            if missing:
                raise RCMError(f"kernel is missing points {missing}")
        except RCMError as exc:
            raise _at(name, text, "kernel", exc) from None
    return RandomMeasure(kappa, nu, kernel)


def _load_function(source: str, nu: DiscreteMeasure) -> MeasurableFn:
    data, text, name = _load_json(source)
    if not isinstance(data, dict):
        raise RCMError(f"{name}:1: function file must be a JSON object")
    values, power = (data["values"], data.get("power", 0)) if "values" in data else (data, 0)
    for label, v in values.items():
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise _at(name, text, label, RCMError(f"value at point {label!r} must be a number"))
    missing = [x for x in nu.points if x not in values]
    if missing:
        raise RCMError(f"{name}: function is not defined at points {missing}")
    return MeasurableFn(values, power)


def _load_partition(source: str) -> Partition:
    data, text, name = _load_json(source)
    if not isinstance(data, dict) or not all(isinstance(v, list) for v in data.values()):
        raise RCMError(f"{name}:1: partition file must map cell labels to lists of points")
    try:
        return Partition.from_mapping(data)
    except RCMError as exc:
        raise RCMError(f"{name}: {exc}") from None


def cmd_anova(args) -> None:
    N = _load_random_measure(args.measure)
    f = _load_function(args.function, N.nu)
    P = _load_partition(args.partition)
    decomposition = anova_decompose(N, f, P)
    report = {"decomposition": decomposition.to_dict(), "indices": None, "sensitivity": None}
    indices = None
    probs = {}
    if not decomposition.degenerate:
        indices = sensitivity_indices(decomposition)
        report["indices"] = indices.to_dict()
        if not indices.defective:
            S = indices.as_measure()
            probs = S.probs
            report["sensitivity"] = {
                "probabilities": {str(k): v for k, v in probs.items()},
                "entropy_bits": entropy(S, base="binary"),
            }
    if args.format == "csv":
        rows = []
        for cell in P.labels:
            p = probs.get(cell)
            contrib = "" if p is None else (0.0 if p == 0 else -p * np.log2(p))
            rows.append((
                cell,
                "" if indices is None else indices.structural[cell],
                "" if indices is None else indices.correlative[cell],
                "" if p is None else p,
                contrib,
            ))
        _emit(args, _dump_csv(("cell", "S_a", "S_b", "S_prob", "entropy_contrib"), rows))
    else:
        _emit(args, _dump_json(report))


def cmd_vaccine(args) -> None:
    data, text, name = _load_json(args.trial)
    try:
        trial = VaccineTrial.from_dict(data)
    except RCMError as exc:
        raise RCMError(f"{name}: {exc}") from None
    report = vaccine_report(trial, reps=args.reps, seed=args.seed).to_dict()
    report.update(reps=args.reps, seed=args.seed)
    _emit(args, _key_value_csv(report) if args.format == "csv" else _dump_json(report))


def _weights(raw: str) -> tuple[float, float]:
    try:
        w = tuple(float(Fraction(x.strip())) for x in raw.split(","))
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"weights must be 'wT,wC', got {raw!r}") from None
    if len(w) != 2:
        raise argparse.ArgumentTypeError(f"weights must be 'wT,wC', got {raw!r}")
    return w


def cmd_endpoints(args) -> None:
    text, name = _read_text(args.csv)
    try:
        records = parse_endpoints_csv(text)
    except RCMError as exc:
        raise RCMError(f"{name}: {exc}") from None
    table = endpoint_table(records, args.weights, args.dispersion_rule)
    if not table:
        _emit(args, "")
        return
    if args.format == "json":
        _emit(args, _dump_json([{"name": n, "s_T": t, "s_C": c, "h2": h} for n, t, c, h in table]))
        return
    rows = [(n, round3(t), round3(c), round3(h), repr(t), repr(c), repr(h)) for n, t, c, h in table]
    _emit(args, _dump_csv(("name", "s_T", "s_C", "h2", "s_T_full", "s_C_full", "h2_full"), rows))


def _step(raw: str) -> float:
    try:
        step = float(Fraction(raw))
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"step must be a number, got {raw!r}") from None
    if not 0.0 < step <= 0.5:
        raise argparse.ArgumentTypeError(f"step must lie in (0, 0.5], got {raw!r}")
    return step


def _probability(raw: str) -> Fraction:
    try:
        p = Fraction(raw)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"mark must be a number or fraction, got {raw!r}") from None
    if not 0 <= p <= 1:
        raise argparse.ArgumentTypeError(f"mark must lie in [0, 1], got {raw!r}")
    return p


def cmd_curve(args) -> None:
    rows = [(p, u, h, 0) for p, u, h in uncertainty_curve(args.step)]
    for mark in args.mark or ():
        rows.append((*curve_point(float(mark)), 1))
    rows.sort(key=lambda r: (r[0], r[3]))
    if args.format == "json":
        _emit(args, _dump_json([{"p": p, "unc": u, "h2": h, "mark": bool(m)} for p, u, h, m in rows]))
    else:
        _emit(args, _dump_csv(("p", "unc", "h2", "mark"), [(repr(p), repr(u), repr(float(h)), m) for p, u, h, m in rows]))


# -- parser --------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rcmsa", description="Sensitivity analysis with random counting measures"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, default_format, stochastic=False):
        p.add_argument("--format", choices=("json", "csv"), default=default_format)
        p.add_argument("--out", help="write results here instead of stdout")
        if stochastic:
            p.add_argument("--seed", type=int, default=0, help="random seed (default 0)")

    p = sub.add_parser("dist", help="moments, defect and orthogonality of a counting measure")
    p.add_argument("distribution", help='JSON file or literal, e.g. \'{"kind": "poisson", "c": 3.5}\'')
    p.add_argument("--sample", type=int, default=0, metavar="R", help="append empirical moments of R draws")
    common(p, "json", stochastic=True)
    p.set_defaults(run=cmd_dist)

    p = sub.add_parser("anova", help="partition ANOVA and sensitivity indices of Var Nf")
    p.add_argument("measure", help="JSON with kappa, nu and optional kernel")
    p.add_argument("function", help="JSON mapping point labels to f values")
    p.add_argument("partition", help="JSON mapping cell labels to point lists")
    common(p, "json")
    p.set_defaults(run=cmd_anova)

    p = sub.add_parser("vaccine", help="efficacy, sensitivity, entropy and Monte Carlo intervals")
    p.add_argument("trial", help="vaccine trial JSON")
    p.add_argument("--reps", type=int, default=DEFAULT_REPS)
    common(p, "json", stochastic=True)
    p.set_defaults(run=cmd_vaccine)

    p = sub.add_parser("endpoints", help="sensitivity and entropy per clinical endpoint")
    p.add_argument("csv", help="endpoint CSV")
    p.add_argument("--weights", type=_weights, default=(0.5, 0.5), help="group weights 'wT,wC'")
    p.add_argument("--dispersion-rule", choices=DISPERSION_RULES, default="normal392")
    common(p, "csv")
    p.set_defaults(run=cmd_endpoints)

    p = sub.add_parser("curve", help="Unc(p) and H2(p) on a grid")
    p.add_argument("--step", type=_step, default=0.01)
    p.add_argument("--mark", type=_probability, action="append", help="extra reference point, e.g. 77/81")
    common(p, "csv")
    p.set_defaults(run=cmd_curve)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if getattr(args, "reps", DEFAULT_REPS) < 100:
        print("rcmsa: error: --reps must be >= 100", file=sys.stderr)
        return EXIT_PARSE
    try:
        args.run(args)
    except ParseError as exc:
        print(f"rcmsa: error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except RCMError as exc:
        print(f"rcmsa: error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    return 0


if __name__ == "__main__":
    sys.exit(main())
