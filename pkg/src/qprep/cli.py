"""Command-line front end.

    qprep plan   <config.json>
    qprep run    <config.json> --out <dir>
    qprep verify <report.json>
    qprep sweep  <config.json> --vary a=8..16 --out <csv>

Exit codes: 0 success, 2 validation failure, 3 I/O failure, 4 invariant
violation (a violated bound, an inconsistent report, or a failed run).
The QPREP_MAX_AMPS environment variable overrides the state-vector
enumeration cap.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import csv
import json
import os
import sys

from .analysis import NOT_APPLICABLE, VIOLATED, evaluate_status
from .config import build_spec, load_config
from .errors import QprepError, ValidationError
from .pipeline import RunConfig, prepare, run_report
from .scheduler import compute_schedule, plan_to_dict
from .statevector import dump_amplitudes
from .target_model import count_classes, validate_spec

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_IO = 3
EXIT_INVARIANT = 4


def _run_config(cfg) -> RunConfig:
    return RunConfig(
        spec=build_spec(cfg),
        convention=cfg.convention,
        measurement_mode=cfg.mode,
        seed=cfg.seed,
        max_retries=cfg.max_retries,
    )


def cmd_plan(args) -> int:
    cfg = load_config(args.config)
    spec = build_spec(cfg)
    validate_spec(spec)
    pack = count_classes(spec)
    plan = compute_schedule(pack, spec, cfg.convention)
    print(json.dumps(plan_to_dict(plan, spec), indent=2, sort_keys=True))
    return EXIT_OK


def _summary_line(report: dict) -> str:
    statuses = [entry["status"] for entry in report["bounds"].values()]
    held = sum(s not in (VIOLATED, NOT_APPLICABLE) for s in statuses)
    na = sum(s == NOT_APPLICABLE for s in statuses)
    bad = [name for name, entry in report["bounds"].items() if entry["status"] == VIOLATED]
    if bad:
        return f"FAIL: violated {', '.join(sorted(bad))} ({held} hold, {na} not applicable)"
    return f"PASS: {held} bounds hold, {na} not applicable"


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    run_cfg = _run_config(cfg)
    report = run_report(run_cfg)
    artifacts = prepare(run_cfg)
    try:
        os.makedirs(args.out, exist_ok=True)
        with open(os.path.join(args.out, "report.json"), "w") as fh:
            json.dump(report, fh, indent=2, sort_keys=True)
            fh.write("\n")
        with open(os.path.join(args.out, "amplitudes.csv"), "w") as fh:
            dump_amplitudes(artifacts.psi_T, fh)
    except OSError as exc:
        print(f"error: cannot write outputs: {exc}", file=sys.stderr)
        return EXIT_IO
    print(_summary_line(report))
    return EXIT_OK if report["pass"] else EXIT_INVARIANT


def cmd_verify(args) -> int:
    try:
        with open(args.report) as fh:
            report = json.load(fh)
    except OSError as exc:
        print(f"error: cannot read report: {exc}", file=sys.stderr)
        return EXIT_IO
    except json.JSONDecodeError as exc:
        print(f"error: malformed report: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    try:
        bounds = report["bounds"]
        items = sorted(bounds.items())
        inconsistent = []
        violated = []
        for name, entry in items:
            stored = entry["status"]
            recomputed = evaluate_status(
                entry["measured"], entry["bound"], entry["op"],
                applicable=stored != NOT_APPLICABLE,
            )
            ok = recomputed == stored
            print(f"{'ok ' if ok else 'BAD'} {name}: {entry['measured']:.6g} "
                  f"{entry['op']} {entry['bound']:.6g} -> {stored}")
            if not ok:
                inconsistent.append(name)
            if stored == VIOLATED:
                violated.append(name)
    except (KeyError, TypeError) as exc:
        print(f"error: malformed report: {exc!r}", file=sys.stderr)
        return EXIT_VALIDATION
    if inconsistent:
        print(f"FAIL: stored statuses disagree with values: {', '.join(inconsistent)}")
        return EXIT_INVARIANT
    if violated:
        print(f"FAIL: report records violated bounds: {', '.join(violated)}")
        return EXIT_INVARIANT
    print(f"PASS: {len(items)} recorded bounds verified")
    return EXIT_OK


def _parse_vary(text: str):
    try:
        name, _, span = text.partition("=")
        lo, _, hi = span.partition("..")
        name = name.strip().lower()
        values = list(range(int(lo), int(hi) + 1))
    except ValueError as exc:
        raise ValidationError(f"bad --vary argument {text!r}: {exc}") from exc
    if name not in ("a", "tprime"):
        raise ValidationError(f"--vary parameter must be 'a' or 'tprime', got {name!r}")
    if not values:
        raise ValidationError(f"--vary range {text!r} is empty")
    return name, values


def cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    name, values = _parse_vary(args.vary)

    def point(value: int) -> dict:
        doc = cfg.to_dict()
        if name == "a":
            doc["a"] = value
        else:
            doc["T'"] = value
        from .config import parse_config

        return run_report(_run_config(parse_config(doc, base_dir=cfg.base_dir)))

    with concurrent.futures.ThreadPoolExecutor(
        max_workers=min(len(values), os.cpu_count() or 1)
    ) as pool:
        reports = list(pool.map(point, values))

    try:
        with open(args.out, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow([name, "fid_total", "bound_total", "p_fail",
                             "bound_p_fail", "oracle_calls", "budget_bound"])
            for value, report in zip(values, reports):
                writer.writerow([
                    value,
                    f"{report['measured']['fid_total']:.17g}",
                    f"{report['bounds']['fid_total']['bound']:.17g}",
                    f"{report['measured']['p_fail']:.17g}",
                    f"{report['bounds']['p_fail']['bound']:.17g}",
                    report["measured"]["oracle_calls"],
                    f"{report['plan']['budget_bound']:.17g}",
                ])
    except OSError as exc:
        print(f"error: cannot write sweep CSV: {exc}", file=sys.stderr)
        return EXIT_IO
    print(f"wrote {len(values)} sweep rows to {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qprep",
        description="Grover-based state preparation: plan, simulate, and check bounds.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("plan", help="print the preparation plan as JSON")
    p.add_argument("config")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("run", help="run the pipeline and write report.json + amplitudes.csv")
    p.add_argument("config")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("verify", help="re-check the bound statuses recorded in a report")
    p.add_argument("report")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("sweep", help="run a parameter sweep and write a CSV summary")
    p.add_argument("config")
    p.add_argument("--vary", required=True, metavar="PARAM=LO..HI",
                   help="a=8..16 or tprime=1..6")
    p.add_argument("--out", required=True, help="output CSV path")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except QprepError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())
