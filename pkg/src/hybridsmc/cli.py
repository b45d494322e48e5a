"""Command-line front end.

    hybridsmc verify --model builtin:cardiac?cell=epi --property "F<=500(![Resting mode])"
    hybridsmc table3 [--only cardiac|circadian]
    hybridsmc calibrate --p 1 0.99 0.5
    hybridsmc export-model --model builtin:circadian?variant=wild

``verify`` exits 0 when the property is accepted (H0), 1 when it is rejected
(H1) and 2 on errors or inconclusive runs.
"""

from __future__ import annotations

import argparse
import json
import os
import statistics
import sys
import threading
import time
from pathlib import Path

from . import bltl as B
from .flow import FlowConfig
from .model import HybridAutomaton, ModelError, parse_model, serialize_model
from .models import builtin_model, property_suite
from .sampler import SamplerConfig, dump_trajectory
from .smc import H0, H1, SmcConfig, Verdict, calibration_report, run_smc, sample_size

SCHEMA = 1
EXIT = {H0: 0, H1: 1}


class _Reporter:
    """Serializes writes to stdout."""

    def __init__(self, stream=None):
        self.stream = stream or sys.stdout
        self.lock = threading.Lock()

    def line(self, text: str = "") -> None:
        with self.lock:
            self.stream.write(text + "\n")
            self.stream.flush()


def load_model(ref: str) -> HybridAutomaton:
    if ref.startswith("builtin:"):
        return builtin_model(ref)
    path = Path(ref)
    if not path.is_file():
        raise ModelError(f"no such model file: {ref}")
    return parse_model(path.read_text())


def load_property(ref: str, h: HybridAutomaton, bounds: str = "time") -> tuple[str, B.Formula]:
    text = Path(ref).read_text().strip() if os.path.isfile(ref) else ref
    delta = h.delta if bounds == "time" else None
    return text, B.parse_bltl(text, labels=h.labels, variables=h.variables, delta=delta)


def _runs(modes: list[str]) -> list[list]:
    """Run-length encoding of a mode sequence."""
    out: list[list] = []
    for m in modes:
        if out and out[-1][0] == m:
            out[-1][1] += 1
        else:
            out.append([m, 1])
    return out


def run_report(model_ref: str, h: HybridAutomaton, text: str, verdict: Verdict, cfg: SmcConfig,
               scfg: SamplerConfig, bounds: str) -> dict:
    cex = None
    if verdict.counterexample is not None:
        tr = verdict.counterexample
        cex = {"index": verdict.counterexample_index, "seed": list(tr.seed), "mode_runs": _runs(tr.mode_sequence())}
    times = verdict.sample_seconds
    return {
        "schema": SCHEMA,
        "model": {"ref": model_ref, "name": h.name},
        "property": text,
        "bounds": bounds,
        "delta": cfg.delta,
        "alpha": cfg.alpha,
        "N": verdict.N,
        "J": scfg.J,
        "K": verdict.horizon,
        "Delta": h.delta,
        "substeps": scfg.flow.substeps,
        "seed": cfg.seed,
        "threads": cfg.threads,
        "verdict": verdict.decision,
        "holds": verdict.holds,
        "samples": verdict.samples,
        "error": verdict.error,
        "counterexample": cex,
        "timing": {
            "wall_clock": verdict.wall_clock,
            "per_sample_mean": statistics.fmean(times) if times else None,
            "per_sample_median": statistics.median(times) if times else None,
            "per_sample_max": max(times) if times else None,
        },
    }


def _write_json(path: str, payload: dict) -> None:
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _common(p: argparse.ArgumentParser, substeps: int) -> None:
    p.add_argument("--delta", type=float, default=0.01, help="indifference region (default 0.01)")
    p.add_argument("--alpha", type=float, default=0.01, help="error bound (default 0.01)")
    p.add_argument("--J", type=int, default=10, help="time points drawn per step (default 10)")
    p.add_argument("--substeps", type=int, default=substeps, help=f"RK4 substeps per step (default {substeps})")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--json", metavar="PATH", help="write a machine-readable report ('-' for stdout)")


def cmd_verify(args, out: _Reporter) -> int:
    try:
        h = load_model(args.model)
        text, psi = load_property(args.property, h, args.bounds)
        cfg = SmcConfig(delta=args.delta, alpha=args.alpha, seed=args.seed, threads=args.threads)
        scfg = SamplerConfig(J=args.J, K=args.K, flow=FlowConfig(args.substeps), robust=args.robust)
    except (ModelError, B.BltlSyntaxError, ValueError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2

    dump = open(args.dump_trajectories, "w") if args.dump_trajectories else None
    try:
        def on_sample(i, ok, traj):
            dump_trajectory(traj, h.variables, dump, i)

        try:
            verdict = run_smc(h, psi, cfg, scfg, on_sample if dump else None)
        except ValueError as err:
            print(f"error: {err}", file=sys.stderr)
            return 2
    finally:
        if dump:
            dump.close()

    report = run_report(args.model, h, text, verdict, cfg, scfg, args.bounds)
    out.line(f"model      {h.name}  ({args.model})")
    out.line(f"property   {text}")
    out.line(f"delta={cfg.delta} alpha={cfg.alpha} N={verdict.N} J={scfg.J} K={verdict.horizon} "
             f"Delta={h.delta} substeps={scfg.flow.substeps} seed={cfg.seed} threads={cfg.threads}")
    out.line(f"verdict    {verdict.decision}  after {verdict.samples} samples  ({verdict.wall_clock:.2f} s)")
    if verdict.error:
        out.line(f"error      {verdict.error}")
    if report["counterexample"]:
        cex = report["counterexample"]
        path = " -> ".join(f"{m}x{n}" for m, n in cex["mode_runs"][:12])
        more = " ..." if len(cex["mode_runs"]) > 12 else ""
        out.line(f"counterexample  sample {cex['index']} seed {tuple(cex['seed'])}: {path}{more}")
    if args.json:
        _write_json(args.json, report)
    return EXIT.get(verdict.decision, 2)


def cmd_table3(args, out: _Reporter) -> int:
    rows = property_suite(args.only)
    cfg = SmcConfig(delta=args.delta, alpha=args.alpha, seed=args.seed, threads=args.threads)
    scfg = SamplerConfig(J=args.J, flow=FlowConfig(args.substeps))
    N = sample_size(cfg.delta, cfg.alpha)
    results = []
    mismatches = 0
    out.line(f"{'prop':4}  {'condition':28}  {'expected':>8}  {'decision':>12}  {'samples':>7}  {'time':>8}  status")
    start = time.perf_counter()
    for row in rows:
        h = builtin_model(row.uri)
        psi = B.parse_bltl(row.text, labels=h.labels, variables=h.variables, delta=h.delta)
        v = run_smc(h, psi, cfg, scfg)
        want = H0 if row.expected else H1
        count_ok = v.samples == N if row.expected else v.samples <= 5
        ok = v.decision == want and count_ok
        mismatches += not ok
        status = "match" if ok else "MISMATCH"
        out.line(f"{row.property:4}  {row.condition:28}  {str(row.expected):>8}  {v.decision:>12}  "
                 f"{v.samples:>7}  {v.wall_clock:7.1f}s  {status}")
        results.append({
            "property": row.property, "condition": row.condition, "model": row.uri,
            "expected": row.expected, "verdict": v.decision, "holds": v.holds, "samples": v.samples,
            "expected_samples": N if row.expected else row.samples, "match": ok, "error": v.error,
            "wall_clock": v.wall_clock,
        })
    total = time.perf_counter() - start
    out.line(f"{len(rows) - mismatches}/{len(rows)} rows match  ({total:.1f} s)")
    if args.json:
        _write_json(args.json, {
            "schema": SCHEMA, "delta": cfg.delta, "alpha": cfg.alpha, "N": N, "J": scfg.J,
            "substeps": scfg.flow.substeps, "seed": cfg.seed, "threads": cfg.threads,
            "rows": results, "mismatches": mismatches, "wall_clock": total,
        })
    return 0 if mismatches == 0 else 1


def cmd_calibrate(args, out: _Reporter) -> int:
    cfg = SmcConfig(delta=args.delta, alpha=args.alpha, seed=args.seed)
    reports = []
    out.line(f"{'p':>8}  {'N':>5}  {'H0':>5}  {'H1':>5}  {'H0 rate':>8}  {'p^N':>8}  {'bound':>8}  {'median stop':>11}")
    for p in args.p:
        r = calibration_report(cfg, p, args.repetitions)
        bound = r["expected_h0_rate"] + 3 * r["sigma"]
        out.line(f"{p:8.4f}  {r['N']:5d}  {r['H0']:5d}  {r['H1']:5d}  {r['h0_rate']:8.4f}  "
                 f"{r['expected_h0_rate']:8.4f}  {bound:8.4f}  {r['median_stop']:11.1f}")
        reports.append(r)
    if args.json:
        _write_json(args.json, {"schema": SCHEMA, "reports": reports})
    return 0


def cmd_export(args, out: _Reporter) -> int:
    try:
        h = load_model(args.model)
    except ModelError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    text = serialize_model(h)
    if args.output:
        Path(args.output).write_text(text)
    else:
        out.stream.write(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hybridsmc", description="Statistical model checking of hybrid automata.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify", help="check one property on one model")
    p.add_argument("--model", required=True, help="model file or builtin:NAME?key=value URI")
    p.add_argument("--property", required=True, help="property file or inline text")
    _common(p, substeps=100)
    p.add_argument("--K", type=int, default=None, help="largest allowed property horizon in steps (default: the model horizon)")
    p.add_argument("--bounds", choices=("time", "steps"), default="time",
                   help="read temporal bounds as model time (default) or as step counts")
    p.add_argument("--robust", action="store_true",
                   help="force robust sampling (automatic with quantitative atoms)")
    p.add_argument("--dump-trajectories", metavar="PATH", help="write consumed samples as JSON lines")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("table3", help="run the builtin property table")
    p.add_argument("--only", choices=("cardiac", "circadian"))
    _common(p, substeps=10)
    p.set_defaults(func=cmd_table3)

    p = sub.add_parser("calibrate", help="check the test's error rates on synthetic sources")
    p.add_argument("--p", type=float, nargs="+", default=[1.0, 0.99, 0.5])
    p.add_argument("--delta", type=float, default=0.01)
    p.add_argument("--alpha", type=float, default=0.01)
    p.add_argument("--repetitions", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--json", metavar="PATH")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("export-model", help="print a model document")
    p.add_argument("--model", required=True)
    p.add_argument("--output", "-o")
    p.set_defaults(func=cmd_export)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args, _Reporter())
    except KeyboardInterrupt:
        return 2


if __name__ == "__main__":
    sys.exit(main())
