"""Command-line entry points: gen, solve, diagnose, bench, report.

Every subcommand is non-interactive and, given identical inputs and seeds,
writes byte-identical files (wall-clock timings are opt-in via
``bench --timings-out`` and never enter the result artifacts).

Exit codes: 0 success, 1 domain failure, 2 usage or schema error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from pathlib import Path

from .diagnosis import DEFAULT_WHITELIST, DiagnosisConfig, diagnose_dcr, diagnose_ecp
from .errors import DiagnosisError, EvaluationError, InstanceError, SolomonFormatError
from .evaluation import Evaluator
from .instances import (
    Family,
    ProblemInstance,
    VARIANT_NAMES,
    VariantDescriptor,
    load_bundled_base,
    parse_solomon,
    resolve_variant_name,
    truncate,
)
from .metrics import MetricReport, NormalizationBounds, build_reference_set, hypervolume_2d, igd, normalize
from .solver import SolverConfig, run, run_baseline
from . import instances


def _write_json(path, payload):
    Path(path).write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")


def _front_payload(result):
    evaluator = Evaluator(result.inst)
    entries = []
    for cost, violation, routes in result.front_entries():
        breakdown = [
            {"family": e.family.value, "subject": e.subject, "excess": e.excess}
            for e in evaluator.breakdown(routes)
        ]
        entries.append(
            {
                "routes": [list(r) for r in routes],
                "cost": cost,
                "violation": violation,
                "breakdown": breakdown,
            }
        )
    return entries


def _load_instance(path):
    try:
        return ProblemInstance.from_json(Path(path).read_text())
    except (json.JSONDecodeError, KeyError) as exc:
        raise InstanceError(f"bad instance schema: {exc}") from exc


def _solver_config(args, mode):
    return SolverConfig(
        population_size=args.pop,
        iterations=args.iters,
        seed=args.seed,
        mode=mode,
    )


def _build_variant_instance(variant, n, base_path=None, params=None):
    descriptor = VariantDescriptor.from_name(variant)
    if base_path:
        nodes, _capacity = parse_solomon(Path(base_path).read_text())
        nodes = truncate(nodes, n)
    else:
        nodes, _capacity = load_bundled_base(n)
    return instances.build_variant(nodes, descriptor, params)


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def _cmd_gen(args):
    try:
        resolve_variant_name(args.variant)
    except InstanceError:
        print(f"unknown variant {args.variant!r}; valid names:", file=sys.stderr)
        for name in VARIANT_NAMES:
            print(f"  {name}", file=sys.stderr)
        return 2
    params = json.loads(args.params) if args.params else None
    inst = _build_variant_instance(args.variant, args.n, args.base, params)
    Path(args.out).write_text(inst.to_json())
    print(inst.description)
    return 0


def _run_one(inst, mode, args):
    if mode == "moid":
        return run(inst, _solver_config(args, "multi_objective"))
    return run_baseline(inst, _solver_config(args, "baseline"))


def _cmd_solve(args):
    inst = _load_instance(args.instance)
    result = _run_one(inst, args.mode, args)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    _write_json(outdir / "front.json", _front_payload(result))
    _write_json(outdir / "trace.json", result.trace)
    print(
        f"{inst.name}: mode={args.mode} front_size={len(result.front_entries())} "
        f"evaluations={result.evaluations}"
    )
    return 0


def _diagnosis_config(args):
    whitelist = dict(DEFAULT_WHITELIST)
    if getattr(args, "whitelist", None):
        overrides = json.loads(args.whitelist)
        for family_name, names in overrides.items():
            whitelist[Family(family_name)] = tuple(names)
    return DiagnosisConfig(norm_p=args.norm_p, whitelist=whitelist)


def _diagnose_front(inst, front_entries, strategy, cfg):
    reports = []
    failures = 0
    for index, entry in enumerate(front_entries):
        routes = entry["routes"]
        try:
            if strategy == "dcr":
                report = diagnose_dcr(routes, inst, solution_index=index)
            else:
                report = diagnose_ecp(routes, inst, cfg, solution_index=index)
            reports.append(report.to_json_dict())
        except DiagnosisError as exc:
            failures += 1
            reports.append({"solution_index": index, "strategy": strategy.upper(), "error": str(exc)})
    return reports, failures


def _cmd_diagnose(args):
    inst = _load_instance(args.instance)
    front = json.loads(Path(args.front).read_text())
    cfg = _diagnosis_config(args)
    reports, failures = _diagnose_front(inst, front, args.strategy, cfg)
    _write_json(args.out, reports)
    successes = sum(1 for r in reports if r.get("residual_violation") == 0.0)
    total = len(reports)
    rate = successes / total if total else math.nan
    print(f"ASR {rate:.3f} ({successes}/{total})")
    return 1 if failures else 0


def _bench_variant(variant, args, rows, outdir):
    inst = _build_variant_instance(variant, args.n)
    seeds = list(range(args.seed, args.seed + args.runs))
    runs = {}
    wall = {}
    for seed in seeds:
        for method in ("baseline", "moid"):
            cfg = SolverConfig(
                population_size=args.pop,
                iterations=args.iters,
                seed=seed,
                mode="multi_objective" if method == "moid" else "baseline",
            )
            started = time.monotonic()
            result = run(inst, cfg) if method == "moid" else run_baseline(inst, cfg)
            wall[(method, seed)] = time.monotonic() - started
            runs[(method, seed)] = result

    fronts = {key: [(c, v) for c, v, _routes in result.front_entries()] for key, result in runs.items()}
    union = [point for front in fronts.values() for point in front]
    reference_set = build_reference_set([union])
    bounds = NormalizationBounds.from_points(union)
    norm_reference = normalize(reference_set, bounds)
    variant_dir = outdir / variant
    variant_dir.mkdir(parents=True, exist_ok=True)
    _write_json(
        variant_dir / "reference_set.json",
        {
            "points": [list(p) for p in reference_set],
            "ideal": list(bounds.ideal),
            "nadir": list(bounds.nadir),
        },
    )

    diag_cfg = _diagnosis_config(args)
    for (method, seed), result in sorted(runs.items()):
        norm_front = normalize(fronts[(method, seed)], bounds)
        hv = hypervolume_2d(norm_front, bounds.reference)
        igd_value = igd(norm_front, norm_reference)
        rows.append(
            MetricReport(
                variant=variant,
                method=method,
                seed=seed,
                hv=hv,
                igd=igd_value,
                runtime_s=result.runtime_s,
                front_size=len(fronts[(method, seed)]),
            )
        )
        run_dir = variant_dir / f"{method}_seed{seed}"
        run_dir.mkdir(parents=True, exist_ok=True)
        front_payload = _front_payload(result)
        _write_json(run_dir / "front.json", front_payload)
        _write_json(run_dir / "trace.json", result.trace)
        reports, _failures = _diagnose_front(inst, front_payload, args.strategy, diag_cfg)
        _write_json(run_dir / "report.json", reports)
    return wall


def _cmd_bench(args):
    if args.variants == "all":
        variants = list(VARIANT_NAMES)
    else:
        variants = [resolve_variant_name(v) for v in args.variants.split(",") if v]
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    rows = []
    timings = []
    failed = []
    for variant in variants:
        try:
            wall = _bench_variant(variant, args, rows, outdir)
            timings.extend(
                (variant, method, seed, elapsed) for (method, seed), elapsed in sorted(wall.items())
            )
        except Exception as exc:  # noqa: BLE001 - keep the remaining variants running
            failed.append(variant)
            print(f"bench: variant {variant} failed: {exc}", file=sys.stderr)
    rows.sort(key=lambda r: (r.variant, r.method, r.seed))
    lines = [MetricReport.CSV_HEADER] + [row.csv_row() for row in rows]
    (outdir / "results.csv").write_text("\n".join(lines) + "\n")
    if args.timings_out:
        timing_lines = ["variant,method,seed,wall_s"] + [
            f"{v},{m},{s},{w:.3f}" for v, m, s, w in timings
        ]
        Path(args.timings_out).write_text("\n".join(timing_lines) + "\n")
    print(f"bench: wrote {len(rows)} rows to {outdir / 'results.csv'}")
    if failed:
        print(f"bench: {len(failed)} variant(s) failed: {', '.join(failed)}", file=sys.stderr)
        return 1
    return 0


def _aggregate_rows(rows):
    groups = {}
    for row in rows:
        groups.setdefault((row.variant, row.method), []).append(row)
    out = []
    for (variant, method), members in sorted(groups.items()):
        def stats(values):
            mean = sum(values) / len(values)
            var = sum((v - mean) ** 2 for v in values) / len(values)
            return mean, math.sqrt(var)

        hv_mean, hv_std = stats([m.hv for m in members])
        igd_mean, igd_std = stats([m.igd for m in members])
        rt_mean, rt_std = stats([m.runtime_s for m in members])
        out.append(
            {
                "variant": variant, "method": method, "runs": len(members),
                "hv_mean": hv_mean, "hv_std": hv_std,
                "igd_mean": igd_mean, "igd_std": igd_std,
                "runtime_s_mean": rt_mean, "runtime_s_std": rt_std,
            }
        )
    return out


def _cmd_report(args):
    text = Path(args.results).read_text().strip().splitlines()
    if not text or text[0] != MetricReport.CSV_HEADER:
        print(
            f"results file must start with header {MetricReport.CSV_HEADER!r}",
            file=sys.stderr,
        )
        return 2
    rows = [MetricReport.from_csv_row(line) for line in text[1:] if line]
    aggregated = _aggregate_rows(rows)
    if args.format == "csv":
        lines = [
            "# std uses the population (n) denominator",
            "variant,method,runs,hv_mean,hv_std,igd_mean,igd_std,runtime_s_mean,runtime_s_std",
        ]
        for a in aggregated:
            lines.append(
                f"{a['variant']},{a['method']},{a['runs']},"
                f"{a['hv_mean']!r},{a['hv_std']!r},{a['igd_mean']!r},{a['igd_std']!r},"
                f"{a['runtime_s_mean']!r},{a['runtime_s_std']!r}"
            )
        output = "\n".join(lines) + "\n"
    else:
        best_hv = {}
        best_igd = {}
        for a in aggregated:
            v = a["variant"]
            if v not in best_hv or a["hv_mean"] > best_hv[v]:
                best_hv[v] = a["hv_mean"]
            if v not in best_igd or a["igd_mean"] < best_igd[v]:
                best_igd[v] = a["igd_mean"]
        lines = [
            "| variant | method | runs | hv mean | hv std | igd mean | igd std | runtime_s mean |",
            "| --- | --- | --- | --- | --- | --- | --- | --- |",
        ]
        for a in aggregated:
            hv_cell = f"{a['hv_mean']:.4f}"
            if a["hv_mean"] == best_hv[a["variant"]]:
                hv_cell = f"**{hv_cell}**"
            igd_cell = f"{a['igd_mean']:.4f}"
            if a["igd_mean"] == best_igd[a["variant"]]:
                igd_cell = f"**{igd_cell}**"
            lines.append(
                f"| {a['variant']} | {a['method']} | {a['runs']} | {hv_cell} | "
                f"{a['hv_std']:.4f} | {igd_cell} | {a['igd_std']:.4f} | "
                f"{a['runtime_s_mean']:.3f} |"
            )
        lines.append("")
        lines.append("std uses the population (n) denominator.")
        output = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(output)
    else:
        print(output, end="")
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def build_parser():
    parser = argparse.ArgumentParser(
        prog="routefix",
        description="Trade-off search and constraint diagnosis for infeasible routing models.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    subparsers = {}

    p = sub.add_parser("gen", help="generate a variant instance file")
    p.add_argument("--base", default=None, help="Solomon-format base file (default: bundled)")
    p.add_argument("--n", type=int, default=25, help="number of customers")
    p.add_argument("--variant", required=True, help="variant name from the catalog")
    p.add_argument("--params", default=None, help="JSON parameter overrides")
    p.add_argument("--out", default="instance.json")
    p.set_defaults(func=_cmd_gen)
    subparsers["gen"] = p

    p = sub.add_parser("solve", help="run a solver on an instance file")
    p.add_argument("--instance", required=True)
    p.add_argument("--mode", choices=("moid", "baseline"), default="moid")
    p.add_argument("--iters", type=int, default=100)
    p.add_argument("--pop", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="out", help="output directory for front.json and trace.json")
    p.set_defaults(func=_cmd_solve)
    subparsers["solve"] = p

    p = sub.add_parser("diagnose", help="diagnose every solution of a front file")
    p.add_argument("--instance", required=True)
    p.add_argument("--front", required=True)
    p.add_argument("--strategy", choices=("dcr", "ecp"), required=True)
    p.add_argument("--norm-p", type=float, default=1.0, dest="norm_p")
    p.add_argument("--whitelist", default=None, help="JSON {family: [parameter, ...]} overrides")
    p.add_argument("--out", default="report.json")
    p.set_defaults(func=_cmd_diagnose)
    subparsers["diagnose"] = p

    p = sub.add_parser("bench", help="run both methods over variants and score them")
    p.add_argument("--variants", default="all", help="'all' or comma-separated names")
    p.add_argument("--runs", type=int, default=1, help="seeds per variant (seed, seed+1, ...)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n", type=int, default=25)
    p.add_argument("--iters", type=int, default=100)
    p.add_argument("--pop", type=int, default=10)
    p.add_argument("--strategy", choices=("dcr", "ecp"), default="dcr")
    p.add_argument("--norm-p", type=float, default=1.0, dest="norm_p")
    p.add_argument("--whitelist", default=None)
    p.add_argument("--out", default="bench_out")
    p.add_argument(
        "--timings-out",
        default=None,
        help="optional wall-clock sidecar CSV (not covered by the determinism contract)",
    )
    p.set_defaults(func=_cmd_bench)
    subparsers["bench"] = p

    p = sub.add_parser("report", help="aggregate a results.csv into a table")
    p.add_argument("--results", required=True)
    p.add_argument("--format", choices=("csv", "md"), default="csv")
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_report)
    subparsers["report"] = p

    for sp in subparsers.values():
        sp.add_argument("--config", default=None, help="JSON file overriding any flag")
    return parser, subparsers


def _apply_config(argv, parser, subparsers):
    if "--config" not in argv:
        return
    path = argv[argv.index("--config") + 1]
    overrides = json.loads(Path(path).read_text())
    for sp in subparsers.values():
        known = {action.dest for action in sp._actions}
        sp.set_defaults(**{k: v for k, v in overrides.items() if k in known})


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser, subparsers = build_parser()
    try:
        _apply_config(argv, parser, subparsers)
    except (OSError, json.JSONDecodeError, IndexError) as exc:
        print(f"bad --config: {exc}", file=sys.stderr)
        return 2
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (SolomonFormatError, InstanceError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (EvaluationError, DiagnosisError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
