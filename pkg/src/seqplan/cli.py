"""Command-line surface.

Exit codes: 0 success, 2 infeasible, 3 input/format error; every failure
prints a single machine-parsable line on stderr.
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

from . import __version__
from .cost_model import UnderdeterminedError, fit_coefficients, read_profile_csv
from .bucketing import bucket_bruteforce, bucket_dp, bucket_naive, relative_token_error
from .domain import InfeasibleError, SeqplanError, ValidationError
from .formats import (
    read_cluster,
    read_coeffs,
    read_lengths,
    read_plan_dict,
    write_json,
    write_lengths,
    write_plan,
)
from .simulator import (
    SimConfig,
    gen_longtail,
    length_summary,
    parse_distribution,
    run_sim,
    write_histogram_svg,
)
from .workflow import SolveConfig, SolveDiagnostics, solve_batch

EXIT_OK = 0
EXIT_INFEASIBLE = 2
EXIT_INPUT = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ValidationError(message)


def _solve_config(args) -> SolveConfig:
    return SolveConfig(
        bucket_count=args.q,
        trials=args.trials,
        jobs=args.jobs,
        strict_device_equality=getattr(args, "strict_devices", False),
        time_limit=getattr(args, "time_limit", None),
    )


def _cmd_plan(args) -> int:
    batch = read_lengths(args.lengths, max_context=args.max_len)[0]
    cluster = read_cluster(args.cluster)
    coeffs = read_coeffs(args.coeffs)
    config = _solve_config(args)
    diag = SolveDiagnostics()
    plan = solve_batch(batch, cluster, coeffs, config,
                       diagnostics=diag, keep_instances=args.dump_milp)
    write_plan(args.out, plan)
    if args.dump_milp:
        dump_path = Path(args.out).with_suffix(".milp.json")
        write_json(dump_path, {
            "micro_batches": [
                {"micro_batch": i, "instance": inst, "solution": sol}
                for _, i, inst, sol in diag.instances
            ],
        })
    print(f"planned {batch.size} sequences into {len(plan.micro_batches)} micro-batch(es); "
          f"predicted {plan.predicted_total_time:.6g} s (solve {diag.wall_time:.2f} s, "
          f"{diag.milp_calls} MILP call(s))")
    return EXIT_OK


def _cmd_simulate(args) -> int:
    if args.batches.startswith("gen:"):
        spec = args.batches[4:]
        fields = spec.split(":")
        dist = parse_distribution(fields[0] + ":" + fields[1]) if len(fields) >= 2 else None
        if dist is None:
            raise ValidationError(f"bad gen spec {args.batches!r}")
        opts = {}
        for extra in fields[2:]:
            key, _, value = extra.partition("=")
            opts[key] = value
        count = int(opts.get("count", 64))
        max_len = int(opts.get("max_len", 131072))
        seed = int(opts.get("seed", args.seed))
        total = args.warmup + args.iters
        batches = gen_longtail(count, dist, max_len, seed, batches=total)
    else:
        batches = read_lengths(args.batches)
        total = args.warmup + args.iters
        if len(batches) < total:
            raise ValidationError(
                f"need {total} batches (warmup {args.warmup} + iters {args.iters}), file has {len(batches)}"
            )
        batches = batches[:total]

    cluster = read_cluster(args.cluster)
    coeffs = read_coeffs(args.coeffs)
    strategies = [s.strip() for s in args.strategies.split(",") if s.strip()]
    if not strategies:
        raise ValidationError("no strategies given")
    config = SimConfig(
        warmup=args.warmup,
        charge_solve_time=args.charge_solve_time,
        solve=_solve_config(args),
        capacity_override=args.context_window,
    )
    report = run_sim(batches, cluster, coeffs, strategies, config)
    report.to_csv(args.out)
    if args.degree_hist:
        report.degree_lengths_csv(args.degree_hist)
    if args.metrics:
        report.metrics_csv(args.metrics)
    if args.svg:
        write_histogram_svg(args.svg, report.degree_lengths)
    for strategy, ratio in sorted(report.speedups.items()):
        print(f"speedup flexsp vs {strategy}: {ratio:.4f}")
    print(f"wrote {len(report.rows)} rows to {args.out}")
    return EXIT_OK


def _cmd_fit(args) -> int:
    records = read_profile_csv(args.profile)
    result = fit_coefficients(records, allow_underdetermined=args.allow_underdetermined)
    write_json(args.out, result.coefficients.to_json_dict())
    print(f"fitted {len(records)} records: max_rel_err {result.max_rel_error:.6g} "
          f"(comp {result.comp_rel_error:.6g}, comm {result.comm_rel_error:.6g}, "
          f"mem {result.mem_rel_error:.6g})")
    if result.clamped:
        print(f"clamped to zero: {', '.join(result.clamped)}")
    for w in result.warnings:
        print(f"warning: {w}")
    return EXIT_OK


def _cmd_gen(args) -> int:
    dist = parse_distribution(args.dist)
    batches = gen_longtail(args.count, dist, args.max_len, args.seed, batches=args.batches)
    write_lengths(args.out, batches)
    summary = length_summary(batches)
    print(f"wrote {args.batches} batch(es) x {args.count} lengths to {args.out}; "
          f"{summary['frac_below_8k']:.1%} below 8K, {summary['frac_above_32k']:.1%} above 32K, "
          f"max {summary['max']}")
    return EXIT_OK


def _cmd_bucket(args) -> int:
    batch = read_lengths(args.lengths)[0]
    method = {"dp": bucket_dp, "naive": bucket_naive, "brute": bucket_bruteforce}[args.method]
    buckets = method(batch.lengths, args.q)
    data = buckets.to_json_dict()
    data["method"] = args.method
    data["relative_error"] = relative_token_error(buckets, batch.lengths)
    write_json(args.out, data)
    print(f"{args.method}: {buckets.num_buckets} bucket(s), total_error {buckets.total_error}, "
          f"relative {data['relative_error']:.4%}")
    return EXIT_OK


def _cmd_compare(args) -> int:
    plan_dir = Path(args.plans)
    files = sorted(p for p in plan_dir.glob("*.json") if not p.name.endswith(".milp.json"))
    if not files:
        raise ValidationError(f"no plan JSON files under {plan_dir}")
    entries = []
    for path in files:
        data = read_plan_dict(path)
        degs_per_mb = []
        for mb in data["micro_batches"]:
            degs_per_mb.append(sorted((g["degree"] for g in mb["selected_groups"]), reverse=True))
        entries.append({
            "file": path.name,
            "batch_id": data.get("batch_id", ""),
            "strategy": data.get("strategy", ""),
            "predicted_total_time_s": float(data["predicted_total_time"]),
            "micro_batch_count": len(data["micro_batches"]),
            "groups": _summary_from_degrees(degs_per_mb),
        })
    flex_by_batch = {
        e["batch_id"]: e["predicted_total_time_s"] for e in entries if e["strategy"] == "flexsp"
    }
    entries.sort(key=lambda e: (e["batch_id"], e["strategy"], e["file"]))
    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["batch_id", "strategy", "predicted_total_time_s",
                        "micro_batch_count", "groups", "speedup_vs_flexsp", "file"])
        for e in entries:
            flex = flex_by_batch.get(e["batch_id"])
            ratio = "" if flex is None else repr(e["predicted_total_time_s"] / flex)
            writer.writerow([e["batch_id"], e["strategy"], repr(e["predicted_total_time_s"]),
                            e["micro_batch_count"], e["groups"], ratio, e["file"]])
    print(f"compared {len(entries)} plan(s) into {args.out}")
    return EXIT_OK


def _summary_from_degrees(degs_per_mb) -> str:
    parts = []
    for degs in degs_per_mb:
        items = []
        i = 0
        while i < len(degs):
            j = i
            while j < len(degs) and degs[j] == degs[i]:
                j += 1
            items.append(f"{degs[i]}×{j - i}" if j - i > 1 else f"{degs[i]}")
            i = j
        parts.append("⟨" + ",".join(items) + "⟩")
    out = []
    i = 0
    while i < len(parts):
        j = i
        while j < len(parts) and parts[j] == parts[i]:
            j += 1
        out.append(parts[i] + (f"×{j - i}" if j - i > 1 else ""))
        i = j
    return "".join(out)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="seqplan", description=__doc__)
    parser.add_argument("--version", action="version", version=f"seqplan {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_solver_args(p, include_strict=True):
        p.add_argument("--q", type=int, default=16, help="bucket budget per micro-batch")
        p.add_argument("--trials", type=int, default=5, help="micro-batch counts to explore")
        p.add_argument("--jobs", type=int, default=1, help="worker threads for the solver")
        p.add_argument("--time-limit", type=float, default=None, help="per-MILP time limit (s)")
        if include_strict:
            p.add_argument("--strict-devices", action="store_true",
                           help="require selected degrees to sum to exactly N")

    p = sub.add_parser("plan", help="plan one batch of sequence lengths")
    p.add_argument("--lengths", required=True)
    p.add_argument("--cluster", required=True)
    p.add_argument("--coeffs", required=True)
    p.add_argument("--max-len", type=int, default=None, help="reject longer sequences at ingestion")
    add_solver_args(p)
    p.add_argument("--dump-milp", action="store_true", help="dump instances/solutions next to --out")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_plan)

    p = sub.add_parser("simulate", help="replay batches under several strategies")
    p.add_argument("--batches", required=True, help="lengths file or gen:<dist>:<params>[:k=v...]")
    p.add_argument("--cluster", required=True)
    p.add_argument("--coeffs", required=True)
    p.add_argument("--strategies", required=True, help="comma list: flexsp,static:D,batch_ada")
    p.add_argument("--warmup", type=int, default=10)
    p.add_argument("--iters", type=int, default=40)
    p.add_argument("--seed", type=int, default=0)
    add_solver_args(p, include_strict=False)
    p.add_argument("--context-window", type=int, default=None,
                   help="fixed pack capacity override for the homogeneous baselines")
    p.add_argument("--charge-solve-time", action="store_true",
                   help="add amortized solver wall time to predicted iteration times")
    p.add_argument("--degree-hist", default=None, help="write per-degree length CSV here")
    p.add_argument("--metrics", default=None, help="write solver wall-time/node CSV here")
    p.add_argument("--svg", default=None, help="write assigned-length histograms here")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("fit", help="fit cost coefficients from a profile CSV")
    p.add_argument("--profile", required=True)
    p.add_argument("--allow-underdetermined", action="store_true",
                   help="accept minimum-norm fits for rank-deficient profiles")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_fit)

    p = sub.add_parser("gen", help="generate synthetic long-tail length batches")
    p.add_argument("--dist", required=True, help="lognormal:mu,sigma or pareto:alpha,floor")
    p.add_argument("--count", type=int, required=True, help="sequences per batch")
    p.add_argument("--batches", type=int, default=1)
    p.add_argument("--max-len", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_gen)

    p = sub.add_parser("bucket", help="bucket one batch of lengths")
    p.add_argument("--lengths", required=True)
    p.add_argument("--q", type=int, default=16)
    p.add_argument("--method", choices=["dp", "naive", "brute"], default="dp")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_bucket)

    p = sub.add_parser("compare", help="summarize a directory of plan JSON files")
    p.add_argument("--plans", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_compare)

    return parser


def cli_main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except InfeasibleError as exc:
        print(f"seqplan: infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (ValidationError, UnderdeterminedError) as exc:
        print(f"seqplan: input-error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"seqplan: input-error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except SeqplanError as exc:
        print(f"seqplan: error: {exc}", file=sys.stderr)
        return EXIT_INPUT


def main():
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
