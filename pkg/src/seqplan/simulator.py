"""Multi-iteration replay of batches under every planning strategy.

Produces per-iteration predicted times with a compute/communication
breakdown taken along each micro-batch's critical group, aggregate speedups
after a warm-up window, and the per-degree assigned-length distribution for
violin-style plots. Everything is driven by a single seed, so reports are
byte-reproducible.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .baselines import plan_batch_ada, plan_static
from .domain import ClusterSpec, CostCoefficients, Plan, SequenceBatch, ValidationError
from .workflow import SolveConfig, SolveDiagnostics, solve_batch

REPORT_COLUMNS = [
    "iteration", "strategy", "predicted_time_s", "comm_time_s", "comp_time_s",
    "micro_batch_count", "groups",
]


def parse_distribution(spec: str) -> tuple:
    """Parse ``lognormal:mu,sigma`` or ``pareto:alpha,floor``."""
    try:
        name, params = spec.split(":", 1)
        values = [float(v) for v in params.split(",")]
    except ValueError:
        raise ValidationError(f"bad distribution spec {spec!r}") from None
    if name == "lognormal" and len(values) == 2:
        return ("lognormal", values[0], values[1])
    if name == "pareto" and len(values) == 2:
        return ("pareto", values[0], values[1])
    raise ValidationError(f"bad distribution spec {spec!r} (expected lognormal:mu,sigma or pareto:alpha,floor)")


def gen_longtail(count: int, distribution, max_len: int, seed: int,
                 batches: int = 1) -> list[SequenceBatch]:
    """Reproducible long-tail batches: ``batches`` batches of ``count`` lengths."""
    if isinstance(distribution, str):
        distribution = parse_distribution(distribution)
    name = distribution[0]
    rng = np.random.default_rng(seed)
    out = []
    for b in range(batches):
        if name == "lognormal":
            raw = rng.lognormal(mean=distribution[1], sigma=distribution[2], size=count)
        elif name == "pareto":
            alpha, floor = distribution[1], distribution[2]
            raw = floor * (1.0 + rng.pareto(alpha, size=count))
        else:
            raise ValidationError(f"unknown distribution {name!r}")
        lengths = np.clip(np.rint(raw), 1, max_len).astype(int)
        out.append(SequenceBatch(lengths.tolist(), batch_id=f"gen-{seed}-{b:04d}"))
    return out


def length_summary(batches: Sequence[SequenceBatch]) -> dict:
    """Shape summary of a length sample (long-tail sanity check)."""
    all_lengths = [s for b in batches for s in b.lengths]
    n = len(all_lengths)
    return {
        "count": n,
        "mean": sum(all_lengths) / n,
        "max": max(all_lengths),
        "frac_below_8k": sum(1 for s in all_lengths if s < 8192) / n,
        "frac_above_32k": sum(1 for s in all_lengths if s > 32768) / n,
    }


def group_summary(plan: Plan) -> str:
    """Angle-bracket notation: one group set per micro-batch, repeats collapsed.

    Each degree appears as ``d`` or ``d×m``; identical consecutive
    micro-batches collapse to ``⟨…⟩×x``.
    """
    parts = []
    for mb in plan.micro_batches:
        degs = mb.degree_multiset()
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


def _critical_breakdown(plan: Plan) -> tuple[float, float, float]:
    """(comp, comm, overheads) summed along each micro-batch's slowest group."""
    comp_sum = 0.0
    comm_sum = 0.0
    overhead = 0.0
    for mb in plan.micro_batches:
        crit = None
        crit_t = -1.0
        for g in mb.selected_groups:
            t = g.comp_time + g.comm_time
            if t > crit_t:
                crit = g
                crit_t = t
        comp_sum += crit.comp_time
        comm_sum += crit.comm_time
        overhead += mb.predicted_makespan - (crit.comp_time + crit.comm_time)
    return comp_sum, comm_sum, overhead


@dataclass(frozen=True)
class SimRow:
    iteration: int
    strategy: str
    predicted_time: float
    comm_time: float
    comp_time: float
    overheads: float
    micro_batch_count: int
    groups: str


@dataclass
class SimReport:
    rows: list[SimRow] = field(default_factory=list)
    speedups: dict = field(default_factory=dict)  # strategy label -> mean ratio vs flexsp
    degree_lengths: list = field(default_factory=list)  # (strategy, degree, length)
    warmup: int = 0
    solve_metrics: list = field(default_factory=list)  # (iteration, wall_time, milp_calls, nodes)

    def to_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(REPORT_COLUMNS)
            for r in self.rows:
                writer.writerow([
                    r.iteration, r.strategy, repr(r.predicted_time), repr(r.comm_time),
                    repr(r.comp_time), r.micro_batch_count, r.groups,
                ])

    def degree_lengths_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["strategy", "degree", "length"])
            for strategy, degree, length in self.degree_lengths:
                writer.writerow([strategy, degree, length])

    def metrics_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["iteration", "solve_wall_s", "milp_calls", "bb_nodes"])
            for row in self.solve_metrics:
                writer.writerow(row)


@dataclass(frozen=True)
class SimConfig:
    warmup: int = 10
    charge_solve_time: bool = False
    solve: SolveConfig = field(default_factory=SolveConfig)
    capacity_override: int | None = None


def _plan_for(strategy: str, batch: SequenceBatch, cluster: ClusterSpec,
              coeffs: CostCoefficients, config: SimConfig) -> tuple[Plan, SolveDiagnostics | None]:
    if strategy == "flexsp":
        diag = SolveDiagnostics()
        plan = solve_batch(batch, cluster, coeffs, config.solve, diagnostics=diag)
        return plan, diag
    if strategy == "batch_ada":
        return plan_batch_ada(batch, cluster, coeffs, config.capacity_override), None
    if strategy.startswith("static:"):
        degree = int(strategy.split(":", 1)[1])
        return plan_static(batch, cluster, coeffs, degree, config.capacity_override), None
    raise ValidationError(f"unknown strategy {strategy!r} (expected flexsp, batch_ada or static:D)")


def run_sim(batches: Sequence[SequenceBatch], cluster: ClusterSpec, coeffs: CostCoefficients,
            strategies: Sequence[str], config: SimConfig | None = None) -> SimReport:
    """Plan every batch under every strategy and assemble the comparison report."""
    config = config or SimConfig()
    report = SimReport(warmup=config.warmup)
    nodes = max(1, cluster.total_devices // cluster.devices_per_node)
    totals: dict[str, list[float]] = {s: [] for s in strategies}

    for it, batch in enumerate(batches):
        for strategy in strategies:
            plan, diag = _plan_for(strategy, batch, cluster, coeffs, config)
            comp, comm, overhead = _critical_breakdown(plan)
            predicted = plan.predicted_total_time
            if diag is not None:
                report.solve_metrics.append((it, diag.wall_time, diag.milp_calls, diag.node_count))
                if config.charge_solve_time:
                    amortized = diag.wall_time / nodes
                    predicted += amortized
                    overhead += amortized
            row = SimRow(
                iteration=it,
                strategy=strategy,
                predicted_time=predicted,
                comm_time=comm,
                comp_time=comp,
                overheads=overhead,
                micro_batch_count=len(plan.micro_batches),
                groups=group_summary(plan),
            )
            report.rows.append(row)
            if it >= config.warmup:
                totals[strategy].append(predicted)
            for mb in plan.micro_batches:
                for g in mb.selected_groups:
                    for k in g.sequence_indices:
                        report.degree_lengths.append((strategy, g.degree, batch.lengths[k]))

    if "flexsp" in strategies and totals["flexsp"]:
        flex_mean = sum(totals["flexsp"]) / len(totals["flexsp"])
        for strategy in strategies:
            if strategy == "flexsp" or not totals[strategy]:
                continue
            other_mean = sum(totals[strategy]) / len(totals[strategy])
            report.speedups[strategy] = other_mean / flex_mean
    return report


def write_histogram_svg(path, degree_lengths: Sequence[tuple], strategy: str = "flexsp",
                        bins: int = 24, width: int = 640, height: int = 160):
    """Minimal SVG histograms of assigned sequence lengths, one band per degree."""
    by_degree: dict[int, list[int]] = {}
    for strat, degree, length in degree_lengths:
        if strat == strategy:
            by_degree.setdefault(degree, []).append(length)
    if not by_degree:
        raise ValidationError(f"no assignments recorded for strategy {strategy!r}")
    max_len = max(max(v) for v in by_degree.values())
    rows = []
    band_h = height
    total_h = band_h * len(by_degree)
    rows.append(f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{total_h}">')
    for band, degree in enumerate(sorted(by_degree)):
        values = by_degree[degree]
        counts = [0] * bins
        for v in values:
            b = min(bins - 1, int(v * bins / (max_len + 1)))
            counts[b] += 1
        peak = max(counts)
        y0 = band * band_h
        rows.append(f'<text x="4" y="{y0 + 14}" font-size="12">degree {degree} '
                    f'(n={len(values)})</text>')
        bar_w = (width - 20) / bins
        for i, cnt in enumerate(counts):
            if cnt == 0:
                continue
            h = (band_h - 24) * cnt / peak
            x = 10 + i * bar_w
            y = y0 + band_h - 4 - h
            rows.append(f'<rect x="{x:.1f}" y="{y:.1f}" width="{bar_w * 0.9:.1f}" '
                        f'height="{h:.1f}" fill="#4878a8"/>')
    rows.append("</svg>")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(rows) + "\n")
