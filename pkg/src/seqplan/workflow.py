"""End-to-end planning of a global batch.

For each candidate micro-batch count M in a small window above the memory
minimum: chunk the batch, bucket every micro-batch, and price each one with
the group planner; the window's cheapest total wins. Trials and micro-batch
solves are independent pure computations, so they fan out over a worker pool
and merge by index; the result is identical for any worker count.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

from .blaster import blast, min_microbatch_count
from .bucketing import bucket_dp
from .domain import (
    BucketSet,
    ClusterSpec,
    CostCoefficients,
    InfeasibleError,
    MicroBatchPlan,
    Plan,
    SequenceBatch,
    build_virtual_catalog,
)
from .planner import MilpInstance, MilpSolution, PlannerOptions, build_instance, extract_plan, solve


@dataclass(frozen=True)
class SolveConfig:
    bucket_count: int = 16
    trials: int = 5
    jobs: int = 1
    strict_device_equality: bool = False
    symmetry_breaking: bool = True
    time_limit: float | None = None
    max_degree: int | None = None
    capacity_override: int | None = None

    def planner_options(self) -> PlannerOptions:
        return PlannerOptions(
            strict_device_equality=self.strict_device_equality,
            symmetry_breaking=self.symmetry_breaking,
            time_limit=self.time_limit,
        )


@dataclass
class SolveDiagnostics:
    wall_time: float = 0.0
    milp_calls: int = 0
    node_count: int = 0
    trials_evaluated: tuple[int, ...] = ()
    chosen_micro_batches: int = 0
    instances: list = field(default_factory=list)  # (M, mb index, instance, solution)


def _run_tasks(tasks: Sequence[Callable], jobs: int) -> list:
    """Evaluate pure thunks, preserving task order regardless of scheduling."""
    if jobs <= 1 or len(tasks) <= 1:
        return [t() for t in tasks]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        futures = [pool.submit(t) for t in tasks]
        return [f.result() for f in futures]


def _remap_buckets(buckets: BucketSet, index_map: Sequence[int]) -> BucketSet:
    return BucketSet(
        upper_limits=buckets.upper_limits,
        counts=buckets.counts,
        member_indices=tuple(
            tuple(index_map[k] for k in members) for members in buckets.member_indices
        ),
        total_error=buckets.total_error,
    )


def solve_batch(batch: SequenceBatch, cluster: ClusterSpec, coeffs: CostCoefficients,
                config: SolveConfig | None = None,
                diagnostics: SolveDiagnostics | None = None,
                keep_instances: bool = False) -> Plan:
    """Plan one batch; raises InfeasibleError when no trial window works."""
    config = config or SolveConfig()
    start = time.perf_counter()
    catalog = build_virtual_catalog(cluster, config.max_degree)
    m_min = min_microbatch_count(batch, cluster, coeffs, config.capacity_override)

    evaluated: list[int] = []
    failure: MilpSolution | None = None
    best: tuple[float, int, list[tuple[MilpInstance, MilpSolution, tuple[int, ...]]]] | None = None
    milp_calls = 0
    node_count = 0

    def try_window(m_lo: int, m_hi: int):
        nonlocal failure, best, milp_calls, node_count
        trial_parts: list[tuple[int, list[tuple[MilpInstance, tuple[int, ...]]]]] = []
        for m in range(m_lo, m_hi):
            if m > batch.size:
                continue
            evaluated.append(m)
            split = blast(batch, m)
            parts = []
            for mb_indices in split.micro_batches:
                mb_lengths = [batch.lengths[k] for k in mb_indices]
                buckets = _remap_buckets(bucket_dp(mb_lengths, config.bucket_count), mb_indices)
                inst = build_instance(buckets, catalog, coeffs, cluster, config.planner_options())
                parts.append((inst, mb_indices))
            trial_parts.append((m, parts))

        flat = [inst for _, parts in trial_parts for inst, _ in parts]
        results = _run_tasks([lambda i=i: solve(i) for i in flat], config.jobs)
        milp_calls += len(flat)

        pos = 0
        for m, parts in trial_parts:
            solved = results[pos : pos + len(parts)]
            pos += len(parts)
            node_count += sum(s.node_count for s in solved)
            if any(s.status == "infeasible" for s in solved):
                if failure is None:
                    failure = next(s for s in solved if s.status == "infeasible")
                continue
            total = 0.0
            for s in solved:
                total += s.objective
            if best is None or (total, m) < (best[0], best[1]):
                best = (total, m, [(inst, sol, idx) for (inst, idx), sol in zip(parts, solved)])

    try_window(m_min, m_min + config.trials)
    if best is None:
        try_window(m_min + config.trials, m_min + 2 * config.trials)
    if best is None:
        longest = max(batch.lengths)
        d_max = max(catalog.degrees())
        budget = cluster.memory_budget - coeffs.m_ms
        cap = budget * d_max / coeffs.m_token if coeffs.m_token > 0 else float("inf")
        family = failure.infeasible_family if failure is not None else "memory"
        detail = f" ({failure.message})" if failure is not None else ""
        raise InfeasibleError(
            f"no feasible plan for micro-batch counts {evaluated or [m_min]}: "
            f"longest sequence is {longest} tokens, largest group (degree {d_max}) "
            f"holds at most {cap:.0f} tokens{detail}",
            family=family,
        )

    total, m_chosen, parts = best
    micro_batches: list[MicroBatchPlan] = []
    for inst, sol, _indices in parts:
        micro_batches.append(extract_plan(sol, inst, batch.lengths))

    if diagnostics is not None:
        diagnostics.wall_time = time.perf_counter() - start
        diagnostics.milp_calls = milp_calls
        diagnostics.node_count = node_count
        diagnostics.trials_evaluated = tuple(evaluated)
        diagnostics.chosen_micro_batches = m_chosen
        if keep_instances:
            diagnostics.instances = [
                (m_chosen, i, inst.to_json_dict(), sol.to_json_dict())
                for i, (inst, sol, _) in enumerate(parts)
            ]

    return Plan(
        micro_batches=tuple(micro_batches),
        predicted_total_time=total,
        strategy="flexsp",
        batch_id=batch.batch_id,
    )


def solve_stream(batches: Sequence[SequenceBatch], cluster: ClusterSpec, coeffs: CostCoefficients,
                 config: SolveConfig | None = None, parallelism: int = 1) -> list[Plan]:
    """Plan many batches; results come back in input order."""
    config = config or SolveConfig()
    tasks = [
        (lambda b=b: solve_batch(b, cluster, coeffs, config))
        for b in batches
    ]
    return _run_tasks(tasks, parallelism)
