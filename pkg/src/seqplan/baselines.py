"""Homogeneous-strategy planners used as comparison points.

``plan_static`` models the conventional setup: one fixed group degree, with
sequences packed by Best-Fit-Decreasing up to the group token capacity and
packs dispatched round-robin into waves of gradient accumulation.
``plan_batch_ada`` picks the cheapest feasible degree per batch. Both share
the planner's cost arithmetic so comparisons against the heterogeneous
planner are apples-to-apples.
"""

from __future__ import annotations

import math
from typing import Sequence

from .cost_model import counts_comm_time, counts_comp_time, counts_memory
from .domain import (
    BucketSet,
    ClusterSpec,
    CostCoefficients,
    GroupDispatch,
    InfeasibleError,
    MicroBatchPlan,
    Plan,
    SequenceBatch,
    ValidationError,
    build_virtual_catalog,
)

REEVAL_RTOL = 1e-9


def bfd_pack(lengths: Sequence[int], capacity: int) -> list[list[int]]:
    """Best-Fit-Decreasing packing; returns lists of original indices.

    Each sequence goes to the fullest open pack that still fits (ties to the
    oldest pack), else opens a new pack. Requires every length <= capacity.
    """
    order = sorted(range(len(lengths)), key=lambda k: (-lengths[k], k))
    if order and lengths[order[0]] > capacity:
        raise InfeasibleError(
            f"sequence of {lengths[order[0]]} tokens exceeds the pack capacity {capacity}",
            family="memory",
        )
    totals: list[int] = []
    packs: list[list[int]] = []
    for k in order:
        s = lengths[k]
        best = -1
        for i, t in enumerate(totals):
            if t + s <= capacity and (best == -1 or t > totals[best]):
                best = i
        if best == -1:
            packs.append([k])
            totals.append(s)
        else:
            packs[best].append(k)
            totals[best] += s
    return packs


def _wave_plan(wave_packs: list[list[int]], lengths: Sequence[int], degree: int,
               slot_ids: Sequence[int], bandwidth: float, cluster: ClusterSpec,
               coeffs: CostCoefficients, num_slots: int) -> MicroBatchPlan:
    """One accumulation wave: each pack runs on its own degree-``degree`` group."""
    limit_set = sorted({lengths[k] for pack in wave_packs for k in pack})
    limit_pos = {s: q for q, s in enumerate(limit_set)}
    members: list[list[int]] = [[] for _ in limit_set]
    for pack in wave_packs:
        for k in pack:
            members[limit_pos[lengths[k]]].append(k)
    for row in members:
        row.sort()
    buckets = BucketSet(
        upper_limits=tuple(limit_set),
        counts=tuple(len(r) for r in members),
        member_indices=tuple(tuple(r) for r in members),
        total_error=0,
    )

    selection = [0] * num_slots
    assignment = [[0] * num_slots for _ in limit_set]
    groups = []
    warnings: list[str] = []
    makespan = 0.0
    for slot_id, pack in zip(slot_ids, wave_packs):
        selection[slot_id] = 1
        col = [0] * len(limit_set)
        for k in pack:
            q = limit_pos[lengths[k]]
            assignment[q][slot_id] += 1
            col[q] += 1
        comp = counts_comp_time(limit_set, col, degree, coeffs)
        comm = counts_comm_time(limit_set, col, degree, bandwidth, coeffs)
        mem = counts_memory(limit_set, col, degree, coeffs)
        if mem > cluster.memory_budget * (1 + REEVAL_RTOL):
            warnings.append(f"slot {slot_id}: memory {mem:.6g} exceeds budget")
        t = comp + comm + coeffs.zero_overhead
        if t > makespan:
            makespan = t
        ordered = sorted(pack, key=lambda k: (-lengths[k], k))
        groups.append(GroupDispatch(
            slot_id=slot_id,
            degree=degree,
            sequence_indices=tuple(ordered),
            comp_time=comp,
            comm_time=comm,
            memory_bytes=mem,
            true_memory_bytes=mem,
        ))

    return MicroBatchPlan(
        selected_groups=tuple(groups),
        group_selection=tuple(selection),
        assignment=tuple(tuple(r) for r in assignment),
        buckets=buckets,
        predicted_makespan=makespan,
        plan_warnings=tuple(warnings),
    )


def plan_static(batch: SequenceBatch, cluster: ClusterSpec, coeffs: CostCoefficients,
                degree: int, capacity_override: int | None = None) -> Plan:
    """Fixed-degree plan: BFD packing, round-robin dispatch, as many waves as needed."""
    n = cluster.total_devices
    if degree < 1 or n % degree != 0 or (degree & (degree - 1)) != 0:
        raise ValidationError(f"degree must be a power of two dividing {n}, got {degree}")
    if cluster.memory_budget <= coeffs.m_ms:
        raise InfeasibleError("model states alone exceed the device memory budget", family="memory")

    if capacity_override is not None:
        capacity = capacity_override
    elif coeffs.m_token == 0:
        capacity = batch.total_tokens  # unbounded: one pack can hold everything
    else:
        per_device = int(math.floor((cluster.memory_budget - coeffs.m_ms) / coeffs.m_token))
        if per_device <= 0:
            raise InfeasibleError("per-device token capacity is zero", family="memory")
        capacity = degree * per_device

    packs = bfd_pack(batch.lengths, capacity)
    packs.sort(key=lambda pack: (-sum(batch.lengths[k] for k in pack), pack[0]))

    groups_per_wave = n // degree
    catalog = build_virtual_catalog(cluster)
    degree_slots = [s.slot_id for s in catalog.slots if s.degree == degree]
    bandwidth = next(s.bandwidth for s in catalog.slots if s.degree == degree)

    waves = []
    total = 0.0
    for w in range(0, len(packs), groups_per_wave):
        wave_packs = packs[w : w + groups_per_wave]
        mb = _wave_plan(wave_packs, batch.lengths, degree, degree_slots, bandwidth,
                        cluster, coeffs, catalog.size)
        waves.append(mb)
        total += mb.predicted_makespan

    return Plan(
        micro_batches=tuple(waves),
        predicted_total_time=total,
        strategy="static",
        batch_id=batch.batch_id,
    )


def feasible_degrees(batch: SequenceBatch, cluster: ClusterSpec, coeffs: CostCoefficients,
                     capacity_override: int | None = None) -> list[int]:
    """Power-of-two degrees whose pack capacity admits the longest sequence."""
    out = []
    longest = max(batch.lengths)
    d = 1
    while d <= cluster.total_devices:
        if capacity_override is not None:
            cap = capacity_override
        elif coeffs.m_token == 0:
            cap = longest
        else:
            per_device = int(math.floor((cluster.memory_budget - coeffs.m_ms) / coeffs.m_token))
            cap = d * per_device
        if cap >= longest:
            out.append(d)
        d *= 2
    return out


def plan_batch_ada(batch: SequenceBatch, cluster: ClusterSpec, coeffs: CostCoefficients,
                   capacity_override: int | None = None) -> Plan:
    """Cheapest homogeneous degree for this batch (the per-batch-adaptive baseline)."""
    best: Plan | None = None
    best_degree = 0
    for d in feasible_degrees(batch, cluster, coeffs, capacity_override):
        try:
            plan = plan_static(batch, cluster, coeffs, d, capacity_override)
        except InfeasibleError:
            continue
        if best is None or plan.predicted_total_time < best.predicted_total_time:
            best = plan
            best_degree = d
    if best is None:
        raise InfeasibleError(
            f"no homogeneous degree can hold the longest sequence ({max(batch.lengths)} tokens)",
            family="memory",
        )
    return Plan(
        micro_batches=best.micro_batches,
        predicted_total_time=best.predicted_total_time,
        strategy="batch_ada",
        batch_id=batch.batch_id,
    )
