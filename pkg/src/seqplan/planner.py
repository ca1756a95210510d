"""Group selection and bucket assignment for one micro-batch.

The decision problem: pick a subset of the virtual group slots (degrees
summing to at most the device count) and distribute every bucket's sequences
over the picked slots so that the slowest group finishes as early as
possible, subject to per-device memory. With bucket counts as integer
variables this is a small mixed-integer linear program; HiGHS (via scipy)
solves it exactly, and an exhaustive oracle plus an independent constraint
re-evaluation guard the implementation.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from itertools import product
from typing import Iterator, Sequence

import numpy as np
from scipy import sparse
from scipy.optimize import Bounds, LinearConstraint, milp

from .cost_model import counts_comm_time, counts_comp_time, counts_memory
from .domain import (
    BucketSet,
    ClusterSpec,
    CostCoefficients,
    GroupDispatch,
    MicroBatchPlan,
    SeqplanError,
    ValidationError,
    VirtualGroupCatalog,
)

BRUTEFORCE_MAX_SLOTS = 7
BRUTEFORCE_MAX_BUCKETS = 3
BRUTEFORCE_MAX_SEQUENCES = 6

REEVAL_RTOL = 1e-9


class SolverError(SeqplanError):
    """The engine returned something the re-evaluation rejects."""


@dataclass(frozen=True)
class PlannerOptions:
    strict_device_equality: bool = False
    symmetry_breaking: bool = True
    time_limit: float | None = None


@dataclass(frozen=True)
class MilpInstance:
    catalog: VirtualGroupCatalog
    buckets: BucketSet
    coeffs: CostCoefficients
    cluster: ClusterSpec
    options: PlannerOptions = field(default_factory=PlannerOptions)

    @property
    def num_slots(self) -> int:
        return self.catalog.size

    @property
    def num_buckets(self) -> int:
        return self.buckets.num_buckets

    def activation_budget(self) -> float:
        return self.cluster.memory_budget - self.coeffs.m_ms

    def time_coeff(self, q: int, p: int) -> float:
        s = self.buckets.upper_limits[q]
        slot = self.catalog.slots[p]
        comp = (self.coeffs.alpha1 * s * s + self.coeffs.alpha2 * s) / slot.degree
        comm = self.coeffs.alpha3 * s / (slot.degree * slot.bandwidth)
        return comp + comm

    def mem_coeff(self, q: int, p: int) -> float:
        return self.buckets.upper_limits[q] * self.coeffs.m_token / self.catalog.slots[p].degree

    def assignment_upper_bound(self, q: int, p: int) -> int:
        if self.mem_coeff(q, p) > self.activation_budget():
            return 0
        return self.buckets.counts[q]

    def slot_time(self, column: Sequence[int], p: int) -> float:
        """Exact re-evaluated execution time of slot ``p`` under ``column``."""
        slot = self.catalog.slots[p]
        comp = counts_comp_time(self.buckets.upper_limits, column, slot.degree, self.coeffs)
        comm = counts_comm_time(self.buckets.upper_limits, column, slot.degree, slot.bandwidth, self.coeffs)
        return comp + comm + self.coeffs.zero_overhead

    def slot_memory(self, column: Sequence[int], p: int) -> float:
        return counts_memory(self.buckets.upper_limits, column, self.catalog.slots[p].degree, self.coeffs)

    def degree_classes(self) -> list[list[int]]:
        classes: list[list[int]] = []
        for p, slot in enumerate(self.catalog.slots):
            if classes and self.catalog.slots[classes[-1][0]].degree == slot.degree:
                classes[-1].append(p)
            else:
                classes.append([p])
        return classes

    def to_json_dict(self) -> dict:
        rows = []
        np_, nq = self.num_slots, self.num_buckets
        beta = self.coeffs.startup_overhead
        for p in range(np_):
            terms = [f"{self.time_coeff(q, p):.9g}*A[{q},{p}]" for q in range(nq)]
            rows.append(f"time[p={p}]: " + " + ".join(terms) + f" + {beta:.9g}*m[{p}] - C <= 0")
        budget = self.activation_budget()
        for p in range(np_):
            terms = [f"{self.mem_coeff(q, p):.9g}*A[{q},{p}]" for q in range(nq)]
            rows.append(f"memory[p={p}]: " + " + ".join(terms) + f" - {budget:.9g}*m[{p}] <= 0")
        for q in range(nq):
            for p in range(np_):
                rows.append(f"link[q={q},p={p}]: A[{q},{p}] - {self.buckets.counts[q]}*m[{p}] <= 0")
        sense = "==" if self.options.strict_device_equality else "<="
        dev = " + ".join(f"{self.catalog.slots[p].degree}*m[{p}]" for p in range(np_))
        rows.append(f"devices: {dev} {sense} {self.cluster.total_devices}")
        for q in range(nq):
            cov = " + ".join(f"A[{q},{p}]" for p in range(np_))
            rows.append(f"coverage[q={q}]: {cov} == {self.buckets.counts[q]}")
        return {
            "num_slots": np_,
            "num_buckets": nq,
            "bucket_upper_limits": list(self.buckets.upper_limits),
            "bucket_counts": list(self.buckets.counts),
            "slot_degrees": list(self.catalog.degrees()),
            "objective": "minimize C",
            "constraints": rows,
        }


@dataclass(frozen=True)
class MilpSolution:
    selection: tuple[int, ...]
    assignment: tuple[tuple[int, ...], ...]  # buckets x slots
    objective: float
    status: str  # optimal | infeasible | time_limit_incumbent
    node_count: int = 0
    wall_time: float = 0.0
    infeasible_family: str = ""
    message: str = ""

    def to_json_dict(self) -> dict:
        return {
            "status": self.status,
            "objective": self.objective,
            "selection": list(self.selection),
            "assignment": [list(r) for r in self.assignment],
            "node_count": self.node_count,
            "infeasible_family": self.infeasible_family,
            "message": self.message,
        }


def build_instance(buckets: BucketSet, catalog: VirtualGroupCatalog, coeffs: CostCoefficients,
                   cluster: ClusterSpec, options: PlannerOptions | None = None) -> MilpInstance:
    """Assemble a planning instance; infeasibility surfaces at solve time."""
    return MilpInstance(
        catalog=catalog,
        buckets=buckets,
        coeffs=coeffs,
        cluster=cluster,
        options=options or PlannerOptions(),
    )


def _diagnose_infeasible(inst: MilpInstance) -> MilpSolution | None:
    """Cheap structural infeasibility checks with a named constraint family."""
    budget = inst.activation_budget()
    if budget <= 0:
        return _infeasible(inst, "memory", "model states alone exceed the device memory budget")
    d_max = max(inst.catalog.degrees())
    if inst.coeffs.m_token > 0:
        cap_largest = budget * d_max / inst.coeffs.m_token
        for q, limit in enumerate(inst.buckets.upper_limits):
            if all(inst.assignment_upper_bound(q, p) == 0 for p in range(inst.num_slots)):
                return _infeasible(
                    inst, "memory",
                    f"bucket limit {limit} tokens does not fit any group; "
                    f"largest group (degree {d_max}) holds at most {cap_largest:.0f} tokens",
                )
        mass = sum(b * s for b, s in zip(inst.buckets.counts, inst.buckets.upper_limits))
        if mass * inst.coeffs.m_token > inst.cluster.total_devices * budget:
            return _infeasible(
                inst, "memory",
                f"bucketed total of {mass} tokens exceeds the cluster activation capacity "
                f"({inst.cluster.total_devices * budget / inst.coeffs.m_token:.0f} tokens)",
            )
    return None


def _infeasible(inst: MilpInstance, family: str, message: str) -> MilpSolution:
    return MilpSolution(
        selection=tuple([0] * inst.num_slots),
        assignment=tuple(tuple([0] * inst.num_slots) for _ in range(inst.num_buckets)),
        objective=float("inf"),
        status="infeasible",
        infeasible_family=family,
        message=message,
    )


def _canonicalize(inst: MilpInstance, m: list[int], a: list[list[int]]):
    """Deterministic form: drop empty selections (unless the device budget is
    an equality) and order interchangeable same-degree slots by load."""
    np_, nq = inst.num_slots, inst.num_buckets
    if not inst.options.strict_device_equality:
        for p in range(np_):
            if m[p] == 1 and all(a[q][p] == 0 for q in range(nq)):
                m[p] = 0
    for cls in inst.degree_classes():
        entries = []
        for p in cls:
            col = tuple(a[q][p] for q in range(nq))
            tokens = sum(c * s for c, s in zip(col, inst.buckets.upper_limits))
            entries.append((-m[p], -tokens, tuple(-x for x in col)))
        entries.sort()
        for p, (neg_m, _, neg_col) in zip(cls, entries):
            m[p] = -neg_m
            for q in range(nq):
                a[q][p] = -neg_col[q]


def _reevaluate(inst: MilpInstance, m: Sequence[int], a: Sequence[Sequence[int]]) -> float:
    best = 0.0
    for p in range(inst.num_slots):
        if m[p]:
            t = inst.slot_time([a[q][p] for q in range(inst.num_buckets)], p)
            if t > best:
                best = t
    return best


def verify_solution(inst: MilpInstance, solution: MilpSolution) -> list[str]:
    """Independent re-check of every constraint family; empty list == valid."""
    m, a = solution.selection, solution.assignment
    np_, nq = inst.num_slots, inst.num_buckets
    violations = []
    for q in range(nq):
        if sum(a[q][p] for p in range(np_)) != inst.buckets.counts[q]:
            violations.append(f"coverage violated for bucket {q}")
        for p in range(np_):
            if a[q][p] < 0 or a[q][p] > inst.buckets.counts[q] * m[p]:
                violations.append(f"linking violated at bucket {q}, slot {p}")
    used = sum(inst.catalog.slots[p].degree * m[p] for p in range(np_))
    n = inst.cluster.total_devices
    if inst.options.strict_device_equality:
        if used != n:
            violations.append(f"device budget {used} != {n}")
    elif used > n:
        violations.append(f"device budget {used} > {n}")
    for p in range(np_):
        if not m[p]:
            continue
        col = [a[q][p] for q in range(nq)]
        mem = inst.slot_memory(col, p)
        if mem > inst.cluster.memory_budget * (1 + REEVAL_RTOL):
            violations.append(f"memory violated at slot {p}: {mem:.6g} > {inst.cluster.memory_budget:.6g}")
        t = inst.slot_time(col, p)
        if t > solution.objective * (1 + REEVAL_RTOL):
            violations.append(f"time violated at slot {p}: {t!r} > {solution.objective!r}")
    if solution.objective != float("inf"):
        re_c = _reevaluate(inst, m, a)
        if abs(re_c - solution.objective) > REEVAL_RTOL * max(1.0, abs(re_c)):
            violations.append(f"objective {solution.objective!r} != re-evaluated makespan {re_c!r}")
    return violations


def solve(instance: MilpInstance, fixed_selection: Sequence[int] | None = None) -> MilpSolution:
    """Exact solve of the instance.

    Deterministic for identical inputs. ``fixed_selection`` pins the group
    selection vector (used to price homogeneous configurations with the same
    assignment freedom).
    """
    diag = _diagnose_infeasible(instance)
    if diag is not None:
        return diag

    np_, nq = instance.num_slots, instance.num_buckets
    n_vars = 1 + np_ + nq * np_

    def a_var(q: int, p: int) -> int:
        return 1 + np_ + q * np_ + p

    beta = instance.coeffs.startup_overhead
    budget = instance.activation_budget()

    rows_i: list[int] = []
    cols_i: list[int] = []
    vals: list[float] = []
    lb: list[float] = []
    ub: list[float] = []
    row = 0

    def add(entries, lo, hi):
        nonlocal row
        for col, val in entries:
            rows_i.append(row)
            cols_i.append(col)
            vals.append(val)
        lb.append(lo)
        ub.append(hi)
        row += 1

    for p in range(np_):
        entries = [(0, -1.0), (1 + p, beta)]
        entries += [(a_var(q, p), instance.time_coeff(q, p)) for q in range(nq)]
        add(entries, -np.inf, 0.0)

    if instance.coeffs.m_token > 0:
        for p in range(np_):
            entries = [(1 + p, -budget)]
            entries += [(a_var(q, p), instance.mem_coeff(q, p)) for q in range(nq)]
            add(entries, -np.inf, 0.0)

    for q in range(nq):
        for p in range(np_):
            add([(a_var(q, p), 1.0), (1 + p, -float(instance.buckets.counts[q]))], -np.inf, 0.0)

    dev_entries = [(1 + p, float(instance.catalog.slots[p].degree)) for p in range(np_)]
    n = float(instance.cluster.total_devices)
    add(dev_entries, n if instance.options.strict_device_equality else -np.inf, n)

    for q in range(nq):
        add([(a_var(q, p), 1.0) for p in range(np_)], float(instance.buckets.counts[q]),
            float(instance.buckets.counts[q]))

    if instance.options.symmetry_breaking and fixed_selection is None:
        for cls in instance.degree_classes():
            for p1, p2 in zip(cls, cls[1:]):
                add([(1 + p2, 1.0), (1 + p1, -1.0)], -np.inf, 0.0)
                entries = [(a_var(q, p2), float(instance.buckets.upper_limits[q])) for q in range(nq)]
                entries += [(a_var(q, p1), -float(instance.buckets.upper_limits[q])) for q in range(nq)]
                add(entries, -np.inf, 0.0)

    mat = sparse.csr_matrix((vals, (rows_i, cols_i)), shape=(row, n_vars))
    constraints = LinearConstraint(mat, np.array(lb), np.array(ub))

    var_lb = np.zeros(n_vars)
    var_ub = np.full(n_vars, np.inf)
    var_ub[1 : 1 + np_] = 1.0
    for q in range(nq):
        for p in range(np_):
            var_ub[a_var(q, p)] = float(instance.assignment_upper_bound(q, p))
    if fixed_selection is not None:
        if len(fixed_selection) != np_:
            raise ValidationError("fixed selection length must match the catalog")
        var_lb[1 : 1 + np_] = np.array(fixed_selection, dtype=float)
        var_ub[1 : 1 + np_] = np.array(fixed_selection, dtype=float)

    integrality = np.ones(n_vars)
    integrality[0] = 0.0

    c = np.zeros(n_vars)
    c[0] = 1.0

    options: dict = {"mip_rel_gap": 0.0, "presolve": True}
    if instance.options.time_limit is not None:
        options["time_limit"] = float(instance.options.time_limit)

    start = time.perf_counter()
    res = milp(c, constraints=constraints, integrality=integrality,
               bounds=Bounds(var_lb, var_ub), options=options)
    wall = time.perf_counter() - start

    if res.status == 2:
        return _infeasible(
            instance, "coverage",
            "no group selection within the device budget covers every bucket",
        )
    if res.x is None:
        raise SolverError(f"engine stopped without an incumbent: {res.message}")

    x = np.asarray(res.x)
    m = [int(round(x[1 + p])) for p in range(np_)]
    a = [[int(round(x[a_var(q, p)])) for p in range(np_)] for q in range(nq)]
    if fixed_selection is None:
        _canonicalize(instance, m, a)
    objective = _reevaluate(instance, m, a)

    solution = MilpSolution(
        selection=tuple(m),
        assignment=tuple(tuple(r) for r in a),
        objective=objective,
        status="optimal" if res.status == 0 else "time_limit_incumbent",
        node_count=int(res.mip_node_count or 0),
        wall_time=wall,
    )
    violations = verify_solution(instance, solution)
    if violations:
        raise SolverError("engine solution failed re-evaluation: " + "; ".join(violations))
    return solution


def _compositions(total: int, caps: Sequence[int]) -> Iterator[tuple[int, ...]]:
    """All ways to write ``total`` as a sum over slots with per-slot caps."""
    if len(caps) == 1:
        if total <= caps[0]:
            yield (total,)
        return
    for first in range(min(total, caps[0]) + 1):
        for rest in _compositions(total - first, caps[1:]):
            yield (first,) + rest


def solve_bruteforce(instance: MilpInstance) -> MilpSolution:
    """Exhaustive oracle over all selections and count matrices."""
    np_, nq = instance.num_slots, instance.num_buckets
    if np_ > BRUTEFORCE_MAX_SLOTS:
        raise ValidationError(f"brute force limited to {BRUTEFORCE_MAX_SLOTS} slots")
    if nq > BRUTEFORCE_MAX_BUCKETS:
        raise ValidationError(f"brute force limited to {BRUTEFORCE_MAX_BUCKETS} buckets")
    if instance.buckets.total_sequences > BRUTEFORCE_MAX_SEQUENCES:
        raise ValidationError(f"brute force limited to {BRUTEFORCE_MAX_SEQUENCES} sequences")

    diag = _diagnose_infeasible(instance)
    if diag is not None:
        return diag

    degrees = instance.catalog.degrees()
    n = instance.cluster.total_devices
    budget = instance.activation_budget()
    best: tuple | None = None  # (objective, selection, flat assignment)

    for m in product((0, 1), repeat=np_):
        used = sum(d * mp for d, mp in zip(degrees, m))
        if instance.options.strict_device_equality:
            if used != n:
                continue
        elif used > n:
            continue
        selected = [p for p in range(np_) if m[p]]
        if not selected:
            continue
        per_bucket = []
        for q in range(nq):
            caps = [instance.assignment_upper_bound(q, p) for p in selected]
            combos = list(_compositions(instance.buckets.counts[q], caps))
            if not combos:
                break
            per_bucket.append(combos)
        if len(per_bucket) != nq:
            continue
        for choice in product(*per_bucket):
            ok = True
            worst = 0.0
            for j, p in enumerate(selected):
                col = [choice[q][j] for q in range(nq)]
                if instance.coeffs.m_token > 0 and instance.slot_memory(col, p) > instance.cluster.memory_budget:
                    ok = False
                    break
                t = instance.slot_time(col, p)
                if t > worst:
                    worst = t
            if not ok:
                continue
            flat = []
            for q in range(nq):
                rowq = [0] * np_
                for j, p in enumerate(selected):
                    rowq[p] = choice[q][j]
                flat.append(tuple(rowq))
            cand = (worst, m, tuple(flat))
            if best is None or cand < best:
                best = cand

    if best is None:
        return _infeasible(instance, "coverage",
                           "no group selection within the device budget covers every bucket")
    objective, m, flat = best
    return MilpSolution(
        selection=tuple(m),
        assignment=flat,
        objective=objective,
        status="optimal",
    )


def extract_plan(solution: MilpSolution, instance: MilpInstance,
                 lengths: Sequence[int]) -> MicroBatchPlan:
    """Materialize per-sequence dispatch from the bucket-level assignment.

    Within a bucket, sequences are dealt longest-first to the receiving group
    with the most remaining assigned slots (ties to the lowest slot id), so
    the dispatch is deterministic. True per-group memory is re-checked
    against the budget; bucketing uses upper limits, so this cannot exceed
    the bucketed bound and any violation is reported as a plan warning.
    """
    if solution.status == "infeasible":
        raise ValidationError("cannot extract a plan from an infeasible solution")
    inst = instance
    np_, nq = inst.num_slots, inst.num_buckets
    group_members: dict[int, list[int]] = {p: [] for p in range(np_) if solution.selection[p]}

    for q in range(nq):
        members = sorted(inst.buckets.member_indices[q], key=lambda k: (-lengths[k], k))
        remaining = {p: solution.assignment[q][p] for p in range(np_) if solution.assignment[q][p] > 0}
        for k in members:
            p_target = max(remaining, key=lambda p: (remaining[p], -p))
            group_members[p_target].append(k)
            remaining[p_target] -= 1
            if remaining[p_target] == 0:
                del remaining[p_target]

    warnings: list[str] = []
    groups = []
    for p in sorted(group_members):
        slot = inst.catalog.slots[p]
        col = [solution.assignment[q][p] for q in range(nq)]
        comp = counts_comp_time(inst.buckets.upper_limits, col, slot.degree, inst.coeffs)
        comm = counts_comm_time(inst.buckets.upper_limits, col, slot.degree, slot.bandwidth, inst.coeffs)
        mem = counts_memory(inst.buckets.upper_limits, col, slot.degree, inst.coeffs)
        true_tokens = sum(lengths[k] for k in group_members[p])
        true_mem = true_tokens * inst.coeffs.m_token / slot.degree + inst.coeffs.m_ms
        if true_mem > inst.cluster.memory_budget * (1 + REEVAL_RTOL):
            warnings.append(f"slot {p}: true memory {true_mem:.6g} exceeds budget")
        groups.append(GroupDispatch(
            slot_id=p,
            degree=slot.degree,
            sequence_indices=tuple(group_members[p]),
            comp_time=comp,
            comm_time=comm,
            memory_bytes=mem,
            true_memory_bytes=true_mem,
        ))

    return MicroBatchPlan(
        selected_groups=tuple(groups),
        group_selection=solution.selection,
        assignment=solution.assignment,
        buckets=inst.buckets,
        predicted_makespan=solution.objective,
        plan_warnings=tuple(warnings),
    )
