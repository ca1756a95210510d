"""Core value types shared by every other module.

All types are immutable after construction and validate their invariants
eagerly, so a constructed value can be shared freely between worker threads.
Cluster and coefficient objects round-trip through strict JSON (exact
snake_case field names, unknown fields rejected) because they are the
cross-tool configuration contract.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence


class SeqplanError(Exception):
    """Base class for errors raised by this package."""


class ValidationError(SeqplanError):
    """A value violates one of its declared invariants."""


class InfeasibleError(SeqplanError):
    """No plan satisfies the memory / device constraints.

    ``family`` identifies the first violated constraint family, either
    ``"memory"`` or ``"coverage"``.
    """

    def __init__(self, message: str, family: str = "memory"):
        super().__init__(message)
        self.family = family


def _is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class ClusterSpec:
    """Device pool description: counts, bandwidth tiers, per-device memory."""

    total_devices: int
    devices_per_node: int
    intra_node_bandwidth: float  # bytes/second
    inter_node_bandwidth: float  # bytes/second
    memory_budget: float  # bytes per device

    def __post_init__(self):
        if not _is_power_of_two(self.total_devices):
            raise ValidationError(f"total_devices must be a power of two, got {self.total_devices}")
        if self.devices_per_node < 1 or self.total_devices % self.devices_per_node != 0:
            raise ValidationError(
                f"devices_per_node ({self.devices_per_node}) must divide total_devices ({self.total_devices})"
            )
        if self.intra_node_bandwidth <= 0 or self.inter_node_bandwidth <= 0:
            raise ValidationError("bandwidths must be positive")
        if self.intra_node_bandwidth < self.inter_node_bandwidth:
            raise ValidationError("intra_node_bandwidth must be >= inter_node_bandwidth")
        if self.memory_budget <= 0:
            raise ValidationError("memory_budget must be positive")

    def to_json_dict(self) -> dict:
        return {
            "total_devices": self.total_devices,
            "devices_per_node": self.devices_per_node,
            "intra_node_bandwidth": self.intra_node_bandwidth,
            "inter_node_bandwidth": self.inter_node_bandwidth,
            "memory_budget": self.memory_budget,
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "ClusterSpec":
        return cls(**_take_fields(data, {
            "total_devices": int,
            "devices_per_node": int,
            "intra_node_bandwidth": float,
            "inter_node_bandwidth": float,
            "memory_budget": float,
        }, "ClusterSpec"))


@dataclass(frozen=True)
class CostCoefficients:
    """Fitted alpha-beta model coefficients plus per-token memory footprints.

    ``alpha1``/``alpha2``/``beta1`` parameterize compute time, ``alpha3``/
    ``beta2`` communication time (``alpha3`` is volume per token, divided by
    the group bandwidth at evaluation time), ``m_token``/``m_ms`` activation
    and model-state memory, and ``zero_overhead`` a constant additive term
    for sharded-optimizer traffic that depends on neither degree nor length.
    """

    alpha1: float  # seconds / token^2
    alpha2: float  # seconds / token
    beta1: float  # seconds
    alpha3: float  # bytes / token (divided by bandwidth when evaluated)
    beta2: float  # seconds
    m_token: float  # bytes / token
    m_ms: float  # bytes
    zero_overhead: float = 0.0  # seconds

    def __post_init__(self):
        for name in ("alpha1", "alpha2", "beta1", "alpha3", "beta2", "m_token", "m_ms", "zero_overhead"):
            if getattr(self, name) < 0:
                raise ValidationError(f"{name} must be non-negative")

    @property
    def startup_overhead(self) -> float:
        """Per-group fixed cost: compute startup + comm startup + sharding."""
        return self.beta1 + self.beta2 + self.zero_overhead

    def to_json_dict(self) -> dict:
        return {
            "alpha1": self.alpha1,
            "alpha2": self.alpha2,
            "beta1": self.beta1,
            "alpha3": self.alpha3,
            "beta2": self.beta2,
            "m_token": self.m_token,
            "m_ms": self.m_ms,
            "zero_overhead": self.zero_overhead,
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "CostCoefficients":
        fields = {
            "alpha1": float,
            "alpha2": float,
            "beta1": float,
            "alpha3": float,
            "beta2": float,
            "m_token": float,
            "m_ms": float,
        }
        known = set(fields) | {"zero_overhead"}
        unknown = set(data) - known
        if unknown:
            raise ValidationError(f"CostCoefficients: unknown fields {sorted(unknown)}")
        missing = set(fields) - set(data)
        if missing:
            raise ValidationError(f"CostCoefficients: missing fields {sorted(missing)}")
        kwargs = {k: conv(data[k]) for k, conv in fields.items()}
        kwargs["zero_overhead"] = float(data.get("zero_overhead", 0.0))
        return cls(**kwargs)


def _take_fields(data: dict, fields: dict, type_name: str) -> dict:
    unknown = set(data) - set(fields)
    if unknown:
        raise ValidationError(f"{type_name}: unknown fields {sorted(unknown)}")
    missing = set(fields) - set(data)
    if missing:
        raise ValidationError(f"{type_name}: missing fields {sorted(missing)}")
    return {k: conv(data[k]) for k, conv in fields.items()}


@dataclass(frozen=True)
class SequenceBatch:
    """One training step's worth of variable-length sequences (in tokens)."""

    lengths: tuple[int, ...]
    batch_id: str = ""

    def __init__(self, lengths: Sequence[int], batch_id: str = "", max_context: int | None = None):
        lengths = tuple(int(s) for s in lengths)
        if not lengths:
            raise ValidationError("batch must contain at least one sequence")
        if any(s < 1 for s in lengths):
            raise ValidationError("sequence lengths must be >= 1")
        if max_context is not None:
            over = [s for s in lengths if s > max_context]
            if over:
                raise ValidationError(
                    f"{len(over)} sequence(s) exceed the maximum context length {max_context} (longest {max(over)})"
                )
        object.__setattr__(self, "lengths", lengths)
        object.__setattr__(self, "batch_id", batch_id)

    @property
    def size(self) -> int:
        return len(self.lengths)

    @property
    def total_tokens(self) -> int:
        return sum(self.lengths)


@dataclass(frozen=True)
class GroupSlot:
    """One candidate group the optimizer may select: degree plus link speed."""

    slot_id: int
    degree: int
    bandwidth: float


@dataclass(frozen=True)
class VirtualGroupCatalog:
    """All candidate group slots for a cluster, largest degrees first.

    For every power-of-two degree d <= N there are N/d slots, so the catalog
    always has 2N - 1 entries. The slot bandwidth depends only on whether the
    degree fits inside one node.
    """

    slots: tuple[GroupSlot, ...]
    total_devices: int

    @property
    def size(self) -> int:
        return len(self.slots)

    def degrees(self) -> tuple[int, ...]:
        return tuple(s.degree for s in self.slots)

    def to_json_dict(self) -> dict:
        return {
            "total_devices": self.total_devices,
            "slots": [
                {"slot_id": s.slot_id, "degree": s.degree, "bandwidth": s.bandwidth}
                for s in self.slots
            ],
        }


def build_virtual_catalog(cluster: ClusterSpec, max_degree: int | None = None) -> VirtualGroupCatalog:
    """Enumerate candidate group slots for ``cluster``.

    Slots are ordered by degree descending, then slot id ascending, and the
    result is a pure function of its inputs. ``max_degree`` optionally caps
    the admissible degree (e.g. an attention-head divisibility limit).
    """
    n = cluster.total_devices
    g = cluster.devices_per_node
    slots: list[GroupSlot] = []
    sid = 0
    d = n
    while d >= 1:
        if max_degree is None or d <= max_degree:
            bw = cluster.intra_node_bandwidth if d <= g else cluster.inter_node_bandwidth
            for _ in range(n // d):
                slots.append(GroupSlot(slot_id=sid, degree=d, bandwidth=bw))
                sid += 1
        d //= 2
    return VirtualGroupCatalog(slots=tuple(slots), total_devices=n)


@dataclass(frozen=True)
class BucketSet:
    """Sequences grouped under shared upper-limit representatives.

    ``upper_limits`` are strictly increasing; bucket q holds every member
    whose length lies in (upper_limits[q-1], upper_limits[q]]. ``total_error``
    is the summed token inflation of representing members by the limit.
    """

    upper_limits: tuple[int, ...]
    counts: tuple[int, ...]
    member_indices: tuple[tuple[int, ...], ...]
    total_error: int

    def __post_init__(self):
        if not self.upper_limits:
            raise ValidationError("bucket set must be non-empty")
        if len(self.upper_limits) != len(self.counts) or len(self.counts) != len(self.member_indices):
            raise ValidationError("bucket arrays must have equal length")
        if any(b < 1 for b in self.counts):
            raise ValidationError("bucket counts must be positive")
        if any(self.upper_limits[i] >= self.upper_limits[i + 1] for i in range(len(self.upper_limits) - 1)):
            raise ValidationError("upper limits must be strictly increasing")
        if any(len(m) != c for m, c in zip(self.member_indices, self.counts)):
            raise ValidationError("member lists must match counts")

    @property
    def num_buckets(self) -> int:
        return len(self.upper_limits)

    @property
    def total_sequences(self) -> int:
        return sum(self.counts)

    def validate_membership(self, lengths: Sequence[int], exact_limits: bool = False):
        """Check members fall inside their bucket range and cover ``lengths``.

        With ``exact_limits`` the representative must equal the longest member
        (true for the DP and brute-force bucketing, not the fixed-grid one).
        """
        seen: set[int] = set()
        prev = 0
        for limit, members in zip(self.upper_limits, self.member_indices):
            mx = 0
            for k in members:
                if k in seen:
                    raise ValidationError(f"sequence {k} assigned to two buckets")
                seen.add(k)
                s = lengths[k]
                if not (prev < s <= limit):
                    raise ValidationError(f"sequence {k} (len {s}) outside bucket range ({prev}, {limit}]")
                mx = max(mx, s)
            if exact_limits and mx != limit:
                raise ValidationError(f"bucket limit {limit} differs from max member length {mx}")
            prev = limit
        if len(seen) != len(lengths):
            raise ValidationError("buckets do not cover every sequence exactly once")

    def to_json_dict(self) -> dict:
        return {
            "upper_limits": list(self.upper_limits),
            "counts": list(self.counts),
            "member_indices": [list(m) for m in self.member_indices],
            "total_error": self.total_error,
        }


def exact_buckets(lengths: Sequence[int]) -> BucketSet:
    """Zero-error bucket set with one bucket per distinct length."""
    by_value: dict[int, list[int]] = {}
    for k, s in enumerate(lengths):
        by_value.setdefault(int(s), []).append(k)
    limits = sorted(by_value)
    return BucketSet(
        upper_limits=tuple(limits),
        counts=tuple(len(by_value[v]) for v in limits),
        member_indices=tuple(tuple(by_value[v]) for v in limits),
        total_error=0,
    )


@dataclass(frozen=True)
class GroupDispatch:
    """One selected group inside a planned micro-batch."""

    slot_id: int
    degree: int
    sequence_indices: tuple[int, ...]
    comp_time: float
    comm_time: float
    memory_bytes: float
    true_memory_bytes: float


@dataclass(frozen=True)
class MicroBatchPlan:
    """Planned execution of one micro-batch: groups, assignment, makespan."""

    selected_groups: tuple[GroupDispatch, ...]
    group_selection: tuple[int, ...]  # 0/1 per catalog slot
    assignment: tuple[tuple[int, ...], ...]  # buckets x slots counts
    buckets: BucketSet
    predicted_makespan: float
    plan_warnings: tuple[str, ...] = ()

    def degree_multiset(self) -> list[int]:
        return sorted((g.degree for g in self.selected_groups), reverse=True)

    def to_json_dict(self) -> dict:
        return {
            "selected_groups": [
                {
                    "slot_id": g.slot_id,
                    "degree": g.degree,
                    "sequence_indices": list(g.sequence_indices),
                    "comp_time": g.comp_time,
                    "comm_time": g.comm_time,
                    "memory_bytes": g.memory_bytes,
                    "true_memory_bytes": g.true_memory_bytes,
                }
                for g in self.selected_groups
            ],
            "group_selection": list(self.group_selection),
            "assignment": [list(row) for row in self.assignment],
            "buckets": self.buckets.to_json_dict(),
            "predicted_makespan": self.predicted_makespan,
            "plan_warnings": list(self.plan_warnings),
        }


@dataclass(frozen=True)
class Plan:
    """Full plan for one batch: ordered micro-batches plus total time."""

    micro_batches: tuple[MicroBatchPlan, ...]
    predicted_total_time: float
    strategy: str = "flexsp"
    batch_id: str = ""

    def to_json_dict(self) -> dict:
        return {
            "schema": 1,
            "strategy": self.strategy,
            "batch_id": self.batch_id,
            "predicted_total_time": self.predicted_total_time,
            "micro_batches": [mb.to_json_dict() for mb in self.micro_batches],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2) + "\n"
