"""Chunking of a global batch into micro-batches.

Sequences are sorted by length (keeping length variance low inside each
chunk) and then split into contiguous runs whose maximum token sum is
minimal, which balances per-micro-batch memory pressure. The smallest
worthwhile micro-batch count follows from the cluster's token capacity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from . import _kernels
from .domain import ClusterSpec, CostCoefficients, InfeasibleError, SequenceBatch, ValidationError

BRUTEFORCE_LIMIT = 14


@dataclass(frozen=True)
class MicroBatchSplit:
    """Contiguous split of the sorted sequence list into micro-batches."""

    boundaries: tuple[int, ...]  # end indices into the sorted order, last == K
    micro_batches: tuple[tuple[int, ...], ...]  # original sequence indices
    minimax_tokens: int

    def __post_init__(self):
        if any(not mb for mb in self.micro_batches):
            raise ValidationError("micro-batches must be non-empty")


def per_device_token_capacity(cluster: ClusterSpec, coeffs: CostCoefficients) -> int | None:
    """Activation tokens one device can hold; None when unbounded."""
    if cluster.memory_budget <= coeffs.m_ms:
        raise InfeasibleError(
            f"model states ({coeffs.m_ms:.3g} B) leave no activation memory within "
            f"the device budget ({cluster.memory_budget:.3g} B)",
            family="memory",
        )
    if coeffs.m_token == 0:
        return None
    cap = int(math.floor((cluster.memory_budget - coeffs.m_ms) / coeffs.m_token))
    if cap <= 0:
        raise InfeasibleError(
            f"per-device token capacity is zero (budget {cluster.memory_budget:.3g} B, "
            f"model states {coeffs.m_ms:.3g} B, {coeffs.m_token:.3g} B/token)",
            family="memory",
        )
    return cap


def cluster_token_capacity(cluster: ClusterSpec, coeffs: CostCoefficients,
                           override: int | None = None) -> int | None:
    """Tokens one micro-batch may carry across the whole cluster."""
    if override is not None:
        if override <= 0:
            raise ValidationError("capacity override must be positive")
        return override
    cap = per_device_token_capacity(cluster, coeffs)
    return None if cap is None else cluster.total_devices * cap


def min_microbatch_count(batch: SequenceBatch, cluster: ClusterSpec, coeffs: CostCoefficients,
                         capacity_override: int | None = None) -> int:
    """Smallest micro-batch count whose token share can fit the cluster."""
    capacity = cluster_token_capacity(cluster, coeffs, capacity_override)
    if capacity is None:
        return 1
    return max(1, -(-batch.total_tokens // capacity))


def _sorted_order(batch: SequenceBatch) -> list[int]:
    return sorted(range(batch.size), key=lambda k: (batch.lengths[k], k))


def blast(batch: SequenceBatch, micro_batches: int) -> MicroBatchSplit:
    """Split into exactly ``micro_batches`` contiguous runs of the sorted list,
    minimizing the maximum per-run token sum.

    Ties are broken toward the lexicographically smallest boundary vector.
    """
    k_total = batch.size
    if micro_batches < 1:
        raise ValidationError("micro-batch count must be >= 1")
    if micro_batches > k_total:
        raise ValidationError(f"cannot split {k_total} sequences into {micro_batches} micro-batches")
    order = _sorted_order(batch)
    s = [batch.lengths[k] for k in order]

    table = _kernels.minimax_suffix_table(np.asarray(s, dtype=np.int64), micro_batches)
    best = int(table[0, micro_batches])

    prefix = np.zeros(k_total + 1, dtype=np.int64)
    prefix[1:] = np.cumsum(s)

    bounds: list[int] = []
    pos = 0
    for remaining in range(micro_batches, 0, -1):
        if remaining == 1:
            j = k_total
        else:
            j = pos + 1
            while not (prefix[j] - prefix[pos] <= best and table[j, remaining - 1] <= best):
                j += 1
        bounds.append(j)
        pos = j

    mbs = []
    start = 0
    for j in bounds:
        mbs.append(tuple(order[start:j]))
        start = j
    return MicroBatchSplit(boundaries=tuple(bounds), micro_batches=tuple(mbs), minimax_tokens=best)


def blast_bruteforce(batch: SequenceBatch, micro_batches: int) -> MicroBatchSplit:
    """Exact minimax split by enumerating all cut sets."""
    k_total = batch.size
    if k_total > BRUTEFORCE_LIMIT:
        raise ValidationError(f"brute force limited to {BRUTEFORCE_LIMIT} sequences")
    if micro_batches < 1 or micro_batches > k_total:
        raise ValidationError("invalid micro-batch count")
    order = _sorted_order(batch)
    s = [batch.lengths[k] for k in order]
    prefix = [0]
    for v in s:
        prefix.append(prefix[-1] + v)

    best = None  # (minimax, bounds)
    for cuts in combinations(range(1, k_total), micro_batches - 1):
        bounds = cuts + (k_total,)
        mm = 0
        start = 0
        for j in bounds:
            mm = max(mm, prefix[j] - prefix[start])
            start = j
        if best is None or (mm, bounds) < best:
            best = (mm, bounds)
    mm, bounds = best
    mbs = []
    start = 0
    for j in bounds:
        mbs.append(tuple(order[start:j]))
        start = j
    return MicroBatchSplit(boundaries=tuple(bounds), micro_batches=tuple(mbs), minimax_tokens=mm)
