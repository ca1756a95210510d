"""Grouping of a micro-batch's lengths into few buckets with minimal inflation.

Representing every member by its bucket's upper limit shrinks the planner's
search space; the DP variant places boundaries at observed lengths so the
total upward deviation is globally minimal for the requested bucket budget.
A fixed-grid variant and an exhaustive oracle exist for comparison/testing.
"""

from __future__ import annotations

from itertools import combinations
from typing import Sequence

import numpy as np

from . import _kernels
from .domain import BucketSet, ValidationError

BRUTEFORCE_LIMIT = 14


def _sorted_unique(lengths: Sequence[int]):
    """Unique ascending values, counts, and per-value original index lists."""
    order = sorted(range(len(lengths)), key=lambda k: (lengths[k], k))
    values: list[int] = []
    counts: list[int] = []
    members: list[list[int]] = []
    for k in order:
        s = int(lengths[k])
        if values and values[-1] == s:
            counts[-1] += 1
            members[-1].append(k)
        else:
            values.append(s)
            counts.append(1)
            members.append([k])
    return values, counts, members


def _validate(lengths: Sequence[int], q_max: int):
    if not lengths:
        raise ValidationError("lengths must be non-empty")
    if any(int(s) < 1 for s in lengths):
        raise ValidationError("lengths must be positive")
    if q_max < 1:
        raise ValidationError("bucket budget must be >= 1")


def bucket_dp(lengths: Sequence[int], q_max: int) -> BucketSet:
    """Optimal bucketing of ``lengths`` into at most ``q_max`` buckets.

    Ties are broken toward fewer buckets, then the lexicographically smallest
    upper-limit vector. Equal lengths always share a bucket.
    """
    _validate(lengths, q_max)
    values, counts, members = _sorted_unique(lengths)
    n = len(values)
    q_eff = min(q_max, n)

    table = _kernels.bucket_suffix_error_table(
        np.asarray(values, dtype=np.int64), np.asarray(counts, dtype=np.int64), q_eff)

    full = table[0, 1 : q_eff + 1]
    best = int(full.min())
    q_star = 1 + int(np.argmax(full == best))  # smallest q reaching the optimum

    cc = np.zeros(n + 1, dtype=np.int64)
    cc[1:] = np.cumsum(counts)
    w = np.zeros(n + 1, dtype=np.int64)
    w[1:] = np.cumsum(np.asarray(counts, dtype=np.int64) * np.asarray(values, dtype=np.int64))

    # Greedy smallest-next-boundary walk; feasibility certified by the table.
    bounds: list[int] = []
    pos = 0
    used = 0
    for remaining in range(q_star, 0, -1):
        if remaining == 1:
            j = n
        else:
            j = pos + 1
            while True:
                run_cost = values[j - 1] * (cc[j] - cc[pos]) - (w[j] - w[pos])
                if table[j, remaining - 1] < _kernels.INF and used + run_cost + int(table[j, remaining - 1]) == best:
                    break
                j += 1
        used += int(values[j - 1] * (cc[j] - cc[pos]) - (w[j] - w[pos]))
        bounds.append(j)
        pos = j
    assert used == best

    limits, bucket_counts, bucket_members = [], [], []
    start = 0
    for j in bounds:
        limits.append(values[j - 1])
        bucket_counts.append(int(cc[j] - cc[start]))
        merged: list[int] = []
        for t in range(start, j):
            merged.extend(members[t])
        bucket_members.append(tuple(merged))
        start = j
    return BucketSet(
        upper_limits=tuple(limits),
        counts=tuple(bucket_counts),
        member_indices=tuple(bucket_members),
        total_error=best,
    )


def bucket_naive(lengths: Sequence[int], q_max: int) -> BucketSet:
    """Fixed-grid bucketing: q equal-width intervals over (0, max length].

    Grid upper limits (rounded up to whole tokens) represent the members, so
    they can exceed the member maxima. Empty intervals are dropped from the
    result but still count against the budget.
    """
    _validate(lengths, q_max)
    mx = max(int(s) for s in lengths)
    grid: list[int] = []
    for i in range(1, q_max + 1):
        limit = -(-mx * i // q_max)  # ceil
        if not grid or limit > grid[-1]:
            grid.append(limit)

    members: list[list[int]] = [[] for _ in grid]
    error = 0
    order = sorted(range(len(lengths)), key=lambda k: (lengths[k], k))
    gi = 0
    for k in order:
        s = int(lengths[k])
        while grid[gi] < s:
            gi += 1
        members[gi].append(k)
        error += grid[gi] - s

    limits, counts, kept = [], [], []
    for limit, mem in zip(grid, members):
        if mem:
            limits.append(limit)
            counts.append(len(mem))
            kept.append(tuple(mem))
    return BucketSet(
        upper_limits=tuple(limits),
        counts=tuple(counts),
        member_indices=tuple(kept),
        total_error=error,
    )


def bucket_bruteforce(lengths: Sequence[int], q_max: int) -> BucketSet:
    """Exact optimum by enumerating contiguous partitions of the sorted list."""
    _validate(lengths, q_max)
    if len(lengths) > BRUTEFORCE_LIMIT:
        raise ValidationError(f"brute force limited to {BRUTEFORCE_LIMIT} lengths")
    order = sorted(range(len(lengths)), key=lambda k: (lengths[k], k))
    s = [int(lengths[k]) for k in order]
    k_total = len(s)
    prefix = [0]
    for v in s:
        prefix.append(prefix[-1] + v)

    best = None  # (error, nb, limits, cuts)
    for nb in range(1, min(q_max, k_total) + 1):
        for cuts in combinations(range(1, k_total), nb - 1):
            bounds = (0,) + cuts + (k_total,)
            error = 0
            limits = []
            for a, b in zip(bounds, bounds[1:]):
                rep = s[b - 1]
                error += rep * (b - a) - (prefix[b] - prefix[a])
                limits.append(rep)
            cand = (error, nb, limits, bounds)
            if best is None or (cand[0], cand[1], cand[2]) < (best[0], best[1], best[2]):
                best = cand
    error, _, limits, bounds = best
    bucket_members = []
    for a, b in zip(bounds, bounds[1:]):
        bucket_members.append(tuple(order[a:b]))
    return BucketSet(
        upper_limits=tuple(limits),
        counts=tuple(b - a for a, b in zip(bounds, bounds[1:])),
        member_indices=tuple(bucket_members),
        total_error=error,
    )


def relative_token_error(buckets: BucketSet, lengths: Sequence[int]) -> float:
    """Inflated tokens over true tokens."""
    return buckets.total_error / sum(int(s) for s in lengths)
