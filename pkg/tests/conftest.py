"""Shared fixtures: calibrated scenario constants and instance generators."""

import numpy as np
import pytest

from seqplan.domain import BucketSet, ClusterSpec, CostCoefficients, SequenceBatch, build_virtual_catalog
from seqplan.planner import PlannerOptions, build_instance

# 64-device cluster, 8 GPUs/node: degrees up to 8 ride the fast in-node links.
# Coefficients reproduce the motivating component times: four 48K sequences in
# one degree-32 group cost comp 2.8 s / comm 1.2 s; one 48K sequence in a
# degree-8 group costs comp 2.8 s / comm 0.2 s; 6000 activation tokens fit per
# device (192K context at degree 32).
FIG1_CLUSTER = ClusterSpec(
    total_devices=64,
    devices_per_node=8,
    intra_node_bandwidth=184e9,
    inter_node_bandwidth=24e9,
    memory_budget=37e9,
)
FIG1_COEFFS = CostCoefficients(
    alpha1=4.8e-9,
    alpha2=2.196e-4,
    beta1=0.1,
    alpha3=4.6e6,
    beta2=0.05,
    m_token=4.5e6,
    m_ms=10e9,
)
FIG1_LENGTHS = [100_000, 48_000, 48_000, 48_000, 48_000]


@pytest.fixture
def fig1_cluster():
    return FIG1_CLUSTER


@pytest.fixture
def fig1_coeffs():
    return FIG1_COEFFS


@pytest.fixture
def fig1_batch():
    return SequenceBatch(FIG1_LENGTHS, batch_id="fig1")


def make_buckets(limits, counts) -> BucketSet:
    """BucketSet with synthetic member indices (sequence k has length = its limit)."""
    members = []
    k = 0
    for c in counts:
        members.append(tuple(range(k, k + c)))
        k += c
    return BucketSet(
        upper_limits=tuple(limits),
        counts=tuple(counts),
        member_indices=tuple(members),
        total_error=0,
    )


def random_tiny_instance(rng: np.random.Generator, strict: bool = False):
    """Random instance within the brute-force oracle bounds (N in {2,4})."""
    n = int(rng.choice([2, 4]))
    g_choices = [g for g in (1, 2, 4) if g <= n]
    g = int(rng.choice(g_choices))
    v_intra = float(rng.uniform(1.0, 8.0))
    v_inter = float(rng.uniform(0.2, 1.0)) * v_intra
    m_ms = float(rng.integers(0, 8))
    budget = float(rng.integers(12, 80))
    cluster = ClusterSpec(n, g, v_intra, v_inter, m_ms + budget)
    coeffs = CostCoefficients(
        alpha1=float(rng.uniform(0.0, 0.05)),
        alpha2=float(rng.uniform(0.01, 1.0)),
        beta1=float(rng.uniform(0.0, 0.4)),
        alpha3=float(rng.uniform(0.1, 4.0)),
        beta2=float(rng.uniform(0.0, 0.2)),
        m_token=float(rng.integers(1, 3)),
        m_ms=m_ms,
    )
    catalog = build_virtual_catalog(cluster)
    nq = int(rng.integers(1, 4))
    limits = np.sort(rng.choice(np.arange(2, 33), size=nq, replace=False)).tolist()
    counts = rng.integers(1, 4, size=nq).tolist()
    while sum(counts) > 6:
        counts[int(np.argmax(counts))] -= 1
    counts = [max(1, int(c)) for c in counts]
    buckets = make_buckets(limits, counts)
    options = PlannerOptions(
        strict_device_equality=strict,
        symmetry_breaking=bool(rng.integers(0, 2)),
    )
    return build_instance(buckets, catalog, coeffs, cluster, options)
