import pytest

from seqplan.baselines import bfd_pack, feasible_degrees, plan_batch_ada, plan_static
from seqplan.domain import ClusterSpec, CostCoefficients, InfeasibleError, SequenceBatch

from conftest import FIG1_CLUSTER, FIG1_COEFFS, FIG1_LENGTHS


def pack_lengths(lengths, packs):
    return [sorted((lengths[k] for k in pack), reverse=True) for pack in packs]


def test_bfd_motivating_batch():
    lengths = [100_000, 48_000, 48_000, 48_000, 48_000]
    packs = bfd_pack(lengths, 192_000)
    assert pack_lengths(lengths, packs) == [[100_000, 48_000], [48_000, 48_000, 48_000]]


def test_bfd_each_exactly_capacity():
    packs = bfd_pack([64, 64, 64], 64)
    assert [len(p) for p in packs] == [1, 1, 1]


def test_bfd_hand_case():
    packs = bfd_pack([60, 40, 30, 30, 20], 100)
    assert pack_lengths([60, 40, 30, 30, 20], packs) == [[60, 40], [30, 30, 20]]


def test_bfd_rejects_oversized():
    with pytest.raises(InfeasibleError):
        bfd_pack([120, 10], 100)


def test_bfd_best_fit_prefers_fullest():
    # 50 goes to the 45-full pack (45+50<=100), not the 30-full one
    packs = bfd_pack([45, 30, 50], 100)
    assert pack_lengths([45, 30, 50], packs) == [[50, 45], [30]]


def test_plan_static_fig1():
    batch = SequenceBatch(FIG1_LENGTHS, "fig1")
    plan = plan_static(batch, FIG1_CLUSTER, FIG1_COEFFS, 32)
    assert plan.strategy == "static"
    assert len(plan.micro_batches) == 1
    assert plan.micro_batches[0].degree_multiset() == [32, 32]
    assert plan.predicted_total_time == pytest.approx(3.8977083333333336, rel=1e-9)
    for mb in plan.micro_batches:
        for grp in mb.selected_groups:
            assert grp.memory_bytes <= FIG1_CLUSTER.memory_budget * (1 + 1e-9)


def test_plan_static_infeasible_degree():
    batch = SequenceBatch(FIG1_LENGTHS, "fig1")
    with pytest.raises(InfeasibleError):
        plan_static(batch, FIG1_CLUSTER, FIG1_COEFFS, 16)  # 100K > 16*6000


def test_plan_static_waves():
    cluster = ClusterSpec(4, 4, 1.0, 0.5, 20.0)
    coeffs = CostCoefficients(0.0, 1.0, 0.1, 1.0, 0.05, m_token=1.0, m_ms=0.0)
    batch = SequenceBatch([20, 20, 20, 18, 18, 18])
    plan = plan_static(batch, cluster, coeffs, 1)  # capacity 20 per pack, 4 groups/wave
    assert len(plan.micro_batches) == 2
    assert len(plan.micro_batches[0].selected_groups) == 4
    assert len(plan.micro_batches[1].selected_groups) == 2
    total = sum(mb.predicted_makespan for mb in plan.micro_batches)
    assert plan.predicted_total_time == total


def test_batch_ada_picks_min_over_degrees(fig1_batch):
    ada = plan_batch_ada(fig1_batch, FIG1_CLUSTER, FIG1_COEFFS)
    assert ada.strategy == "batch_ada"
    for d in feasible_degrees(fig1_batch, FIG1_CLUSTER, FIG1_COEFFS):
        static = plan_static(fig1_batch, FIG1_CLUSTER, FIG1_COEFFS, d)
        assert ada.predicted_total_time <= static.predicted_total_time + 1e-9


def test_feasible_degrees_fig1(fig1_batch):
    assert feasible_degrees(fig1_batch, FIG1_CLUSTER, FIG1_COEFFS) == [32, 64]


def test_capacity_override():
    batch = SequenceBatch(FIG1_LENGTHS, "fig1")
    plan = plan_static(batch, FIG1_CLUSTER, FIG1_COEFFS, 32, capacity_override=100_000)
    # tighter packs: {100K},{48K,48K},{48K,48K} -> 2 waves
    assert len(plan.micro_batches) == 2
