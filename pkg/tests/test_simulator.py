import pytest

from seqplan.domain import ClusterSpec, CostCoefficients, SequenceBatch, ValidationError
from seqplan.simulator import (
    SimConfig,
    gen_longtail,
    group_summary,
    length_summary,
    parse_distribution,
    run_sim,
    write_histogram_svg,
)
from seqplan.workflow import solve_batch

from conftest import FIG1_CLUSTER, FIG1_COEFFS


SIM_CLUSTER = ClusterSpec(8, 2, 1.8e11, 2.25e10, 6.4e10)
SIM_COEFFS = CostCoefficients(alpha1=4.8e-9, alpha2=2.196e-4, beta1=0.02, alpha3=4.6e6,
                              beta2=0.01, m_token=4.5e6, m_ms=1e10)


def test_parse_distribution():
    assert parse_distribution("lognormal:9.0,1.5") == ("lognormal", 9.0, 1.5)
    assert parse_distribution("pareto:2.0,500") == ("pareto", 2.0, 500.0)
    with pytest.raises(ValidationError):
        parse_distribution("normal:1,2")
    with pytest.raises(ValidationError):
        parse_distribution("lognormal:1")


def test_gen_longtail_reproducible_and_clipped():
    a = gen_longtail(64, "lognormal:8.0,1.5", 16_000, seed=5, batches=3)
    b = gen_longtail(64, "lognormal:8.0,1.5", 16_000, seed=5, batches=3)
    assert [x.lengths for x in a] == [x.lengths for x in b]
    assert all(1 <= s <= 16_000 for batch in a for s in batch.lengths)
    c = gen_longtail(64, "lognormal:8.0,1.5", 16_000, seed=6, batches=3)
    assert [x.lengths for x in a] != [x.lengths for x in c]


def test_length_summary_shape():
    batches = gen_longtail(2000, "lognormal:7.3,1.2", 131_072, seed=1)
    s = length_summary(batches)
    assert s["count"] == 2000
    assert s["frac_below_8k"] > 0.8
    assert 0 <= s["frac_above_32k"] < 0.1


def test_group_summary_notation(fig1_batch):
    plan = solve_batch(fig1_batch, FIG1_CLUSTER, FIG1_COEFFS)
    assert group_summary(plan) == "⟨32,8×4⟩"


def test_group_summary_collapses_repeats():
    from seqplan.domain import BucketSet, GroupDispatch, MicroBatchPlan, Plan

    def mb(degrees):
        groups = tuple(
            GroupDispatch(slot_id=i, degree=d, sequence_indices=(i,),
                          comp_time=0.0, comm_time=0.0, memory_bytes=0.0,
                          true_memory_bytes=0.0)
            for i, d in enumerate(degrees)
        )
        buckets = BucketSet((1,), (len(degrees),), (tuple(range(len(degrees))),), 0)
        return MicroBatchPlan(groups, (1,) * len(degrees), ((1,) * len(degrees),),
                              buckets, 0.0)

    plan = Plan(
        micro_batches=(mb([32, 16, 8, 8]), mb([8] * 8), mb([8] * 8), mb([64])),
        predicted_total_time=0.0,
    )
    assert group_summary(plan) == "⟨32,16,8×2⟩⟨8×8⟩×2⟨64⟩"


def test_uniform_batches_no_heterogeneity_gain():
    # 7000-token sequences: exactly one fits per device (capacity 12000), so
    # the adaptive-homogeneous baseline and the planner land on the same plan
    batches = [SequenceBatch([7000] * 8, f"u{i}") for i in range(3)]
    report = run_sim(batches, SIM_CLUSTER, SIM_COEFFS, ["flexsp", "batch_ada"],
                     SimConfig(warmup=0))
    assert report.speedups["batch_ada"] == pytest.approx(1.0, abs=1e-6)


def test_row_accounting_identity_and_dominance():
    batches = gen_longtail(10, "lognormal:8.0,1.4", 32_000, seed=3, batches=4)
    report = run_sim(batches, SIM_CLUSTER, SIM_COEFFS, ["flexsp", "batch_ada", "static:8"],
                     SimConfig(warmup=1))
    by_iter = {}
    for row in report.rows:
        assert row.comm_time + row.comp_time + row.overheads == pytest.approx(
            row.predicted_time, rel=1e-9)
        by_iter.setdefault(row.iteration, {})[row.strategy] = row.predicted_time
    for it, values in by_iter.items():
        assert values["flexsp"] <= values["batch_ada"] + 1e-6
        assert values["batch_ada"] <= values["static:8"] + 1e-6
    assert report.speedups["static:8"] >= report.speedups["batch_ada"] - 1e-9


def test_report_csv_deterministic(tmp_path):
    batches = gen_longtail(8, "lognormal:8.0,1.2", 32_000, seed=9, batches=3)
    paths = []
    for name in ("a.csv", "b.csv"):
        report = run_sim(batches, SIM_CLUSTER, SIM_COEFFS, ["flexsp", "batch_ada"],
                         SimConfig(warmup=0))
        p = tmp_path / name
        report.to_csv(p)
        paths.append(p)
    assert paths[0].read_bytes() == paths[1].read_bytes()


def test_fig1_sim_speedup(fig1_batch):
    report = run_sim([fig1_batch], FIG1_CLUSTER, FIG1_COEFFS, ["flexsp", "static:32"],
                     SimConfig(warmup=0))
    # motivating scenario: about a third faster than the fixed degree-32 setup
    assert report.speedups["static:32"] == pytest.approx(4.0 / 3.0, rel=0.1)


def test_degree_lengths_and_svg(tmp_path):
    batches = gen_longtail(8, "lognormal:8.0,1.2", 32_000, seed=9, batches=2)
    report = run_sim(batches, SIM_CLUSTER, SIM_COEFFS, ["flexsp"], SimConfig(warmup=0))
    assert report.degree_lengths
    strategies = {s for s, _, _ in report.degree_lengths}
    assert strategies == {"flexsp"}
    csv_path = tmp_path / "deg.csv"
    report.degree_lengths_csv(csv_path)
    assert csv_path.read_text().startswith("strategy,degree,length")
    svg_path = tmp_path / "hist.svg"
    write_histogram_svg(svg_path, report.degree_lengths)
    assert svg_path.read_text().startswith("<svg")


def test_charge_solve_time_keeps_identity():
    batches = gen_longtail(6, "lognormal:8.0,1.2", 32_000, seed=2, batches=2)
    report = run_sim(batches, SIM_CLUSTER, SIM_COEFFS, ["flexsp"],
                     SimConfig(warmup=0, charge_solve_time=True))
    for row in report.rows:
        assert row.comm_time + row.comp_time + row.overheads == pytest.approx(
            row.predicted_time, rel=1e-9)
    assert report.solve_metrics
