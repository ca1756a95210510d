import json

import numpy as np
import pytest

from seqplan.cost_model import GroupLoad, group_time
from seqplan.domain import (
    ClusterSpec,
    CostCoefficients,
    ValidationError,
    build_virtual_catalog,
    exact_buckets,
)
from seqplan.planner import (
    PlannerOptions,
    build_instance,
    extract_plan,
    solve,
    solve_bruteforce,
    verify_solution,
)

from conftest import make_buckets, random_tiny_instance


def hand_instance(**options):
    cluster = ClusterSpec(2, 1, 1.0, 0.5, 10.0)
    coeffs = CostCoefficients(alpha1=0.1, alpha2=1.0, beta1=0.0, alpha3=1.0, beta2=0.0,
                              m_token=1.0, m_ms=0.0)
    catalog = build_virtual_catalog(cluster)
    buckets = make_buckets([10], [2])
    return build_instance(buckets, catalog, coeffs, cluster, PlannerOptions(**options))


def test_hand_instance_optimum():
    # two degree-1 groups (one sequence each) beat one degree-2 group: 30 vs 40
    inst = hand_instance()
    sol = solve(inst)
    assert sol.status == "optimal"
    assert sol.objective == pytest.approx(30.0, abs=1e-9)
    assert sol.selection == (0, 1, 1)
    assert verify_solution(inst, sol) == []
    bf = solve_bruteforce(inst)
    assert bf.objective == pytest.approx(30.0, abs=1e-9)


def test_single_sequence_single_feasible_degree():
    cluster = ClusterSpec(2, 2, 1.0, 0.5, 10.0)
    coeffs = CostCoefficients(0.0, 1.0, 0.0, 1.0, 0.0, m_token=1.0, m_ms=0.0)
    catalog = build_virtual_catalog(cluster)
    buckets = make_buckets([16], [1])  # only degree 2 holds 16 tokens (budget 10/device)
    inst = build_instance(buckets, catalog, coeffs, cluster)
    sol = solve(inst)
    assert sol.status == "optimal"
    assert sol.selection[0] == 1 and sol.assignment[0][0] == 1
    expected = group_time(GroupLoad([16], 2, 1.0), coeffs)
    assert sol.objective == pytest.approx(expected, rel=1e-12)


def test_oracle_equality_random():
    rng = np.random.default_rng(2024)
    optimal = infeasible = 0
    for _ in range(40):
        inst = random_tiny_instance(rng)
        a = solve(inst)
        b = solve_bruteforce(inst)
        assert a.status == b.status, (a.status, b.status, a.message)
        if a.status == "optimal":
            assert abs(a.objective - b.objective) <= 1e-9 * max(1.0, abs(b.objective))
            assert verify_solution(inst, a) == []
            optimal += 1
        else:
            infeasible += 1
    assert optimal > 10  # the generator must exercise real instances


def test_never_worse_than_any_homogeneous_configuration():
    rng = np.random.default_rng(7)
    for _ in range(10):
        inst = random_tiny_instance(rng)
        best = solve(inst)
        if best.status != "optimal":
            continue
        n = inst.cluster.total_devices
        degrees = inst.catalog.degrees()
        d = 1
        while d <= n:
            class_slots = [p for p in range(inst.num_slots) if degrees[p] == d]
            for k in range(1, n // d + 1):
                selection = [0] * inst.num_slots
                for p in class_slots[:k]:
                    selection[p] = 1
                homo = solve(inst, fixed_selection=selection)
                if homo.status == "optimal":
                    assert best.objective <= homo.objective + 1e-9
            d *= 2


def test_determinism_repeated_and_threaded():
    from concurrent.futures import ThreadPoolExecutor

    rng = np.random.default_rng(11)
    instances = [random_tiny_instance(rng) for _ in range(8)]
    serial = [solve(inst) for inst in instances]
    again = [solve(inst) for inst in instances]
    with ThreadPoolExecutor(max_workers=4) as pool:
        threaded = list(pool.map(solve, instances))
    for a, b, c in zip(serial, again, threaded):
        assert (a.selection, a.assignment, a.objective, a.status) == \
               (b.selection, b.assignment, b.objective, b.status) == \
               (c.selection, c.assignment, c.objective, c.status)


def test_infeasible_memory_family():
    cluster = ClusterSpec(2, 2, 1.0, 0.5, 10.0)
    coeffs = CostCoefficients(0.0, 1.0, 0.0, 1.0, 0.0, m_token=1.0, m_ms=0.0)
    inst = build_instance(make_buckets([64], [1]), build_virtual_catalog(cluster), coeffs, cluster)
    sol = solve(inst)
    assert sol.status == "infeasible"
    assert sol.infeasible_family == "memory"
    assert "64" in sol.message


def test_infeasible_total_mass_is_memory_family():
    # three sequences of 10 need 30 tokens of activation memory; the cluster holds 20
    cluster = ClusterSpec(2, 2, 1.0, 0.5, 10.0)
    coeffs = CostCoefficients(0.0, 1.0, 0.0, 1.0, 0.0, m_token=1.0, m_ms=0.0)
    inst = build_instance(make_buckets([10], [3]), build_virtual_catalog(cluster), coeffs, cluster)
    sol = solve(inst)
    assert sol.status == "infeasible"
    assert sol.infeasible_family == "memory"
    assert solve_bruteforce(inst).status == "infeasible"


def test_infeasible_coverage_family():
    # degree capped at 1: four slots hold one 7-token sequence each, five given
    cluster = ClusterSpec(4, 4, 1.0, 0.5, 10.0)
    coeffs = CostCoefficients(0.0, 1.0, 0.0, 1.0, 0.0, m_token=1.0, m_ms=0.0)
    catalog = build_virtual_catalog(cluster, max_degree=1)
    inst = build_instance(make_buckets([7], [5]), catalog, coeffs, cluster)
    sol = solve(inst)
    assert sol.status == "infeasible"
    assert sol.infeasible_family == "coverage"


def test_strict_device_equality():
    inst_loose = hand_instance(strict_device_equality=False)
    inst_strict = hand_instance(strict_device_equality=True)
    loose, strict = solve(inst_loose), solve(inst_strict)
    assert strict.status == "optimal"
    used = sum(d * m for d, m in zip(inst_strict.catalog.degrees(), strict.selection))
    assert used == 2
    assert loose.objective <= strict.objective + 1e-9


def test_symmetry_breaking_does_not_change_objective():
    rng = np.random.default_rng(31)
    for _ in range(10):
        inst = random_tiny_instance(rng)
        base_opts = PlannerOptions(strict_device_equality=inst.options.strict_device_equality,
                                   symmetry_breaking=True)
        alt_opts = PlannerOptions(strict_device_equality=inst.options.strict_device_equality,
                                  symmetry_breaking=False)
        a = solve(build_instance(inst.buckets, inst.catalog, inst.coeffs, inst.cluster, base_opts))
        b = solve(build_instance(inst.buckets, inst.catalog, inst.coeffs, inst.cluster, alt_opts))
        assert a.status == b.status
        if a.status == "optimal":
            assert a.objective == pytest.approx(b.objective, abs=1e-9)


def test_extract_plan_dispatch():
    cluster = ClusterSpec(4, 4, 1.0, 0.5, 20.0)
    coeffs = CostCoefficients(0.0, 1.0, 0.1, 1.0, 0.05, m_token=1.0, m_ms=0.0)
    catalog = build_virtual_catalog(cluster)
    lengths = [9, 7, 10, 8]
    buckets = exact_buckets(lengths)
    inst = build_instance(buckets, catalog, coeffs, cluster)
    sol = solve(inst)
    assert sol.status == "optimal"
    plan = extract_plan(sol, inst, lengths)
    dispatched = sorted(k for grp in plan.selected_groups for k in grp.sequence_indices)
    assert dispatched == [0, 1, 2, 3]
    assert plan.plan_warnings == ()
    for grp in plan.selected_groups:
        assert grp.true_memory_bytes <= grp.memory_bytes + 1e-9
        assert grp.comp_time + grp.comm_time <= plan.predicted_makespan * (1 + 1e-9)
    assert plan.predicted_makespan == sol.objective


def test_extract_plan_true_memory_dominance_random():
    rng = np.random.default_rng(5)
    for _ in range(20):
        inst = random_tiny_instance(rng)
        sol = solve(inst)
        if sol.status != "optimal":
            continue
        lengths = [0] * inst.buckets.total_sequences
        for limit, members in zip(inst.buckets.upper_limits, inst.buckets.member_indices):
            for k in members:
                lengths[k] = int(limit - rng.integers(0, min(limit, 3)))
        lengths = [max(1, s) for s in lengths]
        plan = extract_plan(sol, inst, lengths)
        assert plan.plan_warnings == ()
        for grp in plan.selected_groups:
            assert grp.true_memory_bytes <= grp.memory_bytes + 1e-9


def test_instance_dump_lists_constraints():
    inst = hand_instance()
    dump = inst.to_json_dict()
    text = json.dumps(dump)
    assert "time[p=0]" in text and "coverage[q=0]" in text and "devices:" in text
    assert dump["num_slots"] == 3 and dump["num_buckets"] == 1


def test_bruteforce_guards():
    cluster = ClusterSpec(16, 16, 1.0, 0.5, 1000.0)
    coeffs = CostCoefficients(0.0, 1.0, 0.0, 1.0, 0.0, m_token=1.0, m_ms=0.0)
    inst = build_instance(make_buckets([5], [2]), build_virtual_catalog(cluster), coeffs, cluster)
    with pytest.raises(ValidationError):
        solve_bruteforce(inst)  # 31 slots > brute-force bound


def test_time_limit_option_accepted():
    inst = hand_instance(time_limit=30.0)
    sol = solve(inst)
    assert sol.status in ("optimal", "time_limit_incumbent")
    assert sol.objective == pytest.approx(30.0, abs=1e-9)
