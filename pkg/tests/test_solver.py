import numpy as np
import pytest

from core.centers import CenterPolicy
from core.config import configure
from core.errors import InfeasibleInstanceError, InstanceError, NoiseSpecError
from core.instance import ProportionBounds, load_csv
from core.noise import NoiseParams, auto_bounds
from core.solver import SolveOptions, deterministic_fair_solve, robust_solve
from oracles import optimal_robust_radius, random_instance


def small_instances(seed, count, n=6):
    rng = np.random.default_rng(seed)
    for _ in range(count):
        inst = random_instance(rng, n, 2, bounds=ProportionBounds.uniform(0.2, 0.8, 2))
        yield inst, NoiseParams.uniform(int(rng.integers(0, 2)), inst.group_sizes)


def test_noise_forces_a_single_cluster(two_pairs, unit_caps):
    solution = robust_solve(two_pairs, unit_caps)
    assert solution.centers == (0,)
    assert solution.assignment == (0, 0, 0, 0)
    assert solution.found_radius == 10.0
    assert solution.cost == 10.0
    assert [(p.radius, p.verdict) for p in solution.search_trace] == [(10.0, 'feasible'), (0.0, 'infeasible')]


def test_zero_noise_keeps_both_pairs(two_pairs):
    solution = deterministic_fair_solve(two_pairs)
    assert solution.centers == (0, 2)
    assert solution.assignment == (0, 0, 2, 2)
    assert solution.cost == 0.0
    assert solution.clusters() == {0: [0, 1], 2: [2, 3]}
    assert solution.cluster_sizes() == {0: 2, 2: 2}


def test_zero_caps_match_deterministic_solver():
    for inst, _ in small_instances(40, 10):
        try:
            expected = deterministic_fair_solve(inst)
        except InfeasibleInstanceError:
            continue
        actual = robust_solve(inst, NoiseParams.zero(inst.group_sizes))
        assert actual.assignment == expected.assignment
        assert actual.found_radius == expected.found_radius


def test_cost_within_three_times_optimum():
    checked = 0
    for inst, params in small_instances(41, 25):
        best = optimal_robust_radius(inst, params)
        if best is None:
            with pytest.raises(InfeasibleInstanceError):
                robust_solve(inst, params)
            continue
        checked += 1
        solution = robust_solve(inst, params)
        assert solution.found_radius <= best + 1e-9
        assert solution.cost <= 3 * best + 1e-9
        assert solution.num_centers <= inst.k
        assert set(solution.assignment) == set(solution.centers)
    assert checked > 5


def test_linear_scan_finds_no_larger_radius():
    for inst, params in small_instances(42, 10):
        try:
            searched = robust_solve(inst, params)
        except InfeasibleInstanceError:
            continue
        scanned = robust_solve(inst, params, SolveOptions(linear_scan=True))
        assert scanned.found_radius <= searched.found_radius
        assert len(scanned.search_trace) == len(inst.candidate_radii())


def test_random_policy_is_reproducible():
    rng = np.random.default_rng(43)
    inst = random_instance(rng, 10, 3, bounds=ProportionBounds.uniform(0.1, 0.9, 2))
    params = NoiseParams.zero(inst.group_sizes)
    options = SolveOptions(policy=CenterPolicy.RANDOM, seed=5)
    first = robust_solve(inst, params, options)
    second = robust_solve(inst, params, options)
    assert first.assignment == second.assignment
    assert first.found_radius == second.found_radius


def test_one_cluster_test_failure_names_groups(toy, unit_caps):
    inst = toy.with_bounds(ProportionBounds.uniform(0.5, 0.5 + 1e-9, 2))
    with pytest.raises(InfeasibleInstanceError) as info:
        robust_solve(inst, unit_caps)
    assert info.value.groups == [0, 1]


def test_inconsistent_caps(two_pairs):
    with pytest.raises(NoiseSpecError, match="inconsistent"):
        robust_solve(two_pairs, NoiseParams.from_caps([5, 1], [1, 1], (2, 2)))


def test_bounds_required(toy, unit_caps):
    with pytest.raises(InstanceError):
        robust_solve(toy, unit_caps)


def test_fractional_trace_respects_limit(two_pairs, unit_caps):
    assert robust_solve(two_pairs, unit_caps).fractional_trace is not None
    configure(trace_limit=3)
    assert robust_solve(two_pairs, unit_caps).fractional_trace is None
    assert robust_solve(two_pairs, unit_caps, SolveOptions(keep_trace=False)).fractional_trace is None


def test_bank_like_instance_with_auto_bounds(bank_csv):
    path, _ = bank_csv
    inst = load_csv(path, ["age", "balance", "duration"], "marital", k=4)
    params = NoiseParams.uniform(3, inst.group_sizes)
    inst = inst.with_bounds(auto_bounds(inst, params))
    solution = robust_solve(inst, params)
    assert len(solution.assignment) == inst.n
    assert solution.num_centers == 1
    assert solution.cost <= 3 * solution.found_radius + 1e-9


def assert_lower_rows_survive(solution, inst, params):
    labels = inst.groups.labels
    for center, members in solution.clusters().items():
        for h in range(inst.group_count):
            count = sum(1 for j in members if labels[j] == h)
            assert count >= params.outflow[h] - 1
    frac = solution.fractional_trace
    if frac is not None:
        for center in frac.centers:
            if frac.center_mass(center) > 1e-6:
                for h in range(inst.group_count):
                    assert frac.group_mass(center, h) > params.outflow[h] - 1e-6


def test_every_cluster_keeps_enough_of_each_group():
    rng = np.random.default_rng(44)
    checked = 0
    for _ in range(40):
        inst = random_instance(rng, int(rng.integers(6, 16)), 3, bounds=ProportionBounds.uniform(0.1, 0.9, 2))
        m = int(rng.integers(0, 3))
        if min(inst.group_sizes) < m:
            continue
        params = NoiseParams.uniform(m, inst.group_sizes)
        try:
            solution = robust_solve(inst, params)
        except InfeasibleInstanceError:
            continue
        checked += 1
        assert_lower_rows_survive(solution, inst, params)
    assert checked > 5


@pytest.mark.slow
@pytest.mark.parametrize("seed", range(6))
def test_cost_within_three_times_optimum_up_to_eight_points(seed):
    rng = np.random.default_rng(400 + seed)
    checked = 0
    for _ in range(20):
        n = int(rng.integers(5, 9))
        k = int(rng.integers(1, 4))
        inst = random_instance(rng, n, k, bounds=ProportionBounds.uniform(0.2, 0.8, 2))
        params = NoiseParams.uniform(int(rng.integers(0, 2)), inst.group_sizes)
        best = optimal_robust_radius(inst, params)
        if best is None:
            with pytest.raises(InfeasibleInstanceError):
                robust_solve(inst, params)
            continue
        checked += 1
        solution = robust_solve(inst, params)
        assert solution.found_radius <= best + 1e-9
        assert solution.cost <= 3 * best + 1e-9
        assert solution.num_centers <= k
        assert_lower_rows_survive(solution, inst, params)
    assert checked > 0
