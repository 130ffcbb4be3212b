import itertools

import numpy as np
import pytest

from core.errors import InstanceError, NoiseSpecError, UncertaintyBudgetError
from core.instance import GroupAssignment
from core.noise import ErrorModelSpec, NoiseParams, derive
from core.uncertainty import (
    Coloring,
    count_two_color_symmetric,
    enumerate_uncertainty_set,
    in_uncertainty_set,
)
from oracles import BLUE, RED, toy_caps

# Labels r, b, r, b
TOY = GroupAssignment(labels=(RED, BLUE, RED, BLUE), group_count=2)


def all_colorings(n, groups):
    return [Coloring(labels=labels) for labels in itertools.product(range(groups), repeat=n)]


def test_base_is_member():
    assert in_uncertainty_set(TOY, Coloring.of(TOY), toy_caps(2, 1))
    assert in_uncertainty_set(TOY, Coloring.of(TOY), NoiseParams.zero((2, 2)))


def test_toy_membership_examples():
    params = toy_caps(2, 1)
    swap_three = Coloring(labels=(BLUE, RED, BLUE, BLUE))
    all_red = Coloring(labels=(RED, RED, RED, RED))
    assert in_uncertainty_set(TOY, swap_three, params)
    assert not in_uncertainty_set(TOY, all_red, params)
    assert in_uncertainty_set(TOY, all_red, toy_caps(2, 2))


def test_toy_enumeration_counts():
    assert len(enumerate_uncertainty_set(TOY, toy_caps(2, 1))) == 12
    assert len(enumerate_uncertainty_set(TOY, toy_caps(2, 2))) == 16


def test_zero_caps_enumerate_only_base():
    base = GroupAssignment(labels=(0, 2, 1, 1, 0), group_count=3)
    assert enumerate_uncertainty_set(base, NoiseParams.zero(base.sizes)) == [Coloring.of(base)]


def test_enumeration_is_lexicographic():
    colorings = enumerate_uncertainty_set(TOY, toy_caps(2, 2))
    labels = [c.labels for c in colorings]
    assert labels == sorted(labels)


def test_enumeration_matches_membership_on_random_bases():
    rng = np.random.default_rng(0)
    for _ in range(40):
        n = int(rng.integers(1, 9))
        base = GroupAssignment(labels=tuple(int(v) for v in rng.integers(0, 2, size=n)), group_count=2)
        out_caps = [int(v) for v in rng.integers(0, 3, size=2)]
        params = NoiseParams.from_caps(out_caps[::-1], out_caps, base.sizes)
        members = {c.labels for c in enumerate_uncertainty_set(base, params)}
        expected = {c.labels for c in all_colorings(n, 2) if in_uncertainty_set(base, c, params)}
        assert members == expected


def test_shrinking_caps_never_grows_the_set():
    rng = np.random.default_rng(1)
    for _ in range(30):
        n = int(rng.integers(2, 8))
        base = GroupAssignment(labels=tuple(int(v) for v in rng.integers(0, 2, size=n)), group_count=2)
        big = [int(v) for v in rng.integers(1, 4, size=2)]
        small = [max(0, v - int(rng.integers(0, 2))) for v in big]
        wide = NoiseParams.from_caps(big[::-1], big, base.sizes)
        narrow = NoiseParams.from_caps(small[::-1], small, base.sizes)
        inner = {c.labels for c in enumerate_uncertainty_set(base, narrow)}
        outer = {c.labels for c in enumerate_uncertainty_set(base, wide)}
        assert inner <= outer


def test_aggregate_cap_limits_total_flips():
    base = GroupAssignment(labels=(0, 1, 2), group_count=3)
    params = derive(ErrorModelSpec.bae(1), base.sizes)
    assert not in_uncertainty_set(base, Coloring(labels=(1, 2, 0)), params)
    assert in_uncertainty_set(base, Coloring(labels=(1, 1, 2)), params)
    # one flip at a time: 3 points x 2 other labels, plus the base
    assert len(enumerate_uncertainty_set(base, params)) == 7


def test_pairwise_caps_are_enforced():
    base = GroupAssignment(labels=(0, 0, 1, 1, 2, 2), group_count=3)
    cycle = [[0, 1, 0], [0, 0, 1], [1, 0, 0]]
    params = derive(ErrorModelSpec.bpe(cycle), base.sizes)
    forward = Coloring(labels=(1, 0, 2, 1, 0, 2))
    backward = Coloring(labels=(2, 0, 0, 1, 1, 2))
    assert in_uncertainty_set(base, forward, params)
    assert not in_uncertainty_set(base, backward, params)
    # same per-group caps without the matrix admit the reversed cycle
    loose = NoiseParams.from_caps(params.inflow, params.outflow, base.sizes)
    assert in_uncertainty_set(base, backward, loose)


def test_budget_exceeded():
    with pytest.raises(UncertaintyBudgetError):
        enumerate_uncertainty_set(TOY, toy_caps(2, 2), limit=15)


def test_universe_mismatch():
    with pytest.raises(InstanceError):
        in_uncertainty_set(TOY, Coloring(labels=(0, 1, 0)), toy_caps(1, 1))
    with pytest.raises(InstanceError):
        in_uncertainty_set(TOY, Coloring(labels=(0, 1, 0, 5)), toy_caps(1, 1))


def test_two_color_count_examples():
    assert count_two_color_symmetric(2, 2, 2) == 16
    assert count_two_color_symmetric(2, 2, 0) == 1
    with pytest.raises(NoiseSpecError):
        count_two_color_symmetric(-1, 2, 1)


def test_two_color_count_matches_enumeration():
    for n1 in range(0, 11):
        for n2 in range(0, 11 - n1):
            if n1 + n2 == 0:
                continue
            base = GroupAssignment(labels=(0,) * n1 + (1,) * n2, group_count=2)
            for m in range(0, 4):
                params = NoiseParams.uniform(m, base.sizes)
                count = len(enumerate_uncertainty_set(base, params, limit=10 ** 6))
                assert count == count_two_color_symmetric(n1, n2, m), (n1, n2, m)


def test_big_counts_are_exact():
    assert count_two_color_symmetric(60, 60, 60) == 2 ** 120
