import itertools

import numpy as np
import pytest

from core.errors import InstanceError
from core.instance import (
    GroupAssignment,
    Instance,
    ProportionBounds,
    candidate_radii,
    distance,
    load_csv,
    load_groups,
)
from oracles import random_instance


def write(path, text):
    path.write_text(text, encoding='utf-8')
    return path


def test_load_toy_csv(tmp_path):
    path = write(tmp_path / "toy.csv", "x,y,color\n0,0,r\n3,4,b\n0,0,r\n3,4,b\n")
    inst = load_csv(path, ["x", "y"], "color", k=2, normalization="none")
    assert inst.n == 4
    assert inst.group_count == 2
    assert inst.group_sizes == (2, 2)
    assert inst.groups.names == ("r", "b")
    assert inst.bounds is None
    assert distance(inst, 0, 1) == 5.0


def test_minmax_normalization(tmp_path):
    path = write(tmp_path / "col.csv", "v,g\n10,a\n20,b\n30,a\n")
    inst = load_csv(path, ["v"], "g", k=1)
    assert inst.features[:, 0].tolist() == [0.0, 0.5, 1.0]


def test_constant_column_maps_to_zero(tmp_path):
    path = write(tmp_path / "const.csv", "v,w,g\n5,1,a\n5,2,b\n5,3,a\n")
    inst = load_csv(path, ["v", "w"], "g", k=1)
    assert inst.features[:, 0].tolist() == [0.0, 0.0, 0.0]


def test_labels_reindexed_by_first_appearance(tmp_path):
    path = write(tmp_path / "g.csv", "v,g\n1,zeta\n2,alpha\n3,zeta\n4,beta\n")
    inst = load_csv(path, ["v"], "g", k=1)
    assert inst.groups.labels == (0, 1, 0, 2)
    assert inst.groups.names == ("zeta", "alpha", "beta")


def test_bank_like_group_tally(bank_csv):
    path, frame = bank_csv
    inst = load_csv(path, ["age", "balance", "duration"], "marital", k=10)
    tally = frame["marital"].value_counts()
    first = frame["marital"].iloc[0]
    other = "single" if first == "married" else "married"
    assert inst.group_count == 2
    assert inst.group_sizes == (tally[first], tally[other])


def test_reload_is_bit_identical(bank_csv):
    path, _ = bank_csv
    a = load_csv(path, ["age", "balance"], "marital", k=3)
    b = load_csv(path, ["age", "balance"], "marital", k=3)
    assert np.array_equal(a.features, b.features)
    assert a.groups == b.groups
    assert a.candidate_radii() == b.candidate_radii()


@pytest.mark.parametrize("text,columns,message", [
    ("x,g\n1,a\n", ["y"], "column 'y'"),
    ("x,g\n1,a\nfoo,b\n", ["x"], "row 3"),
    ("x,g\n1,a\n2,\n", ["x"], "empty group label"),
])
def test_load_errors_carry_context(tmp_path, text, columns, message):
    path = write(tmp_path / "bad.csv", text)
    with pytest.raises(InstanceError, match=message):
        load_csv(path, columns, "g", k=1)


def test_unparseable_cell_reports_row_and_column(tmp_path):
    path = write(tmp_path / "bad.csv", "x,g\n1,a\nfoo,b\n")
    with pytest.raises(InstanceError) as info:
        load_csv(path, ["x"], "g", k=1)
    assert info.value.row == 3
    assert info.value.column == "x"


def test_empty_and_missing_files(tmp_path):
    with pytest.raises(InstanceError, match="does not exist"):
        load_csv(tmp_path / "nope.csv", ["x"], "g", k=1)
    with pytest.raises(InstanceError, match="empty"):
        load_csv(write(tmp_path / "empty.csv", ""), ["x"], "g", k=1)
    with pytest.raises(InstanceError, match="no rows"):
        load_csv(write(tmp_path / "header.csv", "x,g\n"), ["x"], "g", k=1)


def test_k_larger_than_n_is_rejected(tmp_path):
    path = write(tmp_path / "small.csv", "x,g\n1,a\n2,b\n")
    with pytest.raises(InstanceError, match="k=3"):
        load_csv(path, ["x"], "g", k=3)


def test_load_groups_only(tmp_path):
    path = write(tmp_path / "g.csv", "x,g\n1,b\n2,a\n3,b\n")
    groups = load_groups(path, "g")
    assert groups.labels == (0, 1, 0)
    assert groups.sizes == (2, 1)


def test_distance_basics(toy):
    assert toy.distance(0, 1) == 5.0
    assert toy.distance(1, 0) == 5.0
    assert toy.distance(2, 2) == 0.0
    # Distinct ids at the same coordinates are legal
    assert toy.distance(0, 2) == 0.0
    with pytest.raises(InstanceError):
        toy.distance(0, 4)


def test_triangle_inequality_on_random_points():
    rng = np.random.default_rng(3)
    inst = random_instance(rng, 5, 2)
    for i, j, l in itertools.product(range(5), repeat=3):
        assert inst.distance(i, l) <= inst.distance(i, j) + inst.distance(j, l) + 1e-9


def test_dense_and_on_demand_distances_agree():
    rng = np.random.default_rng(11)
    features = rng.random((12, 3))
    labels = [j % 2 for j in range(12)]
    dense = Instance.from_arrays(features, labels, k=2)
    lazy = Instance.from_arrays(features, labels, k=2, dense_threshold=0)
    assert dense.is_dense and not lazy.is_dense
    for i in range(12):
        for j in range(12):
            assert dense.distance(i, j) == dense.distance(j, i)
            assert lazy.distance(i, j) == lazy.distance(j, i)
            assert dense.distance(i, j) == pytest.approx(lazy.distance(i, j), abs=1e-12)
    assert dense.candidate_radii() == pytest.approx(lazy.candidate_radii())


def test_candidate_radii_examples():
    single = Instance.from_arrays([[1.0]], [0], k=1)
    assert candidate_radii(single) == [0.0]
    line = Instance.from_arrays([[0.0], [1.0], [2.0]], [0, 1, 0], k=1)
    assert candidate_radii(line) == [0.0, 1.0, 2.0]


def test_candidate_radii_match_naive_enumeration():
    rng = np.random.default_rng(5)
    inst = random_instance(rng, 6, 2)
    naive = {inst.distance(i, j) for i in range(6) for j in range(i + 1, 6)}
    radii = inst.candidate_radii()
    assert len(radii) == 1 + len(naive - {0.0})
    assert radii == sorted(radii)
    assert naive <= set(radii)


def test_distance_hook_is_used():
    manhattan = lambda a, b: float(np.abs(a - b).sum())
    inst = Instance.from_arrays([[0, 0], [3, 4]], [0, 1], k=1, distance_hook=manhattan)
    assert inst.distance(0, 1) == 7.0


def test_instance_validation():
    with pytest.raises(InstanceError, match="k=0"):
        Instance.from_arrays([[0.0], [1.0]], [0, 1], k=0)
    with pytest.raises(InstanceError, match="bounds cover"):
        Instance.from_arrays([[0.0], [1.0]], [0, 1], k=1, bounds=ProportionBounds.uniform(0.2, 0.8, 3))
    with pytest.raises(InstanceError):
        GroupAssignment(labels=(0, 2), group_count=2)


def test_proportion_bounds():
    assert ProportionBounds.parse("0.1:0.6,0.2:0.7") == ProportionBounds((0.1, 0.2), (0.6, 0.7))
    with pytest.raises(InstanceError):
        ProportionBounds.parse("0.1-0.6")
    with pytest.raises(InstanceError):
        ProportionBounds((0.0,), (0.5,))
    with pytest.raises(InstanceError):
        ProportionBounds((0.6,), (0.5,))


def test_ratio_and_copies(toy):
    assert toy.ratio(0) == 0.5
    bounded = toy.with_bounds(ProportionBounds.uniform(0.25, 0.75, 2))
    assert bounded.bounds.lower == (0.25, 0.25)
    assert toy.bounds is None
    assert bounded.with_k(1).k == 1
    assert toy.max_distance() == 5.0


def test_features_are_read_only(toy):
    with pytest.raises(ValueError):
        toy.features[0, 0] = 1.0


def test_subsample_is_seeded():
    rng = np.random.default_rng(2)
    inst = random_instance(rng, 8, 3)
    a = inst.subsample(5, seed=1)
    b = inst.subsample(5, seed=1)
    assert a.n == 5
    assert np.array_equal(a.features, b.features)
    assert a.groups.labels == b.groups.labels
