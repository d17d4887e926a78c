import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dpwate.dataset import (
    CausalDataset,
    Schema,
    load_csv,
    partition_health,
    random_partition,
    write_csv,
)
from dpwate.exceptions import InputError, ParameterError, SchemaError, ValidationError


def write(tmp_path, text, name="d.csv"):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


def test_load_small_csv(tmp_path):
    p = write(tmp_path, "y,z,x1,x2\n1,0,0.5,1\n0,1,1.5,2\n1,1,-2,3\n0,0,0,4\n")
    d = load_csv(p)
    assert (d.n, d.p) == (4, 2)
    np.testing.assert_array_equal(d.outcomes, [1, 0, 1, 0])
    np.testing.assert_array_equal(d.treatments, [0, 1, 1, 0])
    np.testing.assert_array_equal(d.covariates[:, 0], [0.5, 1.5, -2, 0])
    assert d.covariate_names == ("x1", "x2")


def test_non_binary_outcome_names_row(tmp_path):
    p = write(tmp_path, "y,z,x1\n1,0,0\n0,1,1\n2,1,2\n")
    with pytest.raises(ValidationError, match="row 2") as info:
        load_csv(p)
    assert info.value.row == 2


def test_missing_column(tmp_path):
    p = write(tmp_path, "y,x1\n1,0\n")
    with pytest.raises(SchemaError, match="z"):
        load_csv(p)


@pytest.mark.parametrize("text", ["", "y,z,x1\n"])
def test_empty_file(tmp_path, text):
    with pytest.raises(InputError):
        load_csv(write(tmp_path, text))


def test_missing_file(tmp_path):
    with pytest.raises(InputError):
        load_csv(tmp_path / "nope.csv")


ADULT_LIKE = """age,education,marital-status,sex,native-country,income
39,Bachelors,Never-married,Male,United-States,<=50K
50,Bachelors,Married-civ-spouse,Male,United-States,<=50K
38,HS-grad,Divorced,Male,United-States,<=50K
53,11th,Married-civ-spouse,Male,United-States,<=50K
28,Bachelors,Married-civ-spouse,Female,Cuba,<=50K
37,Masters,Married-civ-spouse,Female,United-States,<=50K
49,9th,Married-spouse-absent,Female,Jamaica,<=50K
52,HS-grad,Married-civ-spouse,Male,?,>50K
31,Masters,Never-married,Female,United-States,>50K
42,Bachelors,Married-civ-spouse,Male,United-States,>50K
"""

ADULT_SCHEMA = {
    "outcome": {"column": "income", "positive": [">50K", ">50K."]},
    "treatment": {"column": "education", "positive": ["Bachelors", "Masters", "Prof-school", "Doctorate"]},
    "covariates": [
        "age",
        {"column": "marital-status", "kind": "onehot"},
        {"column": "sex", "kind": "onehot"},
        {"column": "native-country", "positive": ["United-States"]},
    ],
}


def test_declarative_binarization_and_missing_rows(tmp_path):
    d = load_csv(write(tmp_path, ADULT_LIKE), Schema.from_dict(ADULT_SCHEMA))
    assert d.n == 9  # the row with '?' is dropped
    assert d.dropped_rows == 1
    np.testing.assert_array_equal(d.treatments, [1, 1, 0, 0, 1, 1, 0, 1, 1])
    np.testing.assert_array_equal(d.outcomes, [0, 0, 0, 0, 0, 0, 0, 1, 1])
    # age + 3 marital dummies (4 levels, drop first) + sex dummy + US indicator
    assert d.p == 6
    assert d.covariate_names[-1] == "native-country"
    np.testing.assert_array_equal(d.covariates[:, -1], [1, 1, 1, 1, 0, 1, 0, 1, 1])


def test_threshold_rule(tmp_path):
    p = write(tmp_path, "inc,edu,x\n60000,16,1\n20000,12,2\n50000,13,3\n")
    d = load_csv(p, Schema.from_dict({"outcome": {"column": "inc", "threshold": 50000},
                                      "treatment": {"column": "edu", "threshold": 13}}))
    np.testing.assert_array_equal(d.outcomes, [1, 0, 1])
    np.testing.assert_array_equal(d.treatments, [1, 0, 1])


def test_schema_rejects_unknown_keys():
    with pytest.raises(SchemaError):
        Schema.from_dict({"outcomes": "y"})


def test_csv_round_trip(tmp_path, sim_data):
    p = tmp_path / "rt.csv"
    write_csv(sim_data, p)
    back = load_csv(p)
    np.testing.assert_array_equal(back.outcomes, sim_data.outcomes)
    np.testing.assert_array_equal(back.treatments, sim_data.treatments)
    np.testing.assert_array_equal(back.covariates, sim_data.covariates)


def test_dataset_is_immutable(sim_data):
    with pytest.raises(ValueError):
        sim_data.outcomes[0] = 1


def test_dataset_length_mismatch():
    with pytest.raises(ValidationError):
        CausalDataset([0, 1], [0, 1, 1], np.zeros((2, 1)))


def test_partition_n10_m5():
    parts = random_partition(10, 5, seed=3)
    np.testing.assert_array_equal(parts.partition_sizes, [2] * 5)


def test_partition_simulation_size():
    parts = random_partition(10000, 100, seed=0)
    assert set(parts.partition_sizes) == {100}


def test_partition_deterministic():
    a = random_partition(500, 7, seed=42)
    b = random_partition(500, 7, seed=42)
    c = random_partition(500, 7, seed=43)
    np.testing.assert_array_equal(a.assignments, b.assignments)
    assert not np.array_equal(a.assignments, c.assignments)


@pytest.mark.parametrize("M", [0, -1, 11])
def test_partition_bad_m(M):
    with pytest.raises(ParameterError):
        random_partition(10, M)


@settings(max_examples=200, deadline=None)
@given(n=st.integers(1, 400), data=st.data())
def test_partition_is_complete_and_balanced(n, data):
    M = data.draw(st.integers(1, n))
    seed = data.draw(st.integers(0, 2**31))
    parts = random_partition(n, M, seed=seed)
    joined = np.sort(np.concatenate(parts.groups()))
    np.testing.assert_array_equal(joined, np.arange(n))
    sizes = parts.partition_sizes
    assert sizes.max() - sizes.min() <= 1
    assert len(sizes) == M


def test_partition_export(tmp_path):
    parts = random_partition(6, 3, seed=1)
    p = tmp_path / "parts.csv"
    parts.to_csv(p)
    lines = p.read_text().splitlines()
    assert lines[0] == "row_index,partition_index"
    assert len(lines) == 7
    assert {int(l.split(",")[1]) for l in lines[1:]} == {1, 2, 3}


def test_partition_health_boundaries():
    # partition 0: 2 treated / 2 control ; partition 1: 1 treated / 3 control
    z = [1, 1, 0, 0, 1, 0, 0, 0]
    d = CausalDataset([0] * 8, z, np.zeros((8, 1)))
    from dpwate.dataset import Partitioning

    parts = Partitioning(np.array([0, 0, 0, 0, 1, 1, 1, 1]), 2)
    h = partition_health(d, parts)
    np.testing.assert_array_equal(h.treated, [2, 1])
    np.testing.assert_array_equal(h.control, [2, 3])
    np.testing.assert_array_equal(h.degenerate_flags, [False, True])


def test_one_treated_in_hundred_is_degenerate():
    z = np.zeros(100, dtype=int)
    z[0] = 1
    d = CausalDataset(np.zeros(100), z, np.zeros((100, 1)))
    h = partition_health(d, random_partition(d, 1))
    assert h.degenerate_flags[0]


def test_no_degenerate_partitions_at_simulation_scale():
    # balanced treatment, n=10000, M=100, 500 partition seeds
    rng = np.random.default_rng(0)
    z = rng.permutation(np.repeat([0, 1], 5000))
    d = CausalDataset(np.zeros(10000), z, np.zeros((10000, 1)))
    degenerate = sum(partition_health(d, random_partition(d, 100, seed=s)).n_degenerate for s in range(500))
    assert degenerate == 0
