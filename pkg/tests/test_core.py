import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from privtd import core
from privtd.core import CSVFormatError, GroundTruth, ObservationTable, TableError, WeightVector, mae

from conftest import random_table

finite = st.floats(-1e6, 1e6, allow_nan=False)


def test_mae_examples():
    assert mae([1, 2, 3], [1, 2, 3]) == 0.0
    assert mae([1, 2], [2, 4]) == 1.5


def test_mae_symmetric_random_pairs(rng):
    for _ in range(100):
        n = int(rng.integers(1, 50))
        a, b = rng.normal(size=n), rng.normal(size=n)
        assert mae(a, b) == mae(b, a)


@given(st.lists(st.tuples(finite, finite, finite), min_size=1, max_size=40))
def test_mae_metric_properties(triples):
    a, b, c = map(np.array, zip(*triples))
    assert mae(a, b) >= 0
    assert mae(a, a) == 0
    assert mae(a, c) <= mae(a, b) + mae(b, c) + 1e-9 * (1 + mae(a, b) + mae(b, c))
    assert (mae(a, b) == 0) == np.array_equal(a, b)


@pytest.mark.parametrize("a,b", [([], []), ([1.0], [1.0, 2.0]), ([np.nan], [1.0])])
def test_mae_errors(a, b):
    with pytest.raises(ValueError):
        mae(a, b)


def test_table_sorted_and_immutable():
    t = ObservationTable([1, 0, 1, 0], [0, 1, 1, 0], [4.0, 2.0, 5.0, 1.0])
    assert t.objects.tolist() == [0, 0, 1, 1]
    assert t.users.tolist() == [0, 1, 0, 1]
    assert t.values.tolist() == [1.0, 2.0, 4.0, 5.0]
    with pytest.raises(ValueError):
        t.values[0] = 9
    with pytest.raises(AttributeError):
        t.n_users = 3


@pytest.mark.parametrize(
    "obj,usr,val,kw",
    [
        ([0, 0], [0, 0], [1.0, 2.0], {}),  # duplicate pair
        ([0, 1], [0, 0], [1.0, np.inf], {}),  # non-finite
        ([0], [0], [1.0], {"n_objects": 2}),  # object without observers
        ([0], [0], [1.0], {"n_users": 2}),  # user without observations
        ([], [], [], {}),
        ([-1], [0], [1.0], {}),
    ],
)
def test_table_invariants(obj, usr, val, kw):
    with pytest.raises(TableError):
        ObservationTable(obj, usr, val, **kw)


def test_dense_roundtrip():
    m = np.array([[1.0, np.nan], [3.0, 4.0]])
    t = ObservationTable.from_dense(m)
    assert len(t) == 3
    np.testing.assert_array_equal(t.to_dense(), m)


def test_weight_vector_invariants():
    WeightVector([0.0, 1.0])
    for bad in ([0.0, 0.0], [-1.0, 2.0], [np.nan, 1.0], []):
        with pytest.raises(ValueError):
            WeightVector(bad)


def test_table_csv_roundtrip_bit_exact(tmp_path, rng):
    for _ in range(20):
        t = random_table(rng)
        t = t.with_values(t.values * 10.0 ** rng.integers(-300, 300, len(t)))
        core.write_table(t, tmp_path / "t.csv")
        assert core.read_table(tmp_path / "t.csv") == t


def test_csv_format_is_plain(tmp_path):
    t = ObservationTable([0, 0], [0, 1], [0.1, 2.0])
    core.write_table(t, tmp_path / "t.csv")
    raw = (tmp_path / "t.csv").read_bytes()
    assert raw == b"object,user,value\n0,0,0.10000000000000001\n0,1,2\n"


def test_truth_csv_roundtrip(tmp_path):
    g = GroundTruth(np.array([1.5, -2.25, 1 / 3]))
    core.write_truth(g, tmp_path / "g.csv")
    np.testing.assert_array_equal(core.read_truth(tmp_path / "g.csv").values, g.values)


@pytest.mark.parametrize(
    "text,row",
    [
        ("object,user,value\n0,0,1\n0,1,abc\n", 3),
        ("object,user,value\n0,0\n", 2),
        ("obj,user,value\n0,0,1\n", 1),
        ("object,user,value\n0,x,1\n", 2),
        ("object,user,value\n0,0,nan\n", 2),
    ],
)
def test_malformed_csv_reports_row(tmp_path, text, row):
    p = tmp_path / "bad.csv"
    p.write_text(text)
    with pytest.raises(CSVFormatError) as ei:
        core.read_table(p)
    assert ei.value.row == row
    assert f"row {row}" in str(ei.value)
