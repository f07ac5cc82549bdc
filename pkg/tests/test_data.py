import numpy as np
import pytest

from mcdn.data import Dataset, read_csv, write_csv
from mcdn.errors import DataError
from mcdn.graph import Admg, continuous, ordinal


def _graph():
    return Admg(["A", "Y"], [("A", "Y")], kinds={"A": ordinal(3), "Y": continuous()})


def test_csv_round_trip(tmp_path):
    g = _graph()
    d = Dataset(["Y", "A"], [[0.1, 2], [-1e-17, 0]], g.kinds)
    path = tmp_path / "d.csv"
    write_csv(d, path)
    assert path.read_text() == "Y,A\n0.1,2\n-1e-17,0\n"
    back = read_csv(path, g)
    assert np.array_equal(back.values, d.values)
    assert back.aligned(g).tolist() == [[2.0, 0.1], [0.0, -1e-17]]


@pytest.mark.parametrize("body,line", [
    ("A,Y\n1,0.5\n2\n", 3),
    ("A,Y\n1.5,0.5\n", 2),
    ("A,Y\n3,0.5\n", 2),
    ("A,Y\n0,abc\n", 2),
])
def test_csv_errors_carry_line(tmp_path, body, line):
    path = tmp_path / "bad.csv"
    path.write_text(body)
    with pytest.raises(DataError) as err:
        read_csv(path, _graph())
    assert err.value.line == line


def test_empty_file(tmp_path):
    path = tmp_path / "e.csv"
    path.write_text("")
    with pytest.raises(DataError):
        read_csv(path)


def test_aligned_checks_columns_and_levels():
    g = _graph()
    with pytest.raises(DataError):
        Dataset(["A"], [[0]]).aligned(g)
    with pytest.raises(DataError):
        Dataset(["A", "Y"], [[5, 0.0]]).aligned(g)


def test_dataset_validation():
    with pytest.raises(DataError):
        Dataset(["A", "A"], [[0, 0]])
    with pytest.raises(DataError):
        Dataset(["A"], [[np.nan]])
    assert Dataset(["A", "B"], []).n == 0


def test_rows_and_concat():
    d = Dataset(["A"], [[0], [1], [2]])
    assert d.rows([2, 0]).column("A").tolist() == [2, 0]
    assert d.concat(d).n == 6
