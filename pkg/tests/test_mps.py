import numpy as np
import pytest

from tesplan import synth
from tesplan.errors import NameCollision, ParseError
from tesplan.model import INF, ModelBuilder
from tesplan.pipeline import prepare
from tesplan.solve.mps import (col_name, export_mps, import_solution, model_multiset, names_map_path,
                               read_mps, read_names_map, row_name, write_values)

HAND = """NAME          HAND
ROWS
 N  COST
 G  LIM1
 L  LIM2
 E  MYEQN
COLUMNS
    MARKER                 'MARKER'                 'INTORG'
    X1        COST         1.0   LIM1         1.0
    X1        LIM2         1.0
    MARKER                 'MARKER'                 'INTEND'
    X2        COST         2.0   LIM1         1.0
    X2        MYEQN        -1.0
    X3        COST        -1.0   MYEQN        1.0
RHS
    RHS       COST        -5.0
    RHS       LIM1         2.0   LIM2         4.0
    RHS       MYEQN        7.0
RANGES
    RNG       LIM1         3.0   MYEQN       -2.0
BOUNDS
 UP BND       X1           4.0
 MI BND       X2
 FX BND       X3           8.0
ENDATA
"""


@pytest.fixture(scope="module")
def toy3_model():
    return prepare(synth.toy3(), k=1)[2]


def _one_var():
    b = ModelBuilder()
    x = b.var("x", 0.0, INF, False, 1.0)
    b.row("floor", [(x, 1.0)], "G", 1.0)
    return b.finish(0)


def test_round_trip_multiset(toy3_model, tmp_path):
    path = export_mps(toy3_model, tmp_path / "model.mps")
    back = read_mps(path)
    rename = read_names_map(names_map_path(path))
    rename["COST"] = "__objective__"
    got = back.coefficient_multiset(rename)
    want = model_multiset(toy3_model)
    assert len(got) == len(want)
    assert [g[:2] for g in got] == [w[:2] for w in want]
    assert max(abs(g[2] - w[2]) for g, w in zip(got, want)) <= 1e-12
    assert back.col_names == [col_name(j) for j in range(toy3_model.n_vars)]
    assert back.row_names == [row_name(i) for i in range(toy3_model.n_rows)]
    assert np.array_equal(back.sense, toy3_model.sense)
    assert np.array_equal(back.rhs, toy3_model.rhs)
    assert np.array_equal(back.lb, toy3_model.lb) and np.array_equal(back.ub, toy3_model.ub)
    assert back.obj_constant == toy3_model.obj_constant
    assert (back.A != toy3_model.A).nnz == 0


def test_intorg_block_holds_exactly_the_unit_counts(toy3_model, tmp_path):
    path = export_mps(toy3_model, tmp_path / "model.mps")
    names = read_names_map(names_map_path(path))
    inside, open_block = set(), False
    for line in path.read_text().splitlines():
        if "'MARKER'" in line:
            open_block = "'INTORG'" in line
        elif open_block:
            inside.add(line.split()[0])
    assert {names[c] for c in inside} == {toy3_model.var_names[j] for j in toy3_model.integer_indices}
    assert all(names[c].startswith(("units_invest", "units_retire", "units_retrofit")) for c in inside)


def test_names_fit_eight_characters(toy3_model, tmp_path):
    path = export_mps(toy3_model, tmp_path / "model.mps")
    names = read_names_map(names_map_path(path))
    assert all(len(k) <= 8 for k in names)
    assert len(set(names.values())) == len(names)
    with pytest.raises(NameCollision):
        col_name(10**7)


def test_hand_solved_single_variable(tmp_path):
    model = _one_var()
    path = export_mps(model, tmp_path / "one.mps")
    back = read_mps(path)
    assert back.col_names == ["C0000000"] and back.sense.tolist() == ["G"] and back.rhs.tolist() == [1.0]
    # optimum by hand: x = 1
    (tmp_path / "one.sol").write_text("C0000000 1\n")
    x = import_solution(model, tmp_path / "one.sol", names_map_path(path))
    assert x.tolist() == [1.0]
    assert model.objective_value(x) == 1.0
    assert model.max_violation(x) == 0.0


def test_hand_solved_two_variables(tmp_path):
    # min 3x + 2y  s.t. x + y >= 4, x - y <= 1, y <= 3: optimum x=1, y=3, objective 9
    b = ModelBuilder()
    x = b.var("x", 0, INF, False, 3.0)
    y = b.var("y", 0, 3.0, False, 2.0)
    b.row("need", [(x, 1.0), (y, 1.0)], "G", 4.0)
    b.row("skew", [(x, 1.0), (y, -1.0)], "L", 1.0)
    model = b.finish(0)
    path = export_mps(model, tmp_path / "two.mps")
    (tmp_path / "two.sol").write_text("* hand solution\nC0000000 1.0\nC0000001 3.0\n")
    vals = import_solution(model, tmp_path / "two.sol", names_map_path(path))
    assert model.objective_value(vals) == 9.0
    assert model.max_violation(vals) == 0.0


def test_write_values_round_trip(toy3_model, tmp_path):
    x = np.linspace(0, 1, toy3_model.n_vars) ** 3
    write_values(toy3_model, x, tmp_path / "x.sol")
    assert np.array_equal(import_solution(toy3_model, tmp_path / "x.sol"), x)


def test_absent_columns_import_as_zero(tmp_path):
    model = _one_var()
    (tmp_path / "empty.sol").write_text("")
    assert import_solution(model, tmp_path / "empty.sol").tolist() == [0.0]


@pytest.mark.parametrize("body", ["C0000009 1\n", "C0000000 1\nC0000000 2\n", "C0000000 one\n", "C0000000\n"])
def test_import_errors(tmp_path, body):
    (tmp_path / "bad.sol").write_text(body)
    with pytest.raises(ParseError):
        import_solution(_one_var(), tmp_path / "bad.sol")


def test_reads_hand_written_file(tmp_path):
    (tmp_path / "hand.mps").write_text(HAND)
    p = read_mps(tmp_path / "hand.mps")
    assert p.row_names == ["LIM1", "LIM2", "MYEQN"]
    assert p.sense.tolist() == ["G", "L", "E"]
    assert p.rhs.tolist() == [2.0, 4.0, 7.0]
    assert p.ranges == {"LIM1": 3.0, "MYEQN": -2.0}
    assert p.obj.tolist() == [1.0, 2.0, -1.0]
    assert p.obj_constant == 5.0
    assert p.lb.tolist() == [0.0, -np.inf, 8.0] and p.ub.tolist() == [4.0, np.inf, 8.0]
    assert p.is_int.tolist() == [True, False, False]
    assert p.A.toarray().tolist() == [[1, 1, 0], [1, 0, 0], [0, -1, 1]]


@pytest.mark.parametrize("old,new", [
    ("    X1        LIM2         1.0\n", "    X1        LIM9         1.0\n"),
    (" G  LIM1\n", " Q  LIM1\n"),
    ("2.0   LIM2", "two   LIM2"),
    (" UP BND       X1           4.0\n", " UP BND       X7           4.0\n"),
])
def test_parse_errors(tmp_path, old, new):
    assert old in HAND
    (tmp_path / "bad.mps").write_text(HAND.replace(old, new))
    with pytest.raises(ParseError):
        read_mps(tmp_path / "bad.mps")


def test_bad_names_map(tmp_path):
    (tmp_path / "names.map").write_text("C0000000\n")
    with pytest.raises(ParseError):
        read_names_map(tmp_path / "names.map")
    (tmp_path / "names.map").write_text("C0000000 x\nC0000000 y\n")
    with pytest.raises(NameCollision):
        read_names_map(tmp_path / "names.map")


def test_export_deterministic(toy3_model, tmp_path):
    (tmp_path / "a").mkdir()
    (tmp_path / "b").mkdir()
    a = export_mps(toy3_model, tmp_path / "a" / "m.mps")
    b = export_mps(toy3_model, tmp_path / "b" / "m.mps")
    assert a.read_bytes() == b.read_bytes()
    assert names_map_path(a).read_bytes() == names_map_path(b).read_bytes()
