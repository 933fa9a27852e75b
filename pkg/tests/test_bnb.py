import dataclasses
import time

import numpy as np
import pytest
from oracles import enumerate_integers, one_coal_system

from tesplan import synth
from tesplan.domain import UNCONSTRAINED
from tesplan.errors import Infeasible, TimeLimit
from tesplan.finance import prepare_costs
from tesplan.model import INF, ModelBuilder, build
from tesplan.solve.bnb import solve_lp, solve_milp
from tesplan.solve.highs import solve_milp_highs
from tesplan.tsreduce import single_period


def _knapsack():
    # max 5x + 4y  s.t. 6x + 4y <= 24, x + 2y <= 6, integers; LP optimum (3, 1.5)
    b = ModelBuilder()
    x = b.var("x", 0, INF, True, -5.0)
    y = b.var("y", 0, INF, True, -4.0)
    b.row("r1", [(x, 6.0), (y, 4.0)], "L", 24.0)
    b.row("r2", [(x, 1.0), (y, 2.0)], "L", 6.0)
    return b.finish(0)


def _retrofit_choice(policy=None):
    """Retire/retrofit choice on two coal plants: 3 integers in {0,1,2}, 27 leaves."""
    data = one_coal_system()
    if policy:
        data = data.replace(scenario=dataclasses.replace(data.scenario, carbon_policy=policy))
    coal_b = synth.coal_plant("coal_b", "main", 50.0, 2, 20, gamma=0.3)
    data = prepare_costs(data.replace(thermal=data.thermal + (coal_b,)))
    red = single_period(data.series, start=24 * 180, hours=24)
    return build(data, red)


def test_knapsack():
    res = solve_milp(_knapsack())
    assert res.objective == pytest.approx(-20.0)
    assert res.x.tolist() == [4.0, 0.0]
    assert res.root_bound == pytest.approx(-21.0)
    assert res.root_bound <= res.objective


def test_matches_exhaustive_enumeration():
    model = _retrofit_choice()
    assert len(model.integer_indices) == 3
    best, _, leaves = enumerate_integers(model)
    assert leaves == 27
    res = solve_milp(model)
    assert abs(res.objective - best) <= 1e-6 * abs(best)
    assert res.gap <= 1e-6
    assert res.root_bound <= res.objective + 1e-6 * abs(res.objective)


def test_fixed_integers_reduce_to_lp():
    model = _retrofit_choice(UNCONSTRAINED)
    lb, ub = model.lb.copy(), model.ub.copy()
    lb[model.integer_indices] = 0
    ub[model.integer_indices] = 0
    fixed = model.with_bounds(lb, ub)
    milp = solve_milp(fixed)
    lp = solve_lp(fixed.relaxed())
    assert milp.objective == pytest.approx(lp.objective, rel=1e-9)
    assert milp.nodes <= 1


def test_loose_gap_certified():
    model = _retrofit_choice()
    exact = solve_milp(model).objective
    res = solve_milp(model, gap=0.5)
    assert res.bound <= exact + 1e-6 * abs(exact)
    assert res.bound <= res.objective
    assert res.gap <= 0.5


def test_deterministic():
    model = _retrofit_choice()
    a = solve_milp(model)
    b = solve_milp(model)
    assert a.objective == b.objective and a.nodes == b.nodes
    assert np.array_equal(a.x, b.x)


def test_time_limit_carries_incumbent():
    with pytest.raises(TimeLimit) as info:
        solve_milp(_knapsack(), time_limit=0.0)
    assert info.value.result.status == "time_limit"
    assert info.value.result.bound == pytest.approx(-21.0)


def test_infeasible():
    b = ModelBuilder()
    x = b.var("x", 0, 10, True, 1.0)
    b.row("lo", [(x, 2.0)], "E", 3.0)  # 2x = 3 has no integer solution
    with pytest.raises(Infeasible):
        solve_milp(b.finish(0))
    b = ModelBuilder()
    x = b.var("x", 0, 1, False, 1.0)
    b.row("lo", [(x, 1.0)], "G", 2.0)
    with pytest.raises(Infeasible):
        solve_milp(b.finish(0))


def test_highs_backend_agrees():
    model = _retrofit_choice()
    ours = solve_milp(model)
    ref = solve_milp_highs(model)
    assert ours.objective == pytest.approx(ref.objective, rel=1e-6)
    np.testing.assert_array_equal(ours.x[model.integer_indices], ref.x[model.integer_indices])


def test_objective_constant_included():
    model = _knapsack()
    shifted = dataclasses.replace(model, obj_constant=100.0)
    assert solve_milp(shifted).objective == pytest.approx(80.0)
    t0 = time.monotonic()
    assert solve_lp(shifted.relaxed()).objective == pytest.approx(79.0)
    assert time.monotonic() - t0 < 1.0
