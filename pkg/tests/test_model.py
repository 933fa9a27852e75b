import dataclasses

import numpy as np
import pytest
from oracles import highs_lp

from tesplan import synth
from tesplan.domain import (DC_COLOCATION, MAIN_SYSTEM, UNCONSTRAINED, DataCenter, LibSpec,
                            RenewableResource, ScenarioConfig, SystemData, Zone)
from tesplan.errors import ConfigError
from tesplan.finance import prepare_costs
from tesplan.model import BLOCKS, build, build_objective, to_solution
from tesplan.pipeline import prepare
from tesplan.tsreduce import single_period
from tesplan.verify import soc_telescoping

FLAT = np.full(8760, 1.0)


def _system(thermal=(), renewables=(), libs=(), tes=(), dcs=(), demand=100.0, series=None, **cfg):
    table = {"demand_main": np.full(8760, demand)}
    table.update(series or {})
    zones = [Zone("main", MAIN_SYSTEM, "demand_main")]
    if dcs:
        zones.append(Zone("dc_zone", DC_COLOCATION, ""))
    return prepare_costs(SystemData(zones=zones, thermal=thermal, renewables=renewables, libs=libs, tes=tes,
                                    dcs=dcs, series=table, scenario=ScenarioConfig(**cfg)))


def _activity(model, row, values):
    """Row activity minus rhs for a partial assignment keyed by variable name."""
    x = np.zeros(model.n_vars)
    for name, v in values.items():
        x[model.registry[name]] = v
    i = model.row_registry[row]
    return float((model.A[i] @ x)[0]) - model.rhs[i], model.sense[i]


def _gas(units=0, **kw):
    return dataclasses.replace(synth.gas_plant("gas_a", "main", 200.0, units), **kw)


def test_single_gas_plant_objective():
    data = _system(thermal=[_gas(units=1, vom_per_mwh=0.0)], demand=0.0, storage_menu=frozenset())
    red = single_period(data.series, hours=24)
    coefs, consts = build_objective(data, red)
    p = data.thermal[0]
    assert coefs["units_invest[gas_a]"] == (p.inv_cost_annualized_per_mw + p.fom_per_mw) * 200.0
    assert coefs["units_retire[gas_a]"] == -p.fom_per_mw * 200.0
    assert consts["thermal_capacity"] == p.fom_per_mw * 200.0
    capacity_keys = {k for k in coefs if "[t=" not in k and ",t=" not in k}
    assert capacity_keys == {"units_invest[gas_a]", "units_retire[gas_a]"}
    assert all(v == 0 for k, v in consts.items() if k != "thermal_capacity")


def test_fuel_coefficient_scaled_by_weight():
    p = dataclasses.replace(synth.coal_plant("coal_a", "main", 100.0, 1, 10), heat_rate_mmbtu_per_mwh=10.0,
                            fuel_cost_per_mmbtu=2.0, vom_per_mwh=0.0)
    data = _system(thermal=[p], storage_menu=frozenset())
    red = single_period(data.series, hours=24)
    coefs, _ = build_objective(data, red)
    for t in range(24):
        assert coefs[f"dispatch[coal_a,t={t}]"] == pytest.approx(20.0 * 8760 / 24, rel=1e-15)


def test_toy3_k1_structure_frozen():
    _, red, model = prepare(synth.toy3(), k=1)
    assert model.hours == 168
    # counted once from the bundled fixture and frozen
    assert (model.n_vars, model.n_rows, model.A.nnz) == (2536, 5134, 16974)
    assert len(model.obj) == model.n_vars
    assert model.n_vars == len(set(model.var_names)) == len(model.registry)
    assert sorted(model.var_names[j] for j in model.integer_indices) == [
        "units_invest[gas_a]", "units_retire[coal_a]", "units_retire[coal_b]", "units_retire[gas_a]",
        "units_retrofit[coal_a]", "units_retrofit[coal_b]"]
    for b, name in enumerate(BLOCKS):
        assert np.any(model.obj[model.obj_block == b] != 0), name


def test_build_is_deterministic():
    _, _, a = prepare(synth.toy3(), k=1)
    _, _, b = prepare(synth.toy3(), k=1)
    assert a.var_names == b.var_names and a.row_names == b.row_names
    assert (a.A != b.A).nnz == 0
    assert np.array_equal(a.obj, b.obj) and np.array_equal(a.rhs, b.rhs)


def test_relax_and_empty_menu():
    data = synth.toy3()
    _, _, m = prepare(data, dataclasses.replace(data.scenario, relax_integrality=True), k=1)
    _, _, base = prepare(data, k=1)
    assert not m.is_int.any() and base.is_int.sum() == 6
    assert m.var_names == base.var_names and (m.A != base.A).nnz == 0
    cfg = dataclasses.replace(data.scenario, storage_menu=frozenset(), carbon_policy=UNCONSTRAINED)
    _, _, bare = prepare(data, cfg, k=1)
    storage = ("lib_", "tes_", "charge", "discharge", "soc", "units_retrofit")
    assert not [n for n in bare.var_names if n.startswith(storage)]


def test_net_units_zero_forces_dispatch():
    p = synth.coal_plant("coal_a", "main", 300.0, 2, 10)
    data = _system(thermal=[p], tes=[synth.tes_spec("tes_a", "coal_a")], storage_menu=frozenset({"tes"}))
    model = build(data, single_period(data.series, hours=24))
    values = {"units_retire[coal_a]": 1, "units_retrofit[coal_a]": 1}
    slack, sense = _activity(model, "thermal_max[coal_a,t=5]", values)
    assert sense == "L" and slack == 0.0  # dispatch <= 0
    values["dispatch[coal_a,t=5]"] = 1e-3
    assert _activity(model, "thermal_max[coal_a,t=5]", values)[0] > 0


def test_stable_window_one_unit():
    p = synth.coal_plant("coal_a", "main", 600.0, 1, 10, gamma=0.4)
    data = _system(thermal=[p], storage_menu=frozenset())
    model = build(data, single_period(data.series, hours=24))
    for x, lo_ok, hi_ok in ((240.0, True, True), (239.9, False, True), (600.0, True, True), (600.1, True, False)):
        lo, _ = _activity(model, "thermal_min[coal_a,t=0]", {"dispatch[coal_a,t=0]": x})
        hi, _ = _activity(model, "thermal_max[coal_a,t=0]", {"dispatch[coal_a,t=0]": x})
        assert (lo >= 0) == lo_ok and (hi <= 0) == hi_ok


def test_gas_builds_raise_upper_bound():
    data = _system(thermal=[_gas(units=0)], storage_menu=frozenset())
    model = build(data, single_period(data.series, hours=24))
    values = {"units_invest[gas_a]": 3, "dispatch[gas_a,t=0]": 600.0}
    assert _activity(model, "thermal_max[gas_a,t=0]", values)[0] == 0.0
    values["dispatch[gas_a,t=0]"] = 600.5
    assert _activity(model, "thermal_max[gas_a,t=0]", values)[0] > 0


def _tes_model():
    p = synth.coal_plant("coal_a", "main", 300.0, 2, 10)
    data = _system(thermal=[p], tes=[synth.tes_spec("tes_a", "coal_a")], storage_menu=frozenset({"tes"}))
    return build(data, single_period(data.series, hours=24))


def test_tes_energy_balance_hand_values():
    model = _tes_model()
    base = {"soc[tes_a,t=3]": 100.0, "charge[tes_a,t=4]": 10.0, "tes_energy[tes_a]": 200.0}
    slack, sense = _activity(model, "tes_balance[tes_a,t=4]", {**base, "soc[tes_a,t=4]": 103.3})
    assert sense == "E" and slack == pytest.approx(0.0, abs=1e-12)
    # no flow leaves only the self-discharge
    idle = {"soc[tes_a,t=3]": 100.0, "tes_energy[tes_a]": 200.0, "soc[tes_a,t=4]": 100.0 - 0.001 * 200.0}
    assert _activity(model, "tes_balance[tes_a,t=4]", idle)[0] == pytest.approx(0.0, abs=1e-12)


def test_tes_duration_window():
    model = _tes_model()
    for energy, ok in ((400.0, True), (399.0, False), (10000.0, True), (10001.0, False)):
        vals = {"tes_power[tes_a]": 100.0, "tes_energy[tes_a]": energy}
        lo = _activity(model, "tes_duration_min[tes_a]", vals)[0]
        hi = _activity(model, "tes_duration_max[tes_a]", vals)[0]
        assert (lo <= 0 and hi <= 0) == ok


def test_tes_power_block():
    model = _tes_model()
    vals = {"units_retrofit[coal_a]": 1, "tes_power[tes_a]": 300.0}
    assert _activity(model, "tes_power_block[tes_a]", vals)[0] == 0.0
    vals["tes_power[tes_a]"] = 301.0
    assert _activity(model, "tes_power_block[tes_a]", vals)[0] > 0


def _lib_model(eta=0.95):
    lib = LibSpec("lib_a", "main", 30000.0, 22000.0, 8000.0, 4.0, eta, eta)
    data = _system(thermal=[_gas(units=1)], libs=[lib], storage_menu=frozenset({"lib"}))
    return data, build(data, single_period(data.series, hours=24))


def test_lib_duration_fixed():
    _, model = _lib_model()
    assert _activity(model, "lib_duration[lib_a]", {"lib_power[lib_a]": 50.0, "lib_energy[lib_a]": 200.0})[0] == 0
    assert _activity(model, "lib_duration[lib_a]", {"lib_power[lib_a]": 50.0, "lib_energy[lib_a]": 199.0})[0] != 0


def test_lib_full_cycle():
    _, model = _lib_model()
    fill = {"soc[lib_a,t=0]": 0.0, "charge[lib_a,t=1]": 100.0, "soc[lib_a,t=1]": 95.0}
    assert _activity(model, "lib_balance[lib_a,t=1]", fill)[0] == pytest.approx(0.0, abs=1e-12)
    empty = {"soc[lib_a,t=1]": 95.0, "discharge[lib_a,t=2]": 90.25, "soc[lib_a,t=2]": 0.0}
    assert _activity(model, "lib_balance[lib_a,t=2]", empty)[0] == pytest.approx(0.0, abs=1e-12)


def test_zero_capacity_lib_is_idle():
    _, model = _lib_model()
    ub = model.ub.copy()
    ub[model.registry["lib_power[lib_a]"]] = 0.0
    _, x = highs_lp(model, ub=ub)
    flows = [j for n, j in model.registry.items() if n.startswith(("charge[lib_a", "discharge[lib_a", "soc[lib_a"))]
    assert np.abs(x[flows]).max() == 0.0


def test_forced_shedding():
    data = _system(storage_menu=frozenset())
    red = single_period(data.series, hours=1)
    model = build(data, red)
    obj, x = highs_lp(model)
    assert x[model.registry["unmet[t=0]"]] == pytest.approx(100.0)
    assert obj == pytest.approx(100.0 * 8760 * 9000.0)


def test_renewable_output_bound():
    res = RenewableResource("pv", "main", "solar", "cf", 1.0, 1.0, 300.0, 0.0)
    data = _system(renewables=[res], series={"cf": np.full(8760, 0.5)}, storage_menu=frozenset())
    model = build(data, single_period(data.series, hours=24))
    j = model.registry["res_output[pv,t=0]"]
    assert (model.lb[j], model.ub[j]) == (0.0, 150.0)


def _dc_system(lam=0.8, load=1000.0, **cfg):
    res = RenewableResource("pv", "dc_zone", "solar", "cf", 50000.0, 10000.0, 0.0, 5000.0)
    lib = LibSpec("lib_dc", "dc_zone", 30000.0, 22000.0, 8000.0)
    grid_pv = RenewableResource("pv_main", "main", "solar", "cf", 50000.0, 10000.0, 100.0, 500.0)
    return _system(thermal=[_gas(units=5)], renewables=[res, grid_pv], libs=[lib],
                   dcs=[DataCenter("dc1", "dc_zone", load, lam, 24)], series={"cf": FLAT * 0.5},
                   storage_menu=frozenset({"lib"}), **cfg)


def test_dc_matching_rhs():
    data = _dc_system()
    model = build(data, single_period(data.series, hours=48))
    i = model.row_registry["hourly_matching[dc_zone,t=7]"]
    assert model.sense[i] == "G" and model.rhs[i] == pytest.approx(800.0)
    i = model.row_registry["daily_matching[dc_zone,d=24]"]
    assert model.rhs[i] == pytest.approx(24000.0)
    assert len([n for n in model.row_names if n.startswith("daily_matching")]) == 2


def test_dc_matching_equality_case():
    data = _dc_system(lam=1.0)
    model = build(data, single_period(data.series, hours=24))
    # 1200 MW of new solar at 0.5 gives 600; storage discharges 400
    vals = {"res_build[pv]": 1200.0, "discharge[lib_dc,t=3]": 400.0}
    assert _activity(model, "hourly_matching[dc_zone,t=3]", vals)[0] == pytest.approx(0.0, abs=1e-9)


def test_dc_rows_reference_own_zone_only():
    data = _dc_system()
    model = build(data, single_period(data.series, hours=24))
    for name in model.row_names:
        if name.startswith(("hourly_matching", "daily_matching", "charging_control")):
            members = model.row_members(name)
            assert members
            assert all(m.startswith(("res_build[pv]", "charge[lib_dc", "discharge[lib_dc")) for m in members)
    # the data center is physically served through the system balance
    i = model.row_registry["balance[t=0]"]
    assert model.rhs[i] == pytest.approx(100.0 + 1000.0)


def test_existing_renewables_credit_toggle():
    res = RenewableResource("pv", "dc_zone", "solar", "cf", 50000.0, 10000.0, 200.0, 5000.0)
    data = _dc_system()
    data = data.replace(renewables=(res,) + data.renewables[1:])
    red = single_period(data.series, hours=24)
    plain = build(data, red)
    credited = build(data, red, dataclasses.replace(data.scenario, credit_existing_renewables=True))
    i = plain.row_registry["hourly_matching[dc_zone,t=0]"]
    assert plain.rhs[i] == pytest.approx(800.0)
    assert credited.rhs[i] == pytest.approx(800.0 - 100.0)


def test_unconstrained_policy_drops_matching_rows():
    data = _dc_system(carbon_policy=UNCONSTRAINED)
    model = build(data, single_period(data.series, hours=24))
    assert not [n for n in model.row_names if "matching" in n]
    assert model.rhs[model.row_registry["balance[t=0]"]] == pytest.approx(1100.0)


def test_dc_zone_without_assets():
    data = _system(thermal=[_gas(units=5)], dcs=[DataCenter("dc1", "dc_zone", 10.0)], storage_menu=frozenset())
    with pytest.raises(ConfigError):
        build(data, single_period(data.series, hours=24))


def test_unannualized_tes_rejected():
    with pytest.raises(ConfigError):
        build(synth.toy3(), single_period(synth.toy3().series, hours=24))


def _period_model():
    data = prepare_costs(synth.toy3())
    red = single_period(data.series, start=24 * 200, hours=48)
    return data, red, build(data, red, dataclasses.replace(data.scenario, relax_integrality=True))


def test_telescoping_on_solution():
    data, red, model = _period_model()
    _, x = highs_lp(model)
    sol = to_solution(model, red, x)
    residuals = soc_telescoping(data, red, data.scenario, sol)
    assert residuals
    assert max(abs(v) for v in residuals.values()) <= 1e-6


def test_scaling_covariance():
    _, _, model = _period_model()
    base, x1 = highs_lp(model)
    scaled = dataclasses.replace(model, obj=model.obj * 10, obj_constant=model.obj_constant * 10)
    big, x10 = highs_lp(scaled)
    assert big == pytest.approx(10 * base, rel=1e-7)
    # the c=10 optimum is also optimal at c=1
    assert model.objective_value(x10) == pytest.approx(base, rel=1e-7)
    assert model.max_violation(x10) <= 1e-6
