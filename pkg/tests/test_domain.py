import dataclasses
import random

import numpy as np
import pytest

from tesplan import synth
from tesplan.domain import (MAIN_SYSTEM, ScenarioConfig, Solution, SystemData, Zone,
                            validate_system)
from tesplan.errors import MissingVariable


def test_well_formed_two_zone_system():
    assert validate_system(synth.toy3()) == []
    assert validate_system(synth.ercot_mini()) == []


def test_tes_on_gas_plant():
    data = synth.toy3()
    tes = dataclasses.replace(data.tes[0], source_plant="gas_a")
    out = validate_system(data.replace(tes=(tes, data.tes[1])))
    assert len(out) == 1
    assert "retrofittable ⇒ coal" in out[0]


def test_capacity_factor_above_one():
    data = synth.toy3()
    series = dict(data.series)
    bad = np.array(series["solar_dc"])
    bad[100] = 1.2
    series["solar_dc"] = bad
    out = validate_system(data.replace(series=series))
    assert len(out) == 1
    assert "α out of [0,1]" in out[0]


def test_empty_system_flags_missing_main_zone():
    out = validate_system(SystemData())
    assert any("no main_system demand" in m for m in out)


def test_retrofittable_gas_plant_flagged():
    data = synth.toy3()
    gas = dataclasses.replace(data.plant("gas_a"), retrofittable=True)
    out = validate_system(data.replace(thermal=[p if p.id != "gas_a" else gas for p in data.thermal]))
    assert any("retrofittable ⇒ coal" in m for m in out)


def test_coal_with_investment_cost_flagged():
    data = synth.toy3()
    coal = dataclasses.replace(data.plant("coal_a"), inv_cost_annualized_per_mw=1.0)
    out = validate_system(data.replace(thermal=[coal] + [p for p in data.thermal if p.id != "coal_a"]))
    assert out


@pytest.mark.parametrize("field,value", [
    ("unit_size_mw", 0.0), ("min_stable_fraction", 1.5), ("existing_units", -1)])
def test_plant_invariants(field, value):
    data = synth.toy3()
    p = dataclasses.replace(data.thermal[0], **{field: value})
    assert validate_system(data.replace(thermal=(p,) + data.thermal[1:]))


def test_two_main_zones_and_dangling_dc_zone():
    data = synth.toy3()
    zones = data.zones + (Zone("main2", MAIN_SYSTEM, "demand_main"),)
    assert validate_system(data.replace(zones=zones))
    assert validate_system(data.replace(dcs=()))  # dc zone without a data center


def test_short_series_flagged():
    data = synth.toy3()
    series = dict(data.series)
    series["wind_dc"] = series["wind_dc"][:-1]
    out = validate_system(data.replace(series=series))
    assert any("8760" in m for m in out)


def test_scenario_invariants():
    assert ScenarioConfig().violations() == []
    bad = ScenarioConfig(representative_weeks=0, voll_per_mwh=0, interest_rate=-1)
    assert len(bad.violations()) == 3
    assert ScenarioConfig(flexibility_fraction=0.2).inflexible_fraction(synth.toy3().dcs[0]) == pytest.approx(0.8)


def _corrupt(data):
    p = dataclasses.replace(data.thermal[0], min_stable_fraction=2.0)
    tes = dataclasses.replace(data.tes[0], d_min_h=200.0)
    return data.replace(thermal=(p,) + data.thermal[1:], tes=(tes,) + data.tes[1:])


def test_validate_is_idempotent_and_order_independent():
    data = _corrupt(synth.ercot_mini())
    first = validate_system(data)
    assert first == validate_system(data)
    rng = random.Random(4)
    for _ in range(5):
        fields = {}
        for name in ("zones", "thermal", "renewables", "libs", "tes", "dcs"):
            items = list(getattr(data, name))
            rng.shuffle(items)
            fields[name] = items
        assert validate_system(data.replace(**fields)) == first


def test_system_is_immutable():
    data = synth.toy3()
    with pytest.raises(dataclasses.FrozenInstanceError):
        data.zones = ()
    with pytest.raises(ValueError):
        data.series["solar_dc"][0] = 0.5


def test_solution_accessors():
    sol = Solution("optimal", 1.0, {}, {"tes_power[a]": 5.0}, {"soc[a]": np.ones(3), "unmet": np.zeros(3)},
                   np.ones(3), 3)
    assert sol.capacity("tes_power", "a") == 5.0
    assert sol.capacity("tes_power", "b") == 0.0
    assert sol.series_of("soc", "a").tolist() == [1, 1, 1]
    assert sol.series_of("unmet").sum() == 0
    with pytest.raises(MissingVariable):
        sol.series_of("soc", "b")
    assert sol.n_hours == 3
