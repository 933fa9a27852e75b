"""Synthetic systems: the bundled fixtures and randomized small test systems.

All numbers here are made-up stand-ins with plausible magnitudes, not market data.
"""

from __future__ import annotations

from dataclasses import replace

import numpy as np

from .domain import (
    DC_COLOCATION,
    HOURS_PER_YEAR,
    MAIN_SYSTEM,
    DataCenter,
    LibSpec,
    RenewableResource,
    ScenarioConfig,
    SystemData,
    TesSpec,
    ThermalPlant,
    Zone,
)
from .finance import HEATER_COST_PER_KW, TANK_COST_PER_KWHTH

HOURS = np.arange(HOURS_PER_YEAR)
DAY_HOUR = HOURS % 24
DAY = HOURS // 24
COAL_CO2 = 0.0953  # tCO2/MMBtu
GAS_CO2 = 0.0531


def _round(arr, digits=4):
    return np.round(arr, digits)


def solar_cf(rng, peak=0.85, cloudiness=0.25, seasonal=0.25):
    season = 1.0 + seasonal * np.cos(2 * np.pi * (DAY - 172) / 365)
    shape = np.clip(np.sin(np.pi * (DAY_HOUR - 6) / 12), 0, None)
    daily = np.clip(1 - cloudiness * rng.gamma(1.2, 1.0, size=365), 0.05, 1)[DAY]
    return _round(np.clip(peak * shape * season / (1 + seasonal) * daily, 0, 1))


def wind_cf(rng, mean=0.38, persistence=0.97):
    noise = rng.normal(size=HOURS_PER_YEAR)
    z = np.empty(HOURS_PER_YEAR)
    z[0] = noise[0]
    for t in range(1, HOURS_PER_YEAR):
        z[t] = persistence * z[t - 1] + np.sqrt(1 - persistence**2) * noise[t]
    night = 0.1 * np.cos(2 * np.pi * DAY_HOUR / 24)
    season = 0.08 * np.cos(2 * np.pi * (DAY - 30) / 365)
    return _round(np.clip(mean + 0.22 * z + night + season, 0, 1))


def demand_profile(rng, mean_mw, daily_swing=0.18, seasonal=0.15, noise=0.03):
    daily = daily_swing * np.sin(np.pi * (DAY_HOUR - 8) / 16) * (DAY_HOUR >= 8)
    season = seasonal * np.cos(2 * np.pi * (DAY - 200) / 182.5)
    eps = noise * rng.normal(size=HOURS_PER_YEAR)
    return _round(mean_mw * (1 + daily + season + eps), 2)


def tes_spec(tes_id, plant_id, fom=40000.0):
    return TesSpec(
        id=tes_id,
        source_plant=plant_id,
        inv_energy_per_mwhth=None,
        inv_charge_per_mw=None,
        inv_retrofit_per_mw=None,
        fom_per_mw=fom,
        charge_efficiency=0.35,
        discharge_efficiency=0.95,
        self_discharge_per_h=0.001,
        d_min_h=4.0,
        d_max_h=100.0,
        vom_discharge_per_mwh=1.0,
        overnight_energy_per_kwhth=TANK_COST_PER_KWHTH,
        overnight_charge_per_kw=HEATER_COST_PER_KW,
        overnight_retrofit_per_kw=799.0,
    )


def coal_plant(pid, zone, size, units, life, heat_rate=10.5, ramp=0.3, gamma=0.4, fom=45000.0):
    return ThermalPlant(
        id=pid, zone=zone, fuel="coal", unit_size_mw=size, existing_units=units,
        min_stable_fraction=gamma, ramp_up_fraction=ramp, ramp_down_fraction=ramp,
        heat_rate_mmbtu_per_mwh=heat_rate, fuel_cost_per_mmbtu=2.0, vom_per_mwh=4.5,
        inv_cost_annualized_per_mw=None, fom_per_mw=fom, co2_per_mmbtu=COAL_CO2,
        remaining_life_yr=life, retrofittable=True,
    )


def gas_plant(pid, zone, size, units, heat_rate=7.0, inv=95000.0):
    return ThermalPlant(
        id=pid, zone=zone, fuel="gas", unit_size_mw=size, existing_units=units,
        min_stable_fraction=0.3, ramp_up_fraction=1.0, ramp_down_fraction=1.0,
        heat_rate_mmbtu_per_mwh=heat_rate, fuel_cost_per_mmbtu=3.5, vom_per_mwh=3.0,
        inv_cost_annualized_per_mw=inv, fom_per_mw=15000.0, co2_per_mmbtu=GAS_CO2,
        remaining_life_yr=30, retrofittable=False,
    )


def lib_spec(lib_id, zone):
    return LibSpec(
        id=lib_id, zone=zone, inv_power_per_mw=30000.0, inv_energy_per_mwh=22000.0,
        fom_per_mw=8000.0, duration_h=4.0, charge_efficiency=0.92, discharge_efficiency=0.92,
        existing_power_mw=0.0,
    )


def toy3() -> SystemData:
    """Two coal plants, one gas plant, solar and wind, one 300 MW data center."""
    rng = np.random.default_rng(3)
    series = {
        "demand_main": demand_profile(rng, 1100.0),
        "solar_dc": solar_cf(rng),
        "wind_dc": wind_cf(rng),
    }
    zones = [Zone("main", MAIN_SYSTEM, "demand_main"), Zone("dc_zone", DC_COLOCATION, "")]
    thermal = [
        coal_plant("coal_a", "main", 300.0, 2, 18, heat_rate=10.8),
        coal_plant("coal_b", "dc_zone", 400.0, 1, 31, heat_rate=10.2),
        gas_plant("gas_a", "main", 200.0, 1),
    ]
    renewables = [
        RenewableResource("solar_dc", "dc_zone", "solar", "solar_dc", 52000.0, 12000.0, 0.0, 2500.0),
        RenewableResource("wind_dc", "dc_zone", "wind", "wind_dc", 78000.0, 30000.0, 150.0, 2000.0),
    ]
    return SystemData(
        zones=zones,
        thermal=thermal,
        renewables=renewables,
        libs=[lib_spec("lib_dc", "dc_zone")],
        tes=[tes_spec("tes_a", "coal_a"), tes_spec("tes_b", "coal_b")],
        dcs=[DataCenter("dc1", "dc_zone", 300.0, 1.0, 24)],
        series=series,
        scenario=ScenarioConfig(representative_weeks=2),
    )


ERCOT_MINI_LIVES = (2, 5, 8, 11, 14, 17, 20, 23, 26, 29, 31, 33)


def ercot_mini() -> SystemData:
    """Twelve retrofittable coal plants, three 1000 MW flat data centers, three weather zones."""
    rng = np.random.default_rng(2030)
    dc_zones = ("north_central", "south_central", "coast")
    series = {"demand_main": demand_profile(rng, 5200.0)}
    renewables = []
    for z in dc_zones:
        series[f"solar_{z}"] = solar_cf(rng, peak=0.8 + 0.05 * rng.random())
        series[f"wind_{z}"] = wind_cf(rng, mean=0.33 + 0.08 * rng.random())
        renewables.append(RenewableResource(f"solar_{z}", z, "solar", f"solar_{z}", 52000.0, 12000.0, 0.0, 6000.0))
        renewables.append(RenewableResource(f"wind_{z}", z, "wind", f"wind_{z}", 78000.0, 30000.0, 300.0, 5000.0))
    zones = [Zone("main", MAIN_SYSTEM, "demand_main")] + [Zone(z, DC_COLOCATION, "") for z in dc_zones]
    thermal = []
    tes = []
    for i, life in enumerate(ERCOT_MINI_LIVES):
        pid = f"coal{i + 1:02d}"
        zone = dc_zones[i % 3]
        size = float(300 + 50 * ((7 * i) % 9))
        hr = round(9.8 + 0.15 * ((5 * i) % 8), 2)
        thermal.append(coal_plant(pid, zone, size, 1, life, heat_rate=hr, ramp=0.5))
        tes.append(tes_spec(f"tes{i + 1:02d}", pid))
    thermal.append(gas_plant("gas_cc", "main", 400.0, 8))
    libs = [lib_spec(f"lib_{z}", z) for z in dc_zones]
    dcs = [DataCenter(f"dc_{z}", z, 1000.0, 1.0, 24) for z in dc_zones]
    return SystemData(
        zones=zones, thermal=thermal, renewables=renewables, libs=libs, tes=tes, dcs=dcs,
        series=series, scenario=ScenarioConfig(representative_weeks=1),
    )


def random_small_system(seed: int) -> SystemData:
    """Small randomized system exercised over a single short period."""
    rng = np.random.default_rng(seed)
    base = demand_profile(rng, round(float(rng.uniform(150, 400)), 2), noise=0.05)
    series = {"demand_main": base, "solar_dc": solar_cf(rng), "wind_dc": wind_cf(rng)}
    thermal = [coal_plant("coal_a", "dc_zone", float(rng.choice([100, 150, 200])), int(rng.integers(1, 3)),
                          float(rng.integers(2, 34)), ramp=float(rng.choice([0.2, 0.5, 1.0])),
                          gamma=float(rng.choice([0.0, 0.3, 0.5])))]
    if rng.random() < 0.6:
        thermal.append(gas_plant("gas_a", "main", float(rng.choice([50, 100])), int(rng.integers(0, 3))))
    renewables = [
        RenewableResource("solar_dc", "dc_zone", "solar", "solar_dc", round(float(rng.uniform(40e3, 70e3)), 2),
                          12000.0, 0.0, round(float(rng.uniform(200, 800)), 2)),
        RenewableResource("wind_dc", "dc_zone", "wind", "wind_dc", round(float(rng.uniform(60e3, 100e3)), 2),
                          30000.0, round(float(rng.uniform(0, 50)), 2), round(float(rng.uniform(100, 600)), 2)),
    ]
    libs = [lib_spec("lib_dc", "dc_zone")] if rng.random() < 0.7 else []
    tes = [tes_spec("tes_a", "coal_a")] if rng.random() < 0.8 else []
    dc = DataCenter("dc1", "dc_zone", round(float(rng.uniform(20, 120)), 2), float(rng.choice([1.0, 0.8])), 24)
    # keep the local build limits large enough to cover the data center every hour
    scale = dc.load_mw / 60.0
    renewables = [replace(r, max_buildable_mw=round(max(r.max_buildable_mw, r.max_buildable_mw * scale), 2))
                  for r in renewables]
    policy = "zero_carbon_hourly" if rng.random() < 0.7 else "unconstrained"
    return SystemData(
        zones=[Zone("main", MAIN_SYSTEM, "demand_main"), Zone("dc_zone", DC_COLOCATION, "")],
        thermal=thermal, renewables=renewables, libs=libs, tes=tes, dcs=[dc], series=series,
        scenario=ScenarioConfig(carbon_policy=policy, representative_weeks=1),
    )


FIXTURES = {"toy3": toy3, "ercot-mini": ercot_mini}


def fixture_scenario(name: str) -> ScenarioConfig:
    k = 2 if name == "toy3" else 1
    return ScenarioConfig(representative_weeks=k, solver="highs")


def write_fixtures(root) -> list:
    """Regenerate the bundled fixture directories under ``root``."""
    from pathlib import Path

    from .ingest import write_system

    out = []
    for name, make in FIXTURES.items():
        data = make().replace(scenario=fixture_scenario(name))
        out.append(write_system(data, Path(root) / name))
    return out


if __name__ == "__main__":
    import sys
    from pathlib import Path

    target = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).parent / "data"
    for p in write_fixtures(target):
        print(p)
