"""Core data types shared by every module.

Units are fixed throughout: MW, MWh (electric), MWh_th for thermal storage
energy, hours, and $/yr for annualized costs.  The time step is one hour, so
power and per-step energy are numerically interchangeable.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Mapping

import numpy as np

HOURS_PER_YEAR = 8760

MAIN_SYSTEM = "main_system"
DC_COLOCATION = "dc_colocation"
ZC_HOURLY = "zero_carbon_hourly"
UNCONSTRAINED = "unconstrained"
STORAGE_KINDS = ("lib", "tes")


@dataclass(frozen=True)
class Zone:
    id: str
    kind: str
    demand_series_ref: str = ""


@dataclass(frozen=True)
class ThermalPlant:
    id: str
    zone: str
    fuel: str
    unit_size_mw: float
    existing_units: int
    min_stable_fraction: float
    ramp_up_fraction: float
    ramp_down_fraction: float
    heat_rate_mmbtu_per_mwh: float
    fuel_cost_per_mmbtu: float
    vom_per_mwh: float
    inv_cost_annualized_per_mw: float | None
    fom_per_mw: float
    co2_per_mmbtu: float
    remaining_life_yr: float
    retrofittable: bool

    @property
    def fuel_cost_per_mwh(self) -> float:
        return self.heat_rate_mmbtu_per_mwh * self.fuel_cost_per_mmbtu

    @property
    def marginal_cost_per_mwh(self) -> float:
        return self.vom_per_mwh + self.fuel_cost_per_mwh

    @property
    def emission_rate_t_per_mwh(self) -> float:
        return self.heat_rate_mmbtu_per_mwh * self.co2_per_mmbtu


@dataclass(frozen=True)
class RenewableResource:
    id: str
    zone: str
    tech: str
    capacity_factor_series_ref: str
    inv_cost_annualized_per_mw: float
    fom_per_mw: float
    existing_mw: float
    max_buildable_mw: float


@dataclass(frozen=True)
class LibSpec:
    id: str
    zone: str
    inv_power_per_mw: float
    inv_energy_per_mwh: float
    fom_per_mw: float
    duration_h: float = 4.0
    charge_efficiency: float = 0.95
    discharge_efficiency: float = 0.95
    existing_power_mw: float = 0.0


@dataclass(frozen=True)
class TesSpec:
    """Molten-salt storage created by retrofitting a coal plant's power block.

    Annualized costs may be left ``None`` when overnight costs are given; the
    finance step fills them in from the host plant's remaining life.
    """

    id: str
    source_plant: str
    inv_energy_per_mwhth: float | None
    inv_charge_per_mw: float | None
    inv_retrofit_per_mw: float | None
    fom_per_mw: float
    charge_efficiency: float = 0.35
    discharge_efficiency: float = 0.95
    self_discharge_per_h: float = 0.001
    d_min_h: float = 4.0
    d_max_h: float = 100.0
    vom_discharge_per_mwh: float = 0.0
    overnight_energy_per_kwhth: float | None = None
    overnight_charge_per_kw: float | None = None
    overnight_retrofit_per_kw: float | None = None

    @property
    def annualized(self) -> bool:
        return None not in (self.inv_energy_per_mwhth, self.inv_charge_per_mw, self.inv_retrofit_per_mw)


@dataclass(frozen=True)
class DataCenter:
    id: str
    zone: str
    load_mw: float
    inflexible_fraction: float = 1.0
    flexibility_window_h: int = 24


@dataclass(frozen=True)
class ScenarioConfig:
    storage_menu: frozenset = frozenset(STORAGE_KINDS)
    carbon_policy: str = ZC_HOURLY
    # None keeps each data center's own inflexible fraction
    flexibility_fraction: float | None = None
    voll_per_mwh: float = 9000.0
    interest_rate: float = 0.04
    representative_weeks: int = 2
    solver: str = "builtin"
    relax_integrality: bool = False
    credit_existing_renewables: bool = False
    mip_gap: float = 1e-6
    time_limit_s: float | None = None

    def inflexible_fraction(self, dc: DataCenter) -> float:
        if self.flexibility_fraction is None:
            return dc.inflexible_fraction
        return 1.0 - self.flexibility_fraction

    def violations(self) -> list[str]:
        out = []
        if not set(self.storage_menu) <= set(STORAGE_KINDS):
            out.append(f"storage_menu has unknown kinds {sorted(set(self.storage_menu) - set(STORAGE_KINDS))}")
        if self.carbon_policy not in (ZC_HOURLY, UNCONSTRAINED):
            out.append(f"unknown carbon_policy {self.carbon_policy!r}")
        if self.flexibility_fraction is not None and not 0 <= self.flexibility_fraction <= 1:
            out.append("flexibility_fraction outside [0,1]")
        if not self.voll_per_mwh > 0:
            out.append("voll_per_mwh must be > 0")
        if not self.interest_rate >= 0:
            out.append("interest_rate must be >= 0")
        if int(self.representative_weeks) != self.representative_weeks or self.representative_weeks < 1:
            out.append("representative_weeks must be an integer >= 1")
        if self.solver not in ("builtin", "mps_export", "highs"):
            out.append(f"unknown solver {self.solver!r}")
        if not self.mip_gap >= 0:
            out.append("mip_gap must be >= 0")
        return out


def _frozen_series(series: Mapping[str, np.ndarray]) -> Mapping[str, np.ndarray]:
    out = {}
    for key, values in series.items():
        arr = np.array(values, dtype=float)
        arr.flags.writeable = False
        out[key] = arr
    return MappingProxyType(out)


@dataclass(frozen=True)
class SystemData:
    zones: tuple[Zone, ...] = ()
    thermal: tuple[ThermalPlant, ...] = ()
    renewables: tuple[RenewableResource, ...] = ()
    libs: tuple[LibSpec, ...] = ()
    tes: tuple[TesSpec, ...] = ()
    dcs: tuple[DataCenter, ...] = ()
    series: Mapping[str, np.ndarray] = field(default_factory=dict)
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)

    def __post_init__(self):
        for name in ("zones", "thermal", "renewables", "libs", "tes", "dcs"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        object.__setattr__(self, "series", _frozen_series(self.series))

    def plant(self, plant_id: str) -> ThermalPlant:
        return _by_id(self.thermal, plant_id)

    def zone(self, zone_id: str) -> Zone:
        return _by_id(self.zones, zone_id)

    def tes_zone(self, tes: TesSpec) -> str:
        return self.plant(tes.source_plant).zone

    def dc_zones(self) -> list[str]:
        return sorted({z.id for z in self.zones if z.kind == DC_COLOCATION})

    def system_demand(self) -> np.ndarray:
        """Hourly demand of all zones, excluding data-center loads."""
        total = np.zeros(HOURS_PER_YEAR)
        for z in self.zones:
            if z.demand_series_ref:
                total = total + self.series[z.demand_series_ref]
        return total

    def replace(self, **changes) -> "SystemData":
        fields = {f: getattr(self, f) for f in self.__dataclass_fields__}
        fields.update(changes)
        return SystemData(**fields)


def _by_id(items, key):
    for item in items:
        if item.id == key:
            return item
    raise KeyError(key)


def _check_series(data: SystemData, ref: str, owner: str, out: list[str]) -> np.ndarray | None:
    if ref not in data.series:
        out.append(f"{owner}: series {ref!r} does not resolve")
        return None
    arr = data.series[ref]
    if arr.shape != (HOURS_PER_YEAR,):
        out.append(f"{owner}: series {ref!r} has {arr.size} values, expected {HOURS_PER_YEAR}")
        return None
    if not np.all(np.isfinite(arr)):
        out.append(f"{owner}: series {ref!r} has non-finite values")
        return None
    return arr


def validate_system(data: SystemData) -> list[str]:
    """Return every violated invariant as a human-readable message (empty if valid)."""
    out: list[str] = []
    groups = {
        "zone": data.zones,
        "thermal plant": data.thermal,
        "renewable": data.renewables,
        "storage": data.libs + data.tes,
        "data center": data.dcs,
    }
    for label, items in groups.items():
        ids = [x.id for x in items]
        for dup in sorted({i for i in ids if ids.count(i) > 1}):
            out.append(f"{label} id {dup!r} is not unique")

    zone_ids = {z.id for z in data.zones}
    mains = [z for z in data.zones if z.kind == MAIN_SYSTEM]
    if not data.zones:
        out.append("no main_system demand: zones missing")
    elif len(mains) != 1:
        out.append(f"exactly one main_system zone required, found {len(mains)}")
    dc_zone_ids = {d.zone for d in data.dcs}
    for z in sorted(data.zones, key=lambda z: z.id):
        if z.kind not in (MAIN_SYSTEM, DC_COLOCATION):
            out.append(f"zone {z.id}: unknown kind {z.kind!r}")
        if z.kind == DC_COLOCATION and z.id not in dc_zone_ids:
            out.append(f"zone {z.id}: dc_colocation zone without a data center")
        if z.demand_series_ref:
            arr = _check_series(data, z.demand_series_ref, f"zone {z.id}", out)
            if arr is not None and np.any(arr < 0):
                out.append(f"zone {z.id}: negative demand")
        elif z.kind == MAIN_SYSTEM:
            out.append(f"zone {z.id}: main_system zone needs a demand series")

    for p in sorted(data.thermal, key=lambda p: p.id):
        tag = f"thermal plant {p.id}"
        if p.zone not in zone_ids:
            out.append(f"{tag}: zone {p.zone!r} does not resolve")
        if p.fuel not in ("coal", "gas"):
            out.append(f"{tag}: unknown fuel {p.fuel!r}")
        if not p.unit_size_mw > 0:
            out.append(f"{tag}: unit_size_mw must be > 0")
        if p.existing_units < 0 or int(p.existing_units) != p.existing_units:
            out.append(f"{tag}: existing_units must be a non-negative integer")
        if not 0 <= p.min_stable_fraction <= 1:
            out.append(f"{tag}: min_stable_fraction outside [0,1]")
        if p.ramp_up_fraction < 0 or p.ramp_down_fraction < 0:
            out.append(f"{tag}: negative ramp fraction")
        if p.fuel == "coal" and p.inv_cost_annualized_per_mw is not None:
            out.append(f"{tag}: coal plants cannot be newly built (inv_cost must be empty)")
        if p.fuel == "gas" and p.inv_cost_annualized_per_mw is None:
            out.append(f"{tag}: gas plant needs an annualized investment cost")
        if p.retrofittable and p.fuel != "coal":
            out.append(f"{tag}: retrofittable ⇒ coal")
        for name in ("heat_rate_mmbtu_per_mwh", "fuel_cost_per_mmbtu", "vom_per_mwh", "fom_per_mw", "co2_per_mmbtu"):
            if getattr(p, name) < 0:
                out.append(f"{tag}: {name} must be >= 0")

    for r in sorted(data.renewables, key=lambda r: r.id):
        tag = f"renewable {r.id}"
        if r.zone not in zone_ids:
            out.append(f"{tag}: zone {r.zone!r} does not resolve")
        if r.tech not in ("solar", "wind"):
            out.append(f"{tag}: unknown tech {r.tech!r}")
        if r.existing_mw < 0:
            out.append(f"{tag}: existing_mw must be >= 0")
        if r.max_buildable_mw < 0:
            out.append(f"{tag}: max_buildable_mw must be >= 0")
        arr = _check_series(data, r.capacity_factor_series_ref, tag, out)
        if arr is not None and (arr.min() < 0 or arr.max() > 1):
            out.append(f"{tag}: α out of [0,1]")

    for s in sorted(data.libs, key=lambda s: s.id):
        tag = f"lib {s.id}"
        if s.zone not in zone_ids:
            out.append(f"{tag}: zone {s.zone!r} does not resolve")
        if not s.duration_h > 0:
            out.append(f"{tag}: duration_h must be > 0")
        for name in ("charge_efficiency", "discharge_efficiency"):
            if not 0 < getattr(s, name) <= 1:
                out.append(f"{tag}: {name} outside (0,1]")
        if s.existing_power_mw < 0:
            out.append(f"{tag}: existing_power_mw must be >= 0")

    plant_ids = {p.id for p in data.thermal}
    for s in sorted(data.tes, key=lambda s: s.id):
        tag = f"tes {s.id}"
        if s.source_plant not in plant_ids:
            out.append(f"{tag}: source_plant {s.source_plant!r} does not resolve")
        else:
            host = data.plant(s.source_plant)
            if host.fuel != "coal" or not host.retrofittable:
                out.append(f"{tag}: retrofittable ⇒ coal (source plant {host.id} is {host.fuel})")
        for name in ("charge_efficiency", "discharge_efficiency"):
            if not 0 < getattr(s, name) <= 1:
                out.append(f"{tag}: {name} outside (0,1]")
        if not 0 <= s.self_discharge_per_h < 1:
            out.append(f"{tag}: self_discharge_per_h outside [0,1)")
        if not 0 < s.d_min_h <= s.d_max_h:
            out.append(f"{tag}: need 0 < d_min_h <= d_max_h")
        if not s.annualized and None in (
            s.overnight_energy_per_kwhth,
            s.overnight_charge_per_kw,
            s.overnight_retrofit_per_kw,
        ):
            out.append(f"{tag}: needs annualized or overnight investment costs")

    for d in sorted(data.dcs, key=lambda d: d.id):
        tag = f"data center {d.id}"
        if d.zone not in zone_ids:
            out.append(f"{tag}: zone {d.zone!r} does not resolve")
        elif data.zone(d.zone).kind != DC_COLOCATION:
            out.append(f"{tag}: zone {d.zone} is not a dc_colocation zone")
        if d.load_mw < 0:
            out.append(f"{tag}: load_mw must be >= 0")
        if not 0 <= d.inflexible_fraction <= 1:
            out.append(f"{tag}: inflexible_fraction outside [0,1]")
        if d.flexibility_window_h < 1:
            out.append(f"{tag}: flexibility_window_h must be >= 1")

    out.extend(f"scenario: {msg}" for msg in data.scenario.violations())
    return out


@dataclass
class Solution:
    """Capacity decisions and hourly operation of one solved scenario.

    ``capacities`` is keyed like ``units_retrofit[coal1]`` and ``dispatch`` like
    ``discharge[tes_a]`` (a vector over model hours) or ``unmet``.
    """

    status: str
    objective: float
    breakdown: dict
    capacities: dict
    dispatch: dict
    hour_weights: np.ndarray
    period_hours: int
    annual_emissions_tco2: float = float("nan")
    gap: float = 0.0

    def capacity(self, family: str, asset: str, default: float = 0.0) -> float:
        return float(self.capacities.get(f"{family}[{asset}]", default))

    def series_of(self, family: str, asset: str | None = None) -> np.ndarray:
        key = family if asset is None else f"{family}[{asset}]"
        if key not in self.dispatch:
            from .errors import MissingVariable

            raise MissingVariable(key)
        return np.asarray(self.dispatch[key], dtype=float)

    @property
    def n_hours(self) -> int:
        return len(self.hour_weights)
