"""Capital recovery factors and retrofit cost annualization."""

from __future__ import annotations

import dataclasses
import math

from .domain import SystemData, TesSpec, ThermalPlant
from .errors import DomainError

KW_PER_MW = 1000.0

# molten-salt retrofit overnight costs ($/kWh_th, $/kW, $/kW)
TANK_COST_PER_KWHTH = 28.7
HEATER_COST_PER_KW = 2.0
NEW_TURBINE_COST_PER_KW = 1597.0
# component replacement is charged at half of a new installation
RETROFIT_TURBINE_COST_PER_KW = NEW_TURBINE_COST_PER_KW / 2


def crf(rate: float, years: int) -> float:
    """Capital recovery factor r(1+r)^n / ((1+r)^n - 1); 1/n when r = 0."""
    if years < 1:
        raise DomainError(f"years must be >= 1, got {years}")
    if rate < 0:
        raise DomainError(f"rate must be >= 0, got {rate}")
    if rate == 0:
        return 1.0 / years
    excess = math.expm1(years * math.log1p(rate))
    return rate * (1.0 + excess) / excess


@dataclasses.dataclass(frozen=True)
class AnnualizedRetrofit:
    charge_per_mw: float
    retrofit_per_mw: float
    energy_per_mwhth: float


def annualize_retrofit(
    plant: ThermalPlant,
    rate: float,
    energy_per_kwhth: float = TANK_COST_PER_KWHTH,
    charge_per_kw: float = HEATER_COST_PER_KW,
    retrofit_per_kw: float = 799.0,
) -> AnnualizedRetrofit:
    """Annualize heater, turbine and tank overnight costs over the host plant's remaining life.

    Inputs are $/kW and $/kWh_th; outputs are $/MW·yr and $/MWh_th·yr.
    The remaining life is rounded up to whole years.
    """
    life = plant.remaining_life_yr
    if life < 1:
        raise DomainError(f"plant {plant.id}: remaining life {life} < 1 year")
    factor = crf(rate, int(-(-life // 1)))
    return AnnualizedRetrofit(
        charge_per_mw=charge_per_kw * KW_PER_MW * factor,
        retrofit_per_mw=retrofit_per_kw * KW_PER_MW * factor,
        energy_per_mwhth=energy_per_kwhth * KW_PER_MW * factor,
    )


def annualize_tes(tes: TesSpec, plant: ThermalPlant, rate: float) -> TesSpec:
    if tes.annualized:
        return tes
    ann = annualize_retrofit(
        plant,
        rate,
        energy_per_kwhth=tes.overnight_energy_per_kwhth,
        charge_per_kw=tes.overnight_charge_per_kw,
        retrofit_per_kw=tes.overnight_retrofit_per_kw,
    )
    return dataclasses.replace(
        tes,
        inv_energy_per_mwhth=ann.energy_per_mwhth,
        inv_charge_per_mw=ann.charge_per_mw,
        inv_retrofit_per_mw=ann.retrofit_per_mw,
    )


def prepare_costs(data: SystemData, rate: float | None = None) -> SystemData:
    """Fill in annualized TES costs for every storage given only overnight costs."""
    rate = data.scenario.interest_rate if rate is None else rate
    tes = tuple(annualize_tes(s, data.plant(s.source_plant), rate) for s in data.tes)
    return data.replace(tes=tes)
