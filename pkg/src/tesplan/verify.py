"""Independent re-check of a solved plan against the system data.

Nothing here reads the assembled optimization model: every constraint family
is re-derived from :class:`~tesplan.domain.SystemData`, the reduced time index
and the scenario, then evaluated on the capacities and hourly series stored in
a :class:`~tesplan.domain.Solution`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .domain import ZC_HOURLY, ScenarioConfig, Solution, SystemData
from .errors import MissingVariable
from .finance import prepare_costs

REL_TOL = 1e-6

COST_BLOCKS = (
    "thermal_capacity",
    "renewable_capacity",
    "lib_sizing",
    "tes_sizing",
    "thermal_operation",
    "tes_operation",
    "load_shedding",
)


@dataclass(frozen=True)
class Violation:
    family: str
    key: str
    hour: int | None
    lhs: float
    rhs: float
    slack: float  # signed; negative means violated

    def __str__(self):
        where = self.key if self.hour is None else f"{self.key} t={self.hour}"
        return f"{self.family}[{where}]: lhs={self.lhs:.9g} rhs={self.rhs:.9g} slack={self.slack:.3g}"


@dataclass
class FeasibilityReport:
    violations: list
    checked: int
    max_violation: float

    @property
    def ok(self) -> bool:
        return not self.violations

    def families(self) -> dict:
        out = {}
        for v in self.violations:
            out[v.family] = out.get(v.family, 0) + 1
        return out


class _Checker:
    def __init__(self, tol):
        self.tol = tol
        self.violations = []
        self.checked = 0
        self.worst = 0.0

    def check(self, family, key, lhs, sense, rhs, hours=None):
        """Compare arrays (or scalars) ``lhs sense rhs`` elementwise."""
        lhs = np.atleast_1d(np.asarray(lhs, dtype=float))
        rhs = np.broadcast_to(np.asarray(rhs, dtype=float), lhs.shape)
        if sense == "<=":
            slack = rhs - lhs
        elif sense == ">=":
            slack = lhs - rhs
        else:
            slack = -np.abs(lhs - rhs)
        self.checked += lhs.size
        excess = -slack
        self.worst = max(self.worst, float(excess.max(initial=0.0)))
        bad = np.flatnonzero(excess > self.tol * (1.0 + np.abs(rhs)))
        for i in bad:
            hour = None if hours is None else int(hours[i])
            self.violations.append(Violation(family, key, hour, float(lhs[i]), float(rhs[i]), float(slack[i])))


def _cap(sol: Solution, family, asset):
    key = f"{family}[{asset}]"
    if key not in sol.capacities:
        raise MissingVariable(key)
    return float(sol.capacities[key])


def _prev(T, L):
    t = np.arange(T)
    return (t // L) * L + (t % L - 1) % L


def _active(data: SystemData, config: ScenarioConfig):
    libs = sorted(data.libs, key=lambda s: s.id) if "lib" in config.storage_menu else []
    tes = sorted(data.tes, key=lambda s: s.id) if "tes" in config.storage_menu else []
    return libs, tes


def net_units(data: SystemData, config: ScenarioConfig, sol: Solution) -> dict:
    """Operating unit count per plant after builds, retirements and retrofits."""
    _, tes = _active(data, config)
    hosts = {s.source_plant for s in tes}
    out = {}
    for p in data.thermal:
        n = p.existing_units - _cap(sol, "units_retire", p.id)
        if p.fuel == "gas":
            n += _cap(sol, "units_invest", p.id)
        if p.id in hosts:
            n -= _cap(sol, "units_retrofit", p.id)
        out[p.id] = n
    return out


def _load(data, reduced):
    load = np.zeros(reduced.n_hours)
    for z in data.zones:
        if z.demand_series_ref:
            load = load + reduced.values(z.demand_series_ref)
    return load + sum(d.load_mw for d in data.dcs)


def check_feasibility(data: SystemData, reduced, config: ScenarioConfig | None, solution: Solution,
                      tol: float = REL_TOL, integral: bool | None = None) -> FeasibilityReport:
    """Evaluate every constraint family on ``solution``; report rows off by more than tol·(1+|rhs|)."""
    config = config or data.scenario
    if integral is None:
        integral = not config.relax_integrality
    sol = solution
    T, L = reduced.n_hours, reduced.period_hours
    hours = np.arange(T)
    prev = _prev(T, L)
    c = _Checker(tol)
    libs, tes = _active(data, config)
    hosts = {s.source_plant: s for s in tes}

    for key, v in sol.capacities.items():
        c.check("nonnegativity", key, v, ">=", 0.0)
    for key, arr in sol.dispatch.items():
        c.check("nonnegativity", key, arr, ">=", 0.0, hours)

    # unit decisions
    omega = net_units(data, config, sol)
    for p in sorted(data.thermal, key=lambda p: p.id):
        counts = [("units_retire", _cap(sol, "units_retire", p.id))]
        if p.fuel == "gas":
            counts.append(("units_invest", _cap(sol, "units_invest", p.id)))
        if p.id in hosts:
            counts.append(("units_retrofit", _cap(sol, "units_retrofit", p.id)))
        if integral:
            for fam, v in counts:
                c.check("integrality", f"{fam}[{p.id}]", v, "=", round(v))
        if p.fuel == "coal":
            used = sum(v for fam, v in counts if fam != "units_invest")
            c.check("net_units", p.id, used, "<=", p.existing_units)
        else:
            c.check("net_units", p.id, _cap(sol, "units_retire", p.id), "<=",
                    p.existing_units + _cap(sol, "units_invest", p.id))

        x = sol.series_of("dispatch", p.id)
        cap = p.unit_size_mw * omega[p.id]
        c.check("thermal_max", p.id, x, "<=", cap, hours)
        c.check("thermal_min", p.id, x, ">=", p.min_stable_fraction * cap, hours)
        if L > 1:
            c.check("thermal_ramp_up", p.id, x - x[prev], "<=", p.ramp_up_fraction * cap, hours)
            c.check("thermal_ramp_down", p.id, x[prev] - x, "<=", p.ramp_down_fraction * cap, hours)

    # renewables
    for r in sorted(data.renewables, key=lambda r: r.id):
        build = _cap(sol, "res_build", r.id)
        c.check("res_build_max", r.id, build, "<=", r.max_buildable_mw)
        cf = reduced.values(r.capacity_factor_series_ref)
        c.check("res_avail", r.id, sol.series_of("res_output", r.id), "<=", cf * (r.existing_mw + build), hours)

    # batteries
    for s in libs:
        P, E = _cap(sol, "lib_power", s.id), _cap(sol, "lib_energy", s.id)
        ch, dis, soc = (sol.series_of(f, s.id) for f in ("charge", "discharge", "soc"))
        c.check("lib_duration", s.id, E, "=", s.duration_h * P)
        power = P + s.existing_power_mw
        c.check("lib_charge_max", s.id, ch, "<=", power, hours)
        c.check("lib_discharge_max", s.id, dis, "<=", power, hours)
        c.check("lib_soc_max", s.id, soc, "<=", E + s.duration_h * s.existing_power_mw, hours)
        expect = soc[prev] + s.charge_efficiency * ch - dis / s.discharge_efficiency
        c.check("lib_balance", s.id, soc, "=", expect, hours)

    # thermal storage in retired power blocks
    for s in tes:
        host = data.plant(s.source_plant)
        Pch, Pdis, E = (_cap(sol, f, s.id) for f in ("tes_charge_cap", "tes_power", "tes_energy"))
        ch, dis, soc = (sol.series_of(f, s.id) for f in ("charge", "discharge", "soc"))
        c.check("tes_power_block", s.id, Pdis, "<=", host.unit_size_mw * _cap(sol, "units_retrofit", host.id))
        c.check("tes_duration_min", s.id, E, ">=", s.d_min_h * Pdis)
        c.check("tes_duration_max", s.id, E, "<=", s.d_max_h * Pdis)
        c.check("tes_charge_max", s.id, ch, "<=", Pch, hours)
        c.check("tes_discharge_max", s.id, dis, "<=", Pdis, hours)
        c.check("tes_soc_max", s.id, soc, "<=", E, hours)
        expect = soc[prev] + s.charge_efficiency * ch - dis / s.discharge_efficiency - s.self_discharge_per_h * E
        c.check("tes_balance", s.id, soc, "=", expect, hours)
        if L > 1:
            c.check("tes_ramp_up", s.id, dis - dis[prev], "<=", host.ramp_up_fraction * host.unit_size_mw, hours)
            c.check("tes_ramp_down", s.id, dis[prev] - dis, "<=", host.ramp_down_fraction * host.unit_size_mw, hours)

    # system energy balance, data-center load included
    load = _load(data, reduced)
    unmet = sol.series_of("unmet")
    c.check("unmet_max", "system", unmet, "<=", load, hours)
    supply = unmet.copy()
    for p in data.thermal:
        supply += sol.series_of("dispatch", p.id)
    for r in data.renewables:
        supply += sol.series_of("res_output", r.id)
    for s in libs + tes:
        supply += sol.series_of("discharge", s.id) - sol.series_of("charge", s.id)
    c.check("balance", "system", supply, "=", load, hours)

    if config.carbon_policy == ZC_HOURLY:
        _check_matching(c, data, reduced, config, sol, libs, tes, hours)

    return FeasibilityReport(c.violations, c.checked, c.worst)


def _check_matching(c, data, reduced, config, sol, libs, tes, hours):
    L = reduced.period_hours
    for zone in sorted({d.zone for d in data.dcs}):
        dcs = [d for d in data.dcs if d.zone == zone]
        firm = sum(config.inflexible_fraction(d) * d.load_mw for d in dcs)
        load = sum(d.load_mw for d in dcs)
        res = [r for r in data.renewables if r.zone == zone]
        zl = [s for s in libs if s.zone == zone]
        zt = [s for s in tes if data.plant(s.source_plant).zone == zone]
        local = np.zeros(reduced.n_hours)
        for r in res:
            cap = _cap(sol, "res_build", r.id)
            if config.credit_existing_renewables:
                cap += r.existing_mw
            local += reduced.values(r.capacity_factor_series_ref) * cap
        net = np.zeros(reduced.n_hours)
        for s in zl + zt:
            net += sol.series_of("discharge", s.id) - sol.series_of("charge", s.id)
        c.check("hourly_matching", zone, local + net, ">=", firm, hours)
        if zt:
            tes_ch = sum(sol.series_of("charge", s.id) for s in zt)
            c.check("charging_control", zone, tes_ch, "<=", local, hours)
        window = min(d.flexibility_window_h for d in dcs)
        supply = local + net
        for p in range(reduced.k):
            for start in range(0, L, window):
                lo, hi = p * L + start, p * L + min(start + window, L)
                c.check("daily_matching", zone, supply[lo:hi].sum(), ">=", load * (hi - lo), [lo])


def soc_telescoping(data: SystemData, reduced, config: ScenarioConfig | None, solution: Solution) -> dict:
    """Per storage and period: Σ(η_ch·ch − dis/η_dis) − η_self·Ē·L, zero at any feasible point."""
    config = config or data.scenario
    libs, tes = _active(data, config)
    L = reduced.period_hours
    out = {}
    for s in libs + tes:
        ch, dis = solution.series_of("charge", s.id), solution.series_of("discharge", s.id)
        flow = s.charge_efficiency * ch - dis / s.discharge_efficiency
        loss = 0.0
        if s in tes:
            loss = s.self_discharge_per_h * _cap(solution, "tes_energy", s.id) * L
        for p in range(reduced.k):
            out[(s.id, p)] = float(flow[p * L:(p + 1) * L].sum() - loss)
    return out


def tes_durations(data: SystemData, solution: Solution, min_power: float = 1e-6) -> dict:
    """Energy-to-power ratio of every TES built with positive discharge power."""
    out = {}
    for s in data.tes:
        key = f"tes_power[{s.id}]"
        if key in solution.capacities and solution.capacities[key] > min_power:
            out[s.id] = solution.capacities[f"tes_energy[{s.id}]"] / solution.capacities[key]
    return out


def carbon_account(data: SystemData, reduced, solution: Solution, baseline: Solution | None = None) -> dict:
    """Weighted annual thermal emissions; reduction in percent relative to ``baseline``."""
    w = np.asarray(solution.hour_weights, dtype=float)
    per_plant = {}
    for p in sorted(data.thermal, key=lambda p: p.id):
        x = solution.series_of("dispatch", p.id)
        per_plant[p.id] = float(w @ x) * p.heat_rate_mmbtu_per_mwh * p.co2_per_mmbtu
    total = float(sum(per_plant.values()))
    out = {"total_tco2": total, "per_plant": per_plant, "reduction_vs_baseline": None}
    if baseline is not None:
        base = carbon_account(data, reduced, baseline)["total_tco2"]
        out["baseline_tco2"] = base
        out["reduction_vs_baseline"] = 0.0 if base == total else (
            100.0 * (base - total) / base if base > 0 else float("nan"))
    return out


def cost_breakdown(data: SystemData, solution: Solution, config: ScenarioConfig | None = None) -> dict:
    """Recompute the seven annual cost blocks from capacities and dispatch."""
    config = config or data.scenario
    if not all(s.annualized for s in data.tes):
        data = prepare_costs(data, config.interest_rate)
    libs, tes = _active(data, config)
    hosts = {s.source_plant for s in tes}
    sol = solution
    w = np.asarray(sol.hour_weights, dtype=float)
    out = dict.fromkeys(COST_BLOCKS, 0.0)
    for p in data.thermal:
        n = p.existing_units - _cap(sol, "units_retire", p.id)
        if p.fuel == "gas":
            inv = _cap(sol, "units_invest", p.id)
            n += inv
            out["thermal_capacity"] += p.inv_cost_annualized_per_mw * p.unit_size_mw * inv
        if p.id in hosts:
            n -= _cap(sol, "units_retrofit", p.id)
        out["thermal_capacity"] += p.fom_per_mw * p.unit_size_mw * n
        fuel = p.heat_rate_mmbtu_per_mwh * p.fuel_cost_per_mmbtu
        out["thermal_operation"] += (p.vom_per_mwh + fuel) * float(w @ sol.series_of("dispatch", p.id))
    for r in data.renewables:
        build = _cap(sol, "res_build", r.id)
        out["renewable_capacity"] += r.inv_cost_annualized_per_mw * build + r.fom_per_mw * (build + r.existing_mw)
    for s in libs:
        P, E = _cap(sol, "lib_power", s.id), _cap(sol, "lib_energy", s.id)
        out["lib_sizing"] += (s.inv_power_per_mw * P + s.inv_energy_per_mwh * E
                              + s.fom_per_mw * (P + s.existing_power_mw))
    for s in tes:
        Pch, Pdis, E = (_cap(sol, f, s.id) for f in ("tes_charge_cap", "tes_power", "tes_energy"))
        out["tes_sizing"] += (s.inv_charge_per_mw * Pch + s.inv_retrofit_per_mw * Pdis
                              + s.inv_energy_per_mwhth * E + s.fom_per_mw * Pdis)
        out["tes_operation"] += s.vom_discharge_per_mwh * float(w @ sol.series_of("discharge", s.id))
    out["load_shedding"] = config.voll_per_mwh * float(w @ sol.series_of("unmet"))
    return out
