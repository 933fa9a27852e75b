"""Capacity-expansion MILP: retirement/retrofit of coal units, renewable and
storage sizing, hourly operation and data-center matching rules.

``build`` returns a :class:`MilpModel` whose columns are addressed through a
registry of semantic keys such as ``units_retrofit[coal1]`` or
``soc[tes_a,t=17]``.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp

from .domain import STORAGE_KINDS, UNCONSTRAINED, ZC_HOURLY, ScenarioConfig, SystemData
from .errors import ConfigError
from .tsreduce import ReducedSeries

BLOCKS = (
    "thermal_capacity",
    "renewable_capacity",
    "lib_sizing",
    "tes_sizing",
    "thermal_operation",
    "tes_operation",
    "load_shedding",
)

INF = np.inf


@dataclass
class MilpModel:
    var_names: list
    is_int: np.ndarray
    lb: np.ndarray
    ub: np.ndarray
    obj: np.ndarray
    obj_constant: float
    obj_block: np.ndarray
    block_constants: dict
    row_names: list
    sense: np.ndarray
    rhs: np.ndarray
    A: sp.csr_matrix
    registry: dict = field(default_factory=dict)
    row_registry: dict = field(default_factory=dict)
    hours: int = 0

    @property
    def n_vars(self) -> int:
        return len(self.var_names)

    @property
    def n_rows(self) -> int:
        return len(self.row_names)

    @property
    def integer_indices(self) -> np.ndarray:
        return np.flatnonzero(self.is_int)

    def row_bounds(self):
        lo = np.where(self.sense == "L", -INF, self.rhs)
        hi = np.where(self.sense == "G", INF, self.rhs)
        return lo, hi

    def relaxed(self) -> "MilpModel":
        return replace(self, is_int=np.zeros_like(self.is_int))

    def with_bounds(self, lb, ub) -> "MilpModel":
        return replace(self, lb=np.asarray(lb, float), ub=np.asarray(ub, float))

    def objective_value(self, x) -> float:
        return float(self.obj @ x) + self.obj_constant

    def block_values(self, x) -> dict:
        out = {}
        for b, name in enumerate(BLOCKS):
            mask = self.obj_block == b
            out[name] = float(self.obj[mask] @ np.asarray(x)[mask]) + self.block_constants.get(name, 0.0)
        return out

    def row_members(self, row_name: str) -> list:
        i = self.row_registry[row_name]
        s, e = self.A.indptr[i], self.A.indptr[i + 1]
        return [self.var_names[j] for j in self.A.indices[s:e]]

    def max_violation(self, x) -> float:
        act = self.A @ x
        lo, hi = self.row_bounds()
        v = np.maximum(lo - act, act - hi)
        b = np.maximum(self.lb - x, x - self.ub)
        return float(max(v.max(initial=0.0), b.max(initial=0.0)))


class ModelBuilder:
    def __init__(self):
        self.names, self.kinds, self.lb, self.ub = [], [], [], []
        self.cost, self.block = [], []
        self.constants = defaultdict(float)
        self.registry = {}
        self.row_names, self.senses, self.rhs = [], [], []
        self.coo_r, self.coo_c, self.coo_v = [], [], []
        self.row_registry = {}

    def var(self, name, lower=0.0, upper=INF, integer=False, cost=0.0, block=None):
        if name in self.registry:
            raise KeyError(f"duplicate variable {name}")
        idx = len(self.names)
        self.registry[name] = idx
        self.names.append(name)
        self.kinds.append(bool(integer))
        self.lb.append(float(lower))
        self.ub.append(float(upper))
        self.cost.append(float(cost))
        self.block.append(BLOCKS.index(block) if block else -1)
        return idx

    def constant(self, value, block):
        self.constants[block] += float(value)

    def row(self, name, terms, sense, rhs):
        if name in self.row_registry:
            raise KeyError(f"duplicate row {name}")
        merged = defaultdict(float)
        for j, a in terms:
            merged[j] += a
        i = len(self.row_names)
        self.row_registry[name] = i
        self.row_names.append(name)
        self.senses.append(sense)
        self.rhs.append(float(rhs))
        for j in sorted(merged):
            if merged[j] != 0.0:
                self.coo_r.append(i)
                self.coo_c.append(j)
                self.coo_v.append(merged[j])
        return i

    def finish(self, hours) -> MilpModel:
        m, n = len(self.row_names), len(self.names)
        A = sp.csr_matrix((self.coo_v, (self.coo_r, self.coo_c)), shape=(m, n))
        A.sort_indices()
        obj = np.array(self.cost)
        if not (np.all(np.isfinite(A.data)) and np.all(np.isfinite(obj)) and np.all(np.isfinite(self.rhs))):
            raise ValueError("model contains non-finite coefficients")
        consts = {b: self.constants.get(b, 0.0) for b in BLOCKS}
        return MilpModel(
            var_names=self.names,
            is_int=np.array(self.kinds, dtype=bool),
            lb=np.array(self.lb),
            ub=np.array(self.ub),
            obj=obj,
            obj_constant=float(sum(consts.values())),
            obj_block=np.array(self.block, dtype=int),
            block_constants=consts,
            row_names=self.row_names,
            sense=np.array(self.senses, dtype="<U1"),
            rhs=np.array(self.rhs),
            A=A,
            registry=self.registry,
            row_registry=self.row_registry,
            hours=hours,
        )


def _key(name, asset=None, t=None):
    inner = [s for s in (asset, None if t is None else f"t={t}") if s is not None]
    return f"{name}[{','.join(inner)}]" if inner else name


@dataclass
class _Context:
    data: SystemData
    reduced: ReducedSeries
    config: ScenarioConfig
    b: ModelBuilder
    T: int
    w: np.ndarray

    def prev(self, t):
        return self.reduced.previous_hour(t)

    def v(self, name, asset=None, t=None):
        return self.b.registry[_key(name, asset, t)]

    def has(self, name, asset=None, t=None):
        return _key(name, asset, t) in self.b.registry


def active_storage(data: SystemData, config: ScenarioConfig):
    libs = sorted(data.libs, key=lambda s: s.id) if "lib" in config.storage_menu else []
    tes = sorted(data.tes, key=lambda s: s.id) if "tes" in config.storage_menu else []
    return libs, tes


def retrofit_plants(data: SystemData, config: ScenarioConfig) -> set:
    _, tes = active_storage(data, config)
    return {s.source_plant for s in tes}


def total_dc_load(data: SystemData) -> float:
    return float(sum(d.load_mw for d in data.dcs))


def system_load(data: SystemData, reduced: ReducedSeries) -> np.ndarray:
    """Hourly load to serve on the reduced index, data centers included."""
    load = np.zeros(reduced.n_hours)
    for z in data.zones:
        if z.demand_series_ref:
            load = load + reduced.values(z.demand_series_ref)
    return load + total_dc_load(data)


def _declare_variables(ctx: _Context):
    data, b, T, w, cfg = ctx.data, ctx.b, ctx.T, ctx.w, ctx.config
    plants = sorted(data.thermal, key=lambda p: p.id)
    retro = retrofit_plants(data, cfg)
    libs, tes = active_storage(data, cfg)
    res = sorted(data.renewables, key=lambda r: r.id)

    # investment-stage families
    for p in plants:
        if p.fuel == "gas":
            b.var(_key("units_invest", p.id), 0, INF, True,
                  (p.inv_cost_annualized_per_mw + p.fom_per_mw) * p.unit_size_mw, "thermal_capacity")
    for p in plants:
        ub = p.existing_units if p.fuel == "coal" else INF
        b.var(_key("units_retire", p.id), 0, ub, True, -p.fom_per_mw * p.unit_size_mw, "thermal_capacity")
        b.constant(p.fom_per_mw * p.unit_size_mw * p.existing_units, "thermal_capacity")
    for p in plants:
        if p.id in retro:
            b.var(_key("units_retrofit", p.id), 0, p.existing_units, True,
                  -p.fom_per_mw * p.unit_size_mw, "thermal_capacity")
    for r in res:
        b.var(_key("res_build", r.id), 0, r.max_buildable_mw, False,
              r.inv_cost_annualized_per_mw + r.fom_per_mw, "renewable_capacity")
        b.constant(r.fom_per_mw * r.existing_mw, "renewable_capacity")
    for s in libs:
        b.var(_key("lib_power", s.id), 0, INF, False, s.inv_power_per_mw + s.fom_per_mw, "lib_sizing")
        b.constant(s.fom_per_mw * s.existing_power_mw, "lib_sizing")
    for s in libs:
        b.var(_key("lib_energy", s.id), 0, INF, False, s.inv_energy_per_mwh, "lib_sizing")
    for s in tes:
        b.var(_key("tes_charge_cap", s.id), 0, INF, False, s.inv_charge_per_mw, "tes_sizing")
    for s in tes:
        host = data.plant(s.source_plant)
        b.var(_key("tes_power", s.id), 0, host.unit_size_mw * host.existing_units, False,
              s.inv_retrofit_per_mw + s.fom_per_mw, "tes_sizing")
    for s in tes:
        b.var(_key("tes_energy", s.id), 0, INF, False, s.inv_energy_per_mwhth, "tes_sizing")

    # operation-stage families, ordered by id then hour
    for p in plants:
        ub = p.unit_size_mw * p.existing_units if p.fuel == "coal" else INF
        for t in range(T):
            b.var(_key("dispatch", p.id, t), 0, ub, False, w[t] * p.marginal_cost_per_mwh, "thermal_operation")
    for r in res:
        cf = ctx.reduced.values(r.capacity_factor_series_ref)
        cap = r.existing_mw + r.max_buildable_mw
        for t in range(T):
            b.var(_key("res_output", r.id, t), 0, cf[t] * cap)
    for family in ("charge", "discharge", "soc"):
        for s in libs:
            for t in range(T):
                b.var(_key(family, s.id, t))
        for s in tes:
            host = data.plant(s.source_plant)
            for t in range(T):
                if family == "discharge":
                    b.var(_key(family, s.id, t), 0, host.unit_size_mw * host.existing_units, False,
                          w[t] * s.vom_discharge_per_mwh, "tes_operation")
                else:
                    b.var(_key(family, s.id, t))
    load = system_load(data, ctx.reduced)
    for t in range(T):
        b.var(_key("unmet", None, t), 0, load[t], False, w[t] * cfg.voll_per_mwh, "load_shedding")


def _net_unit_terms(ctx, p, scale):
    """Terms of ``scale * size * (net units - existing)`` as (column, coef) pairs."""
    size = p.unit_size_mw
    terms = [(ctx.v("units_retire", p.id), -scale * size)]
    if ctx.has("units_retrofit", p.id):
        terms.append((ctx.v("units_retrofit", p.id), -scale * size))
    if ctx.has("units_invest", p.id):
        terms.append((ctx.v("units_invest", p.id), scale * size))
    return terms


def add_thermal_constraints(ctx: _Context):
    """Net-unit accounting, stable-generation window and ramp limits."""
    b, T = ctx.b, ctx.T
    for p in sorted(ctx.data.thermal, key=lambda p: p.id):
        if p.fuel == "coal" and ctx.has("units_retrofit", p.id):
            b.row(_key("net_units", p.id),
                  [(ctx.v("units_retire", p.id), 1.0), (ctx.v("units_retrofit", p.id), 1.0)], "L", p.existing_units)
        elif p.fuel == "gas":
            b.row(_key("net_units", p.id),
                  [(ctx.v("units_retire", p.id), 1.0), (ctx.v("units_invest", p.id), -1.0)], "L", p.existing_units)
        cap_exist = p.unit_size_mw * p.existing_units
        gamma = p.min_stable_fraction
        net = _net_unit_terms(ctx, p, 1.0)
        for t in range(T):
            x = ctx.v("dispatch", p.id, t)
            # dispatch <= size * net units
            b.row(_key("thermal_max", p.id, t), [(x, 1.0)] + [(j, -a) for j, a in net], "L", cap_exist)
            if gamma > 0:
                b.row(_key("thermal_min", p.id, t),
                      [(x, 1.0)] + [(j, -gamma * a) for j, a in net], "G", gamma * cap_exist)
        if ctx.reduced.period_hours < 2:
            continue
        # ramp rows are implied by the stable window when the ramp covers it
        for label, frac, sign in (("thermal_ramp_up", p.ramp_up_fraction, 1.0),
                                  ("thermal_ramp_down", p.ramp_down_fraction, -1.0)):
            if frac >= 1.0 - gamma:
                continue
            for t in range(T):
                x, xp = ctx.v("dispatch", p.id, t), ctx.v("dispatch", p.id, ctx.prev(t))
                b.row(_key(label, p.id, t),
                      [(x, sign), (xp, -sign)] + [(j, -frac * a) for j, a in net], "L", frac * cap_exist)


def _storage_balance(ctx, s, eta_ch, eta_dis, self_loss_col=None, self_loss=0.0, prefix="lib"):
    b = ctx.b
    for t in range(ctx.T):
        terms = [
            (ctx.v("soc", s.id, t), 1.0),
            (ctx.v("soc", s.id, ctx.prev(t)), -1.0),
            (ctx.v("charge", s.id, t), -eta_ch),
            (ctx.v("discharge", s.id, t), 1.0 / eta_dis),
        ]
        if self_loss_col is not None and self_loss > 0:
            terms.append((self_loss_col, self_loss))
        b.row(_key(f"{prefix}_balance", s.id, t), terms, "E", 0.0)


def add_lib_constraints(ctx: _Context):
    """Symmetric power, fixed-duration energy and periodic energy balance."""
    b = ctx.b
    libs, _ = active_storage(ctx.data, ctx.config)
    for s in libs:
        P, E = ctx.v("lib_power", s.id), ctx.v("lib_energy", s.id)
        b.row(_key("lib_duration", s.id), [(E, 1.0), (P, -s.duration_h)], "E", 0.0)
        for t in range(ctx.T):
            b.row(_key("lib_charge_max", s.id, t), [(ctx.v("charge", s.id, t), 1.0), (P, -1.0)],
                  "L", s.existing_power_mw)
            b.row(_key("lib_discharge_max", s.id, t), [(ctx.v("discharge", s.id, t), 1.0), (P, -1.0)],
                  "L", s.existing_power_mw)
            b.row(_key("lib_soc_max", s.id, t), [(ctx.v("soc", s.id, t), 1.0), (E, -1.0)],
                  "L", s.duration_h * s.existing_power_mw)
        _storage_balance(ctx, s, s.charge_efficiency, s.discharge_efficiency, prefix="lib")


def add_tes_constraints(ctx: _Context):
    """Power-block cap, duration window, energy balance with self-discharge, ramps."""
    b = ctx.b
    _, tes = active_storage(ctx.data, ctx.config)
    for s in tes:
        host = ctx.data.plant(s.source_plant)
        Pch, Pdis, E = ctx.v("tes_charge_cap", s.id), ctx.v("tes_power", s.id), ctx.v("tes_energy", s.id)
        b.row(_key("tes_power_block", s.id), [(Pdis, 1.0), (ctx.v("units_retrofit", host.id), -host.unit_size_mw)],
              "L", 0.0)
        b.row(_key("tes_duration_min", s.id), [(Pdis, s.d_min_h), (E, -1.0)], "L", 0.0)
        b.row(_key("tes_duration_max", s.id), [(E, 1.0), (Pdis, -s.d_max_h)], "L", 0.0)
        for t in range(ctx.T):
            b.row(_key("tes_charge_max", s.id, t), [(ctx.v("charge", s.id, t), 1.0), (Pch, -1.0)], "L", 0.0)
            b.row(_key("tes_discharge_max", s.id, t), [(ctx.v("discharge", s.id, t), 1.0), (Pdis, -1.0)], "L", 0.0)
            b.row(_key("tes_soc_max", s.id, t), [(ctx.v("soc", s.id, t), 1.0), (E, -1.0)], "L", 0.0)
        _storage_balance(ctx, s, s.charge_efficiency, s.discharge_efficiency, E, s.self_discharge_per_h, "tes")
        if ctx.reduced.period_hours < 2:
            continue
        # discharge never exceeds the host's existing capacity, so wider ramps are implied
        for label, frac, sign in (("tes_ramp_up", host.ramp_up_fraction, 1.0),
                                  ("tes_ramp_down", host.ramp_down_fraction, -1.0)):
            if frac >= host.existing_units:
                continue
            for t in range(ctx.T):
                x, xp = ctx.v("discharge", s.id, t), ctx.v("discharge", s.id, ctx.prev(t))
                b.row(_key(label, s.id, t), [(x, sign), (xp, -sign)], "L", frac * host.unit_size_mw)


def add_renewable_constraints(ctx: _Context):
    b = ctx.b
    for r in sorted(ctx.data.renewables, key=lambda r: r.id):
        if r.max_buildable_mw <= 0:
            continue  # output bound alone caps existing capacity
        cf = ctx.reduced.values(r.capacity_factor_series_ref)
        build = ctx.v("res_build", r.id)
        for t in range(ctx.T):
            if cf[t] <= 0:
                continue
            b.row(_key("res_avail", r.id, t), [(ctx.v("res_output", r.id, t), 1.0), (build, -cf[t])],
                  "L", cf[t] * r.existing_mw)


def add_balance_constraints(ctx: _Context):
    """One system-wide energy balance per hour; data-center load is always served."""
    b, data = ctx.b, ctx.data
    libs, tes = active_storage(data, ctx.config)
    load = system_load(data, ctx.reduced)
    plants = sorted(data.thermal, key=lambda p: p.id)
    res = sorted(data.renewables, key=lambda r: r.id)
    for t in range(ctx.T):
        terms = [(ctx.v("dispatch", p.id, t), 1.0) for p in plants]
        terms += [(ctx.v("res_output", r.id, t), 1.0) for r in res]
        for s in libs + tes:
            terms += [(ctx.v("discharge", s.id, t), 1.0), (ctx.v("charge", s.id, t), -1.0)]
        terms.append((ctx.v("unmet", None, t), 1.0))
        b.row(_key("balance", None, t), terms, "E", load[t])


def zone_assets(data: SystemData, config: ScenarioConfig, zone: str):
    libs, tes = active_storage(data, config)
    res = [r for r in sorted(data.renewables, key=lambda r: r.id) if r.zone == zone]
    zlibs = [s for s in libs if s.zone == zone]
    ztes = [s for s in tes if data.tes_zone(s) == zone]
    return res, zlibs, ztes


def add_dc_constraints(ctx: _Context):
    """Hourly matching, charging from local renewables, and windowed daily energy."""
    b, data, cfg = ctx.b, ctx.data, ctx.config
    if cfg.carbon_policy != ZC_HOURLY:
        return
    L = ctx.reduced.period_hours
    for zone in data.dc_zones():
        dcs = [d for d in data.dcs if d.zone == zone]
        res, zlibs, ztes = zone_assets(data, cfg, zone)
        if not any(r.max_buildable_mw > 0 for r in res) and not zlibs and not ztes:
            raise ConfigError(f"data-center zone {zone} has no co-located candidate assets")
        firm = sum(cfg.inflexible_fraction(d) * d.load_mw for d in dcs)
        load = sum(d.load_mw for d in dcs)
        cfs = [ctx.reduced.values(r.capacity_factor_series_ref) for r in res]

        def supply(t):
            terms = [(ctx.v("res_build", r.id), cf[t]) for r, cf in zip(res, cfs)]
            for s in zlibs + ztes:
                terms += [(ctx.v("discharge", s.id, t), 1.0), (ctx.v("charge", s.id, t), -1.0)]
            credit = sum(r.existing_mw * cf[t] for r, cf in zip(res, cfs)) if cfg.credit_existing_renewables else 0.0
            return terms, credit

        for t in range(ctx.T):
            terms, credit = supply(t)
            b.row(_key("hourly_matching", zone, t), terms, "G", firm - credit)
            if ztes:
                ch = [(ctx.v("charge", s.id, t), 1.0) for s in ztes]
                avail = [(ctx.v("res_build", r.id), -cf[t]) for r, cf in zip(res, cfs)]
                b.row(_key("charging_control", zone, t), ch + avail, "L", credit)
        window = min(d.flexibility_window_h for d in dcs)
        for p in range(ctx.reduced.k):
            for start in range(0, L, window):
                hours = range(p * L + start, p * L + min(start + window, L))
                terms, credit = [], 0.0
                for t in hours:
                    tt, c = supply(t)
                    terms += tt
                    credit += c
                b.row(_key("daily_matching", f"{zone},d={p * L + start}"), terms, "G", load * len(hours) - credit)


def build(data: SystemData, reduced: ReducedSeries, config: ScenarioConfig | None = None) -> MilpModel:
    """Assemble the full model; TES costs must already be annualized."""
    config = config or data.scenario
    for s in data.tes:
        if "tes" in config.storage_menu and not s.annualized:
            raise ConfigError(f"tes {s.id}: annualize costs first (finance.prepare_costs)")
    if not set(config.storage_menu) <= set(STORAGE_KINDS):
        raise ConfigError(f"unknown storage kinds in {sorted(config.storage_menu)}")
    if config.carbon_policy not in (ZC_HOURLY, UNCONSTRAINED):
        raise ConfigError(f"unknown carbon policy {config.carbon_policy!r}")
    ctx = _Context(data, reduced, config, ModelBuilder(), reduced.n_hours, reduced.hour_weights)
    _declare_variables(ctx)
    add_thermal_constraints(ctx)
    add_renewable_constraints(ctx)
    add_lib_constraints(ctx)
    add_tes_constraints(ctx)
    add_balance_constraints(ctx)
    add_dc_constraints(ctx)
    model = ctx.b.finish(ctx.T)
    if config.relax_integrality:
        model = model.relaxed()
    return model


def build_objective(data: SystemData, reduced: ReducedSeries, config: ScenarioConfig | None = None):
    """Objective coefficients by semantic key plus the per-block constants."""
    model = build(data, reduced, config)
    coefs = {name: float(c) for name, c in zip(model.var_names, model.obj) if c != 0.0}
    return coefs, dict(model.block_constants)


_HOURLY = ("dispatch", "res_output", "charge", "discharge", "soc", "unmet")


def to_solution(model: MilpModel, reduced: ReducedSeries, x, status="optimal", gap=0.0):
    """Map a primal vector onto a :class:`Solution` keyed by semantic names."""
    from .domain import Solution

    x = np.asarray(x, dtype=float).copy()
    ints = model.is_int
    x[ints] = np.round(x[ints])
    # clip round-off below zero on nonnegative columns
    x = np.where((model.lb == 0) & (x < 0) & (x > -1e-9), 0.0, x)
    capacities = {}
    hourly = defaultdict(lambda: np.zeros(model.hours))
    for name, j in model.registry.items():
        family, _, rest = name.partition("[")
        rest = rest.rstrip("]")
        if family in _HOURLY:
            parts = rest.split(",")
            t = int(parts[-1][2:])
            asset = parts[0] if len(parts) > 1 else None
            key = family if asset is None else f"{family}[{asset}]"
            hourly[key][t] = x[j]
        else:
            capacities[name] = float(x[j])
    return Solution(
        status=status,
        objective=model.objective_value(x),
        breakdown=model.block_values(x),
        capacities=capacities,
        dispatch=dict(hourly),
        hour_weights=reduced.hour_weights,
        period_hours=reduced.period_hours,
        gap=gap,
    )


def solution_vector(model: MilpModel, solution) -> np.ndarray:
    """Inverse of :func:`to_solution`; missing entries are zero."""
    x = np.zeros(model.n_vars)
    for name, j in model.registry.items():
        family, _, rest = name.partition("[")
        rest = rest.rstrip("]")
        if family in _HOURLY:
            parts = rest.split(",")
            t = int(parts[-1][2:])
            key = family if len(parts) == 1 else f"{family}[{parts[0]}]"
            if key in solution.dispatch:
                x[j] = solution.dispatch[key][t]
        else:
            x[j] = solution.capacities.get(name, 0.0)
    return x
