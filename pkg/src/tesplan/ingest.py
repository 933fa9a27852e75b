"""Read and write system directories and solved results.

A system directory holds ``zones.csv``, ``plants.csv``, ``renewables.csv``,
``storage.csv`` (``kind`` = lib | tes), ``dcs.csv``, ``series/<id>.csv`` with a
single ``value`` column of 8760 rows, and ``scenario.json``.  Numbers are
written with 10 significant digits, so data that already fits that precision
survives a write/load cycle unchanged.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import math
from fractions import Fraction
from pathlib import Path

import numpy as np

from .domain import (
    HOURS_PER_YEAR,
    DataCenter,
    LibSpec,
    RenewableResource,
    ScenarioConfig,
    Solution,
    SystemData,
    TesSpec,
    ThermalPlant,
    Zone,
    validate_system,
)
from .errors import DanglingReference, MissingFile, SchemaError

SYSTEM_FILES = ("zones.csv", "plants.csv", "renewables.csv", "storage.csv", "dcs.csv")

LIB_ONLY = ("zone", "inv_power_per_mw", "inv_energy_per_mwh", "duration_h", "existing_power_mw")
TES_ONLY = ("source_plant", "inv_energy_per_mwhth", "inv_charge_per_mw", "inv_retrofit_per_mw",
            "self_discharge_per_h", "d_min_h", "d_max_h", "vom_discharge_per_mwh",
            "overnight_energy_per_kwhth", "overnight_charge_per_kw", "overnight_retrofit_per_kw")
STORAGE_COLUMNS = ("kind", "id") + LIB_ONLY[:1] + TES_ONLY[:1] + LIB_ONLY[1:] + (
    "fom_per_mw", "charge_efficiency", "discharge_efficiency") + TES_ONLY[1:]


def fmt(v) -> str:
    """Canonical text for a field value: 10 significant digits, empty for None."""
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return f"{float(v):.10g}"
    return str(v)


def _field_types(cls):
    return {f.name: f.type for f in dataclasses.fields(cls)}


def _required(cls):
    return [f.name for f in dataclasses.fields(cls)
            if f.default is dataclasses.MISSING and f.default_factory is dataclasses.MISSING]


def _parse(file, row, column, text, typ):
    text = text.strip()
    optional = "None" in typ
    if text == "":
        if optional:
            return None
        if typ == "str":
            return ""
        raise SchemaError(file, row, column, "value required")
    try:
        if typ.startswith("bool"):
            low = text.lower()
            if low not in ("true", "false", "1", "0"):
                raise ValueError(text)
            return low in ("true", "1")
        if typ.startswith("int"):
            v = float(text)
            if v != int(v):
                raise ValueError(text)
            return int(v)
        if typ.startswith("float"):
            v = float(text)
            if math.isnan(v):
                raise ValueError(text)
            return v
    except ValueError:
        raise SchemaError(file, row, column, f"cannot parse {text!r} as {typ}") from None
    return text


def _read_csv(path: Path):
    if not path.is_file():
        raise MissingFile(str(path))
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(path.name, 0, None, "missing header") from None
        rows = [r for r in reader if any(c.strip() for c in r)]
    header = [h.strip() for h in header]
    for i, r in enumerate(rows, start=2):
        if len(r) != len(header):
            raise SchemaError(path.name, i, None, f"expected {len(header)} fields, got {len(r)}")
    return header, rows


def _records(path: Path, cls):
    """Parse ``path`` into ``cls`` instances, rejecting unknown or missing columns."""
    types = _field_types(cls)
    header, rows = _read_csv(path)
    allowed = set(types)
    for col in header:
        if col not in allowed:
            raise SchemaError(path.name, 1, col, "unknown column")
    if len(set(header)) != len(header):
        raise SchemaError(path.name, 1, None, "duplicate column")
    for col in _required(cls):
        if col not in header:
            raise SchemaError(path.name, 1, col, "missing column")
    out = []
    for i, r in enumerate(rows, start=2):
        kw = {}
        for col, text in zip(header, r):
            if col in types:
                kw[col] = _parse(path.name, i, col, text, types[col])
        out.append((i, kw))
    return out


def _load_storage(path: Path):
    header, rows = _read_csv(path)
    for col in header:
        if col not in STORAGE_COLUMNS:
            raise SchemaError(path.name, 1, col, "unknown column")
    if "kind" not in header or "id" not in header:
        raise SchemaError(path.name, 1, "kind" if "kind" not in header else "id", "missing column")
    libs, tes = [], []
    lib_types, tes_types = _field_types(LibSpec), _field_types(TesSpec)
    for i, r in enumerate(rows, start=2):
        raw = dict(zip(header, r))
        kind = raw["kind"].strip()
        if kind == "lib":
            cls, types, foreign = LibSpec, lib_types, TES_ONLY
        elif kind == "tes":
            cls, types, foreign = TesSpec, tes_types, LIB_ONLY
        else:
            raise SchemaError(path.name, i, "kind", f"kind must be lib or tes, got {kind!r}")
        kw = {}
        for col, text in raw.items():
            if col == "kind":
                continue
            if col in foreign:
                if text.strip():
                    raise SchemaError(path.name, i, col, f"not applicable to {kind}")
                continue
            kw[col] = _parse(path.name, i, col, text, types[col])
        for col in _required(cls):
            if col not in kw:
                raise SchemaError(path.name, i, col, "value required")
        (libs if kind == "lib" else tes).append(cls(**kw))
    return libs, tes


def _load_series(directory: Path, refs):
    out = {}
    for ref in sorted(refs):
        path = directory / "series" / f"{ref}.csv"
        if not path.is_file():
            raise DanglingReference(ref, "series/")
        header, rows = _read_csv(path)
        if header != ["value"]:
            raise SchemaError(path.name, 1, ",".join(header), "series files have a single 'value' column")
        if len(rows) != HOURS_PER_YEAR:
            raise SchemaError(path.name, len(rows) + 1, "value",
                              f"length {len(rows)} rows, expected {HOURS_PER_YEAR}")
        vals = np.empty(len(rows))
        for i, r in enumerate(rows):
            v = _parse(path.name, i + 2, "value", r[0], "float")
            if not math.isfinite(v):
                raise SchemaError(path.name, i + 2, "value", "non-finite value")
            vals[i] = v
        out[ref] = vals
    return out


def load_scenario(path) -> ScenarioConfig:
    """Parse a flat scenario object; unknown keys are errors, absent keys take defaults."""
    path = Path(path)
    if not path.is_file():
        raise MissingFile(str(path))
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaError(path.name, exc.lineno, None, f"invalid JSON: {exc.msg}") from None
    return scenario_from_dict(raw, path.name)


def scenario_from_dict(raw, source="scenario.json") -> ScenarioConfig:
    if not isinstance(raw, dict):
        raise SchemaError(source, 1, None, "scenario must be a JSON object")
    names = {f.name for f in dataclasses.fields(ScenarioConfig)}
    kw = {}
    for key, value in raw.items():
        if key not in names:
            raise SchemaError(source, None, key, "unknown key")
        if key == "storage_menu":
            if not isinstance(value, list) or not all(isinstance(v, str) for v in value):
                raise SchemaError(source, None, key, "must be a list of strings")
            value = frozenset(value)
        elif key in ("relax_integrality", "credit_existing_renewables"):
            if not isinstance(value, bool):
                raise SchemaError(source, None, key, "must be true or false")
        elif key in ("carbon_policy", "solver"):
            if not isinstance(value, str):
                raise SchemaError(source, None, key, "must be a string")
            if key == "solver":
                value = value.replace("-", "_")
        elif key == "representative_weeks":
            if isinstance(value, bool) or not isinstance(value, int):
                raise SchemaError(source, None, key, "must be an integer")
        elif value is not None or key not in ("flexibility_fraction", "time_limit_s"):
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise SchemaError(source, None, key, "must be a number")
            value = float(value)
        kw[key] = value
    cfg = ScenarioConfig(**kw)
    bad = cfg.violations()
    if bad:
        raise SchemaError(source, None, None, "; ".join(bad))
    return cfg


def scenario_to_dict(cfg: ScenarioConfig) -> dict:
    out = {}
    for f in dataclasses.fields(ScenarioConfig):
        v = getattr(cfg, f.name)
        out[f.name] = sorted(v) if f.name == "storage_menu" else v
    return out


def load_system(dir_path, validate: bool = True) -> SystemData:
    """Load a system directory; with ``validate`` any invariant violation raises SchemaError."""
    d = Path(dir_path)
    if not d.is_dir():
        raise MissingFile(str(d))
    zones = [Zone(**kw) for _, kw in _records(d / "zones.csv", Zone)]
    plants = [ThermalPlant(**kw) for _, kw in _records(d / "plants.csv", ThermalPlant)]
    res = [RenewableResource(**kw) for _, kw in _records(d / "renewables.csv", RenewableResource)]
    libs, tes = _load_storage(d / "storage.csv")
    dcs = [DataCenter(**kw) for _, kw in _records(d / "dcs.csv", DataCenter)]
    scenario = load_scenario(d / "scenario.json")

    zone_ids = {z.id for z in zones}
    plant_ids = {p.id for p in plants}
    for owner, items in (("plants.csv", plants), ("renewables.csv", res), ("storage.csv", libs), ("dcs.csv", dcs)):
        for x in items:
            if x.zone not in zone_ids:
                raise DanglingReference(x.zone, f"{owner} ({x.id})")
    for s in tes:
        if s.source_plant not in plant_ids:
            raise DanglingReference(s.source_plant, f"storage.csv ({s.id})")
    refs = {z.demand_series_ref for z in zones if z.demand_series_ref}
    refs |= {r.capacity_factor_series_ref for r in res}
    series = _load_series(d, refs)
    data = SystemData(zones=zones, thermal=plants, renewables=res, libs=libs, tes=tes, dcs=dcs,
                      series=series, scenario=scenario)
    if validate:
        bad = validate_system(data)
        if bad:
            raise SchemaError(d.name, None, None, "; ".join(bad))
    return data


def _write_csv(path: Path, header, rows):
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _dump(path: Path, cls, items):
    cols = [f.name for f in dataclasses.fields(cls)]
    _write_csv(path, cols, [[fmt(getattr(x, c)) for c in cols] for x in items])


def write_system(data: SystemData, dir_path) -> Path:
    d = Path(dir_path)
    d.mkdir(parents=True, exist_ok=True)
    _dump(d / "zones.csv", Zone, data.zones)
    _dump(d / "plants.csv", ThermalPlant, data.thermal)
    _dump(d / "renewables.csv", RenewableResource, data.renewables)
    _dump(d / "dcs.csv", DataCenter, data.dcs)
    rows = []
    for s in data.libs:
        rows.append(["lib"] + [fmt(getattr(s, c)) if c in _field_types(LibSpec) else "" for c in STORAGE_COLUMNS[1:]])
    for s in data.tes:
        rows.append(["tes"] + [fmt(getattr(s, c)) if c in _field_types(TesSpec) else "" for c in STORAGE_COLUMNS[1:]])
    _write_csv(d / "storage.csv", STORAGE_COLUMNS, rows)
    for ref, values in sorted(data.series.items()):
        _write_csv(d / "series" / f"{ref}.csv", ["value"], [[fmt(float(v))] for v in values])
    (d / "scenario.json").write_text(json.dumps(scenario_to_dict(data.scenario), indent=2) + "\n")
    return d


# -- results ------------------------------------------------------------------

def _exact(v: float) -> str:
    return repr(float(v))


def write_solution(solution: Solution, dir_path, reduced=None, extra_costs: dict | None = None,
                   emissions: dict | None = None) -> Path:
    """Write capacities, hourly dispatch, cost blocks and emissions with exact float text."""
    d = Path(dir_path)
    d.mkdir(parents=True, exist_ok=True)
    _write_csv(d / "capacities.csv", ["variable", "value"],
               [[k, _exact(v)] for k, v in sorted(solution.capacities.items())])
    rows = []
    for key in sorted(solution.dispatch):
        for t, v in enumerate(np.asarray(solution.dispatch[key], dtype=float)):
            rows.append([str(t), key, _exact(v)])
    _write_csv(d / "dispatch.csv", ["hour", "variable", "value"], rows)
    costs = {"objective_usd_per_yr": float(solution.objective),
             "breakdown": {k: float(v) for k, v in solution.breakdown.items()},
             "status": solution.status, "gap": float(solution.gap)}
    if extra_costs:
        costs.update(extra_costs)
    (d / "costs.json").write_text(json.dumps(costs, indent=2, sort_keys=True) + "\n")
    em = emissions if emissions is not None else {"total_tco2": float(solution.annual_emissions_tco2)}
    (d / "emissions.json").write_text(json.dumps(em, indent=2, sort_keys=True) + "\n")
    weights = [float(w) for w in solution.hour_weights]
    index = {"period_hours": int(solution.period_hours), "hour_weights": weights}
    if reduced is not None:
        index["rep_index_start"] = [int(r[0]) for r in reduced.rep_index]
        index["weights"] = [str(Fraction(w)) for w in reduced.weights]
    (d / "time_index.json").write_text(json.dumps(index, indent=2) + "\n")
    return d


def read_dispatch(path) -> dict:
    """``variable -> array over hours`` from a dispatch.csv."""
    header, rows = _read_csv(Path(path))
    if header != ["hour", "variable", "value"]:
        raise SchemaError(Path(path).name, 1, None, "expected hour,variable,value")
    tmp = {}
    for i, (h, key, v) in enumerate(rows, start=2):
        tmp.setdefault(key, {})[int(h)] = float(v)
    out = {}
    for key, values in tmp.items():
        n = max(values) + 1
        arr = np.zeros(n)
        for t, v in values.items():
            arr[t] = v
        out[key] = arr
    return out


def read_time_index(dir_path):
    """Rebuild the reduced time index recorded next to a solution (series restricted from ``data``)."""
    return json.loads((Path(dir_path) / "time_index.json").read_text())


def reduced_from_index(index: dict, data: SystemData):
    from .tsreduce import _restrict, ReducedSeries

    L = index["period_hours"]
    starts = index["rep_index_start"]
    grid = np.array([np.arange(s, s + L) for s in starts])
    weights = tuple(Fraction(w) for w in index["weights"])
    return ReducedSeries(L, grid, weights, _restrict(data.series, grid))


def read_solution(dir_path) -> Solution:
    d = Path(dir_path)
    for name in ("capacities.csv", "dispatch.csv", "costs.json", "time_index.json"):
        if not (d / name).is_file():
            raise MissingFile(str(d / name))
    header, rows = _read_csv(d / "capacities.csv")
    caps = {k: float(v) for k, v in rows}
    costs = json.loads((d / "costs.json").read_text())
    index = read_time_index(d)
    em_path = d / "emissions.json"
    em = json.loads(em_path.read_text()) if em_path.is_file() else {}
    return Solution(
        status=costs.get("status", "optimal"),
        objective=costs["objective_usd_per_yr"],
        breakdown=costs["breakdown"],
        capacities=caps,
        dispatch=read_dispatch(d / "dispatch.csv"),
        hour_weights=np.array(index["hour_weights"], dtype=float),
        period_hours=index["period_hours"],
        annual_emissions_tco2=float(em.get("total_tco2", float("nan"))),
        gap=costs.get("gap", 0.0),
    )
