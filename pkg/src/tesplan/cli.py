"""Command-line scenario runner: ``tesplan plan | sweep | reduce-ts | verify``."""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction
from pathlib import Path

from . import ingest
from .domain import UNCONSTRAINED, ZC_HOURLY, ScenarioConfig, SystemData
from .errors import Infeasible, TesplanError, TimeLimit
from .finance import prepare_costs
from .model import build, total_dc_load
from .pipeline import run_plan, solve_model
from .solve.mps import export_mps
from .tsreduce import reduce_system
from .verify import COST_BLOCKS, carbon_account, check_feasibility, cost_breakdown

EXIT_OK, EXIT_INPUT, EXIT_INFEASIBLE, EXIT_VERIFY = 0, 2, 3, 4

MENUS = {"lib": ("lib",), "tes": ("tes",), "lib+tes": ("lib", "tes"), "none": ()}
POLICIES = {ZC_HOURLY: "zc", UNCONSTRAINED: "uc"}
FLEX = (0.0, 0.2)
SUMMARY_COLUMNS = ("scenario_id", "storage_menu", "policy", "flex", "objective_usd", "cost_per_mw_dc_usd",
                   "tco2", "reduction_pct", "status")


def _money(v):
    return f"{v:>18,.0f}"


def breakdown_table(breakdown: dict, objective: float) -> str:
    lines = [f"{'cost block':<22}{'$/yr':>18}"]
    for name in COST_BLOCKS:
        lines.append(f"{name:<22}{_money(breakdown.get(name, 0.0))}")
    lines.append(f"{'total':<22}{_money(objective)}")
    return "\n".join(lines)


def capacity_summary(data: SystemData, solution) -> str:
    caps = solution.capacities
    lines = []
    for p in sorted(data.thermal, key=lambda p: p.id):
        ret = caps.get(f"units_retire[{p.id}]", 0.0)
        retro = caps.get(f"units_retrofit[{p.id}]", 0.0)
        inv = caps.get(f"units_invest[{p.id}]", 0.0)
        net = p.existing_units + inv - ret - retro
        lines.append(f"  {p.id:<14} units {p.existing_units:g} -> {net:g}"
                     f"  (built {inv:g}, retired {ret:g}, retrofit {retro:g})")
    for key in sorted(caps):
        family = key.partition("[")[0]
        if family.startswith("units_"):
            continue
        if abs(caps[key]) > 1e-9:
            unit = "MWh_th" if family == "tes_energy" else ("MWh" if family == "lib_energy" else "MW")
            lines.append(f"  {key:<30} {caps[key]:14.2f} {unit}")
    return "\n".join(lines)


def no_dc_baseline(data: SystemData, config: ScenarioConfig, reduced) -> float:
    """Objective of the same system and storage menu without any data-center load."""
    base = data.replace(dcs=())
    cfg = dataclasses.replace(config, carbon_policy=UNCONSTRAINED)
    model = build(prepare_costs(base, cfg.interest_rate), reduced, cfg)
    return solve_model(model, cfg).objective


def _resolve_config(args, data: SystemData) -> ScenarioConfig:
    cfg = ingest.load_scenario(args.scenario) if getattr(args, "scenario", None) else data.scenario
    changes = {}
    if getattr(args, "k", None) is not None:
        changes["representative_weeks"] = args.k
    if getattr(args, "solver", None):
        changes["solver"] = args.solver.replace("-", "_")
    cfg = dataclasses.replace(cfg, **changes)
    bad = cfg.violations()
    if bad:
        raise TesplanError("; ".join(bad))
    return cfg


def _write_run_record(out_dir, data_dir, cfg, seed):
    record = {"data": str(Path(data_dir).resolve()), "seed": seed, "scenario": ingest.scenario_to_dict(cfg)}
    (Path(out_dir) / "run.json").write_text(json.dumps(record, indent=2, sort_keys=True) + "\n")


def run_cell(data_dir, cfg: ScenarioConfig, seed: int, out_dir, baseline_cost=None):
    """Plan one scenario into ``out_dir``; returns (status, PlanResult or None, extra costs)."""
    data = ingest.load_system(data_dir)
    try:
        res = run_plan(data, cfg, seed=seed)
    except Infeasible:
        return "infeasible", None, {}
    except TimeLimit:
        return "time_limit", None, {}
    sol = res.solution
    dc = total_dc_load(data)
    extra = {}
    if baseline_cost is not None and dc > 0:
        extra["cost_per_mw_dc_usd"] = (sol.objective - baseline_cost) / dc
        extra["no_dc_baseline_usd"] = baseline_cost
    emissions = carbon_account(res.data, res.reduced, sol)
    ingest.write_solution(sol, out_dir, res.reduced, extra, emissions)
    _write_run_record(out_dir, data_dir, cfg, seed)
    status = "optimal" if res.report.ok else "verify_failed"
    return status, res, extra


def cmd_plan(args) -> int:
    try:
        data = ingest.load_system(args.data)
        cfg = _resolve_config(args, data)
        out = Path(args.out)
        if cfg.solver == "mps_export":
            data_a = prepare_costs(data, cfg.interest_rate)
            reduced = reduce_system(data_a, cfg.representative_weeks, args.seed)
            model = build(data_a, reduced, cfg)
            out.mkdir(parents=True, exist_ok=True)
            export_mps(model, out / "model.mps")
            _write_run_record(out, args.data, cfg, args.seed)
            print(f"wrote {out / 'model.mps'} and {out / 'names.map'} "
                  f"({model.n_vars} columns, {model.n_rows} rows, {int(model.is_int.sum())} integer)")
            return EXIT_OK
        data_a = prepare_costs(data, cfg.interest_rate)
        reduced = reduce_system(data_a, cfg.representative_weeks, args.seed)
        baseline = no_dc_baseline(data_a, cfg, reduced) if data.dcs else None
    except Infeasible as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except TesplanError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    try:
        status, res, extra = run_cell(args.data, cfg, args.seed, out, baseline)
    except TesplanError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    if res is None:
        print(f"scenario is {status}", file=sys.stderr)
        return EXIT_INFEASIBLE
    sol = res.solution
    print(breakdown_table(sol.breakdown, sol.objective))
    print("\ncapacity changes")
    print(capacity_summary(data, sol))
    print(f"\nannual emissions {sol.annual_emissions_tco2:,.0f} tCO2")
    if "cost_per_mw_dc_usd" in extra:
        print(f"additional system cost per MW of data center {extra['cost_per_mw_dc_usd']:,.0f} $/MW-yr")
    if not res.report.ok:
        for v in res.report.violations[:20]:
            print(f"violation: {v}", file=sys.stderr)
        return EXIT_VERIFY
    print(f"verified: {res.report.checked} constraint evaluations, no violations")
    return EXIT_OK


def _cell_config(base: ScenarioConfig, menu, policy, flex) -> ScenarioConfig:
    return dataclasses.replace(base, storage_menu=frozenset(MENUS[menu]), carbon_policy=policy,
                               flexibility_fraction=flex)


def cell_id(menu, policy, flex) -> str:
    return f"{menu}_{POLICIES[policy]}_flex{flex:.1f}"


def _sweep_job(job):
    data_dir, cfg, seed, out_dir, baseline = job
    try:
        status, res, extra = run_cell(data_dir, cfg, seed, out_dir, baseline)
    except TesplanError as exc:
        return f"error: {type(exc).__name__}", None, None, None
    if res is None:
        return status, None, None, None
    return status, res.solution.objective, res.solution.annual_emissions_tco2, extra.get("cost_per_mw_dc_usd")


def _baseline_job(job):
    data_dir, cfg, seed = job
    data = prepare_costs(ingest.load_system(data_dir), cfg.interest_rate)
    reduced = reduce_system(data, cfg.representative_weeks, seed)
    try:
        return no_dc_baseline(data, cfg, reduced)
    except TesplanError:
        return None


def _fmt(v):
    return "" if v is None else repr(float(v))


def cmd_sweep(args) -> int:
    try:
        data = ingest.load_system(args.data)
        base = _resolve_config(args, data)
    except TesplanError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cells = [(m, p, f) for m in MENUS for p in POLICIES for f in FLEX]
    pool = ProcessPoolExecutor(args.workers) if args.workers > 1 else None
    mapper = pool.map if pool else map
    try:
        base_jobs = [(args.data, _cell_config(base, m, UNCONSTRAINED, 0.0), args.seed) for m in MENUS]
        baselines = dict(zip(MENUS, mapper(_baseline_job, base_jobs))) if data.dcs else dict.fromkeys(MENUS)
        jobs = [(args.data, _cell_config(base, m, p, f), args.seed, out / cell_id(m, p, f), baselines[m])
                for m, p, f in cells]
        results = list(mapper(_sweep_job, jobs))
    finally:
        if pool:
            pool.shutdown()
    by_cell = dict(zip(cells, results))
    rows = []
    for (m, p, f), (status, obj, tco2, per_mw) in by_cell.items():
        uc = by_cell[(m, UNCONSTRAINED, f)]
        reduction = None
        if tco2 is not None and uc[2] is not None:
            reduction = 0.0 if uc[2] == tco2 else (100.0 * (uc[2] - tco2) / uc[2] if uc[2] > 0 else None)
        rows.append([cell_id(m, p, f), "+".join(MENUS[m]) or "none", p, f"{f:.1f}", _fmt(obj), _fmt(per_mw),
                     _fmt(tco2), _fmt(reduction), status])
    rows.sort(key=lambda r: r[0])
    with (out / "summary.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_COLUMNS)
        w.writerows(rows)
    for r in rows:
        print(f"{r[0]:<24} {r[8]:<14} {r[4] or '-':>24}")
    print(f"wrote {out / 'summary.csv'}")
    return EXIT_OK


def _weight_text(w: Fraction) -> str:
    return str(w.numerator) if w.denominator == 1 else f"{w.numerator}/{w.denominator}"


def cmd_reduce_ts(args) -> int:
    try:
        data = ingest.load_system(args.data)
        k = args.k if args.k is not None else data.scenario.representative_weeks
        reduced = reduce_system(data, k, args.seed)
    except TesplanError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    out = Path(args.out)
    if out.suffix != ".csv":
        out.mkdir(parents=True, exist_ok=True)
        out = out / "rep_weeks.csv"
    with out.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("week_index", "cluster", "weight"))
        for c, (week, weight) in enumerate(zip(reduced.representatives, reduced.weights)):
            w.writerow((week, c, _weight_text(weight)))
    with out.with_name("week_assignment.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("week_index", "cluster"))
        w.writerows(enumerate(reduced.assignment))
    print(f"k={reduced.k}: representative weeks {list(reduced.representatives)}, "
          f"weights {[_weight_text(x) for x in reduced.weights]}, total {reduced.total_weight()} h")
    return EXIT_OK


def cmd_verify(args) -> int:
    res_dir = Path(args.results)
    try:
        record = json.loads((res_dir / "run.json").read_text())
        data = ingest.load_system(args.data or record["data"])
        cfg = ingest.scenario_from_dict(record["scenario"], "run.json")
        sol = ingest.read_solution(res_dir)
        reduced = ingest.reduced_from_index(ingest.read_time_index(res_dir), data)
    except (OSError, KeyError, json.JSONDecodeError, TesplanError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    report = check_feasibility(data, reduced, cfg, sol)
    costs = cost_breakdown(data, sol, cfg)
    total = sum(costs.values())
    rel = abs(total - sol.objective) / max(1.0, abs(sol.objective))
    for v in report.violations:
        print(f"violation: {v}")
    print(f"{report.checked} constraint evaluations, {len(report.violations)} violations, "
          f"max excess {report.max_violation:.3g}")
    print(f"cost blocks sum {total:,.2f} vs objective {sol.objective:,.2f} (rel. diff {rel:.2e})")
    return EXIT_OK if report.ok and rel <= 1e-6 else EXIT_VERIFY


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="tesplan", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, out=True):
        p.add_argument("--data", required=True, help="system directory")
        if out:
            p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--k", type=int, default=None, help="representative weeks")
        p.add_argument("--seed", type=int, default=0, help="clustering seed")

    pl = sub.add_parser("plan", help="solve one scenario")
    common(pl)
    pl.add_argument("--scenario", default=None, help="scenario.json (default: the data directory's)")
    pl.add_argument("--solver", choices=("builtin", "mps-export", "highs"), default=None)
    pl.set_defaults(func=cmd_plan)

    sw = sub.add_parser("sweep", help="run the storage x policy x flexibility matrix")
    common(sw)
    sw.add_argument("--scenario", default=None)
    sw.add_argument("--solver", choices=("builtin", "highs"), default=None)
    sw.add_argument("--workers", type=int, default=1)
    sw.set_defaults(func=cmd_sweep)

    rt = sub.add_parser("reduce-ts", help="select representative weeks")
    common(rt)
    rt.set_defaults(func=cmd_reduce_ts)

    ve = sub.add_parser("verify", help="re-check a results directory")
    ve.add_argument("--results", required=True)
    ve.add_argument("--data", default=None, help="override the data directory recorded in run.json")
    ve.set_defaults(func=cmd_verify)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
