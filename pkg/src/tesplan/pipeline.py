"""End-to-end run of one scenario: reduce, annualize, build, solve, verify."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

from .domain import ScenarioConfig, Solution, SystemData
from .finance import prepare_costs
from .model import MilpModel, build, to_solution
from .solve.bnb import MilpResult, solve_milp
from .solve.highs import solve_milp_highs
from .tsreduce import ReducedSeries, reduce_system
from .verify import FeasibilityReport, carbon_account, check_feasibility


@dataclass
class PlanResult:
    data: SystemData
    config: ScenarioConfig
    reduced: ReducedSeries
    model: MilpModel
    milp: MilpResult
    solution: Solution
    report: FeasibilityReport


def solve_model(model: MilpModel, config: ScenarioConfig) -> MilpResult:
    if config.solver == "highs":
        return solve_milp_highs(model, gap=config.mip_gap, time_limit=config.time_limit_s)
    if config.solver == "builtin":
        return solve_milp(model, gap=config.mip_gap, time_limit=config.time_limit_s)
    raise ValueError(f"solver {config.solver!r} does not solve in-process")


def prepare(data: SystemData, config: ScenarioConfig | None = None, k: int | None = None, seed: int = 0,
            reduced: ReducedSeries | None = None):
    """Annualized data, reduced time index and built model for one scenario."""
    config = config or data.scenario
    data = prepare_costs(data, config.interest_rate)
    if reduced is None:
        reduced = reduce_system(data, k or config.representative_weeks, seed)
    return data, reduced, build(data, reduced, config)


def run_plan(data: SystemData, config: ScenarioConfig | None = None, k: int | None = None, seed: int = 0,
             reduced: ReducedSeries | None = None) -> PlanResult:
    config = config or data.scenario
    data, reduced, model = prepare(data, config, k, seed, reduced)
    res = solve_model(model, config)
    sol = to_solution(model, reduced, res.x, res.status, res.gap)
    sol.annual_emissions_tco2 = carbon_account(data, reduced, sol)["total_tco2"]
    report = check_feasibility(data, reduced, config, sol)
    return PlanResult(data, config, reduced, model, res, sol, report)


def with_config(data: SystemData, **changes) -> ScenarioConfig:
    return dataclasses.replace(data.scenario, **changes)
