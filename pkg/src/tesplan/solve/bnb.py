"""LP and MILP entry points over :class:`~tesplan.model.MilpModel`."""

from __future__ import annotations

import heapq
import math
import time
from dataclasses import dataclass

import numpy as np

from ..errors import Infeasible, TimeLimit
from .simplex import LpResult, Tolerances, solve_standard


@dataclass
class MilpResult:
    status: str
    objective: float
    x: np.ndarray | None
    bound: float
    gap: float
    nodes: int = 0
    lp_iterations: int = 0
    root_bound: float = float("nan")


def solve_lp(model, tolerances: Tolerances | None = None, basis=None) -> LpResult:
    """Solve the LP relaxation; the objective includes the model's constant term."""
    lo, hi = model.row_bounds()
    res = solve_standard(model.obj, model.A, lo, hi, model.lb, model.ub, tolerances, basis)
    if res.optimal:
        res.objective += model.obj_constant
    return res


def _rel_gap(incumbent, bound):
    if not math.isfinite(incumbent):
        return math.inf
    return max(0.0, incumbent - bound) / max(1.0, abs(incumbent))


def solve_milp(model, gap: float = 1e-6, time_limit: float | None = None,
               tolerances: Tolerances | None = None, int_tol: float = 1e-6) -> MilpResult:
    """Best-first branch-and-bound on LP relaxations, branching on the most fractional integer."""
    start = time.monotonic()
    lo, hi = model.row_bounds()
    ints = model.integer_indices
    iterations = 0

    def relax(lb, ub, basis=None):
        nonlocal iterations
        res = solve_standard(model.obj, model.A, lo, hi, lb, ub, tolerances, basis)
        iterations += res.iterations
        if res.optimal:
            res.objective += model.obj_constant
        return res

    root = relax(model.lb, model.ub)
    if root.status == "infeasible":
        raise Infeasible("LP relaxation is infeasible")
    if root.status == "unbounded":
        return MilpResult("unbounded", -math.inf, None, -math.inf, math.inf, 1, iterations)

    best_x, best_obj = None, math.inf

    def try_incumbent(x, basis):
        """Fix integers at their rounded values and re-optimize the continuous part."""
        nonlocal best_x, best_obj
        lb, ub = model.lb.copy(), model.ub.copy()
        r = np.clip(np.round(x[ints]), model.lb[ints], model.ub[ints])
        lb[ints] = r
        ub[ints] = r
        res = relax(lb, ub, basis)
        if res.optimal and res.objective < best_obj:
            best_x, best_obj = res.x.copy(), res.objective
            best_x[ints] = r

    def fractionality(x):
        if ints.size == 0:
            return np.zeros(0)
        f = x[ints] - np.floor(x[ints])
        return np.minimum(f, 1.0 - f)

    counter = 0
    heap = [(root.objective, counter, model.lb.copy(), model.ub.copy(), root)]
    nodes = 0
    if ints.size and fractionality(root.x).max() > int_tol:
        try_incumbent(root.x, root.basis)
    while heap:
        bound = heap[0][0]
        if _rel_gap(best_obj, bound) <= gap:
            break
        if time_limit is not None and time.monotonic() - start > time_limit:
            result = MilpResult("time_limit", best_obj, best_x, bound, _rel_gap(best_obj, bound), nodes,
                                iterations, root.objective)
            raise TimeLimit(result)
        node_bound, _, lb, ub, res = heapq.heappop(heap)
        nodes += 1
        frac = fractionality(res.x)
        if frac.size == 0 or frac.max() <= int_tol:
            if res.objective < best_obj:
                best_x, best_obj = res.x.copy(), res.objective
                best_x[ints] = np.round(best_x[ints])
            continue
        k = int(np.argmax(frac))
        j = int(ints[k])
        v = res.x[j]
        for side in ("down", "up"):
            clb, cub = lb.copy(), ub.copy()
            if side == "down":
                cub[j] = math.floor(v)
            else:
                clb[j] = math.ceil(v)
            if clb[j] > cub[j]:
                continue
            child = relax(clb, cub, res.basis)
            if not child.optimal:
                continue
            if child.objective >= best_obj - gap * max(1.0, abs(best_obj)) and best_x is not None:
                continue
            counter += 1
            heapq.heappush(heap, (child.objective, counter, clb, cub, child))
        if nodes % 20 == 0:
            try_incumbent(res.x, res.basis)

    if best_x is None:
        raise Infeasible("no integer-feasible point")
    bound = min(heap[0][0], best_obj) if heap else best_obj
    return MilpResult("optimal", best_obj, best_x, bound, _rel_gap(best_obj, bound), nodes, iterations,
                      root.objective)
