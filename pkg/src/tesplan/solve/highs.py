"""HiGHS backend through :func:`scipy.optimize.milp`, for fixture-scale runs."""

from __future__ import annotations

import math

import numpy as np
from scipy.optimize import Bounds, LinearConstraint, milp

from ..errors import Infeasible, TimeLimit
from .bnb import MilpResult


def solve_milp_highs(model, gap: float = 1e-6, time_limit: float | None = None) -> MilpResult:
    """Same contract as :func:`tesplan.solve.bnb.solve_milp`, solved by HiGHS."""
    lo, hi = model.row_bounds()
    options = {"mip_rel_gap": gap, "disp": False}
    if time_limit is not None:
        options["time_limit"] = float(time_limit)
    res = milp(
        model.obj,
        constraints=LinearConstraint(model.A, lo, hi),
        bounds=Bounds(model.lb, model.ub),
        integrality=model.is_int.astype(int),
        options=options,
    )
    if res.status == 2:
        raise Infeasible(res.message)
    if res.status == 3:
        return MilpResult("unbounded", -math.inf, None, -math.inf, math.inf)
    if res.x is None:
        if res.status == 1:
            raise TimeLimit(MilpResult("time_limit", math.inf, None, -math.inf, math.inf))
        raise Infeasible(res.message)
    x = np.asarray(res.x, dtype=float)
    x[model.is_int] = np.round(x[model.is_int])
    obj = float(model.obj @ x) + model.obj_constant
    bound = getattr(res, "mip_dual_bound", None)
    bound = obj if bound is None or not np.isfinite(bound) else float(bound) + model.obj_constant
    rel = max(0.0, obj - bound) / max(1.0, abs(obj))
    nodes = int(getattr(res, "mip_node_count", 0) or 0)
    result = MilpResult("optimal", obj, x, min(bound, obj), rel, nodes)
    if res.status == 1:
        result.status = "time_limit"
        raise TimeLimit(result)
    return result
