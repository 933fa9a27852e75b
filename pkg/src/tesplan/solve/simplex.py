"""Bounded-variable revised primal simplex.

The LP handled here is

    min c'x   s.t.  row_lo <= A x <= row_hi,   lb <= x <= ub

Every row gets a logical variable ``w = A x`` carrying the row bounds, so the
working system is ``[A  -I] (x, w) = 0`` with bounds on all columns.  The basis
is factorized with a sparse LU (refactorized every ``refactor_every`` pivots)
and updated in between with product-form eta vectors.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from ..errors import IterationLimit, NumericalBreakdown

BASIC, AT_LOWER, AT_UPPER, FREE_ZERO, FIXED = 0, 1, 2, 3, 4
SHIFT_TOL = 1e-9  # relative size of infeasibility treated as round-off


@dataclass
class Tolerances:
    primal: float = 1e-7
    dual: float = 1e-9
    pivot: float = 1e-9
    refactor_every: int = 50
    iteration_limit: int | None = None
    degenerate_limit: int | None = None
    perturbation: float = 1e-7


@dataclass
class LpResult:
    status: str
    objective: float = float("nan")
    x: np.ndarray = field(default_factory=lambda: np.empty(0))
    duals: np.ndarray = field(default_factory=lambda: np.empty(0))
    reduced_costs: np.ndarray = field(default_factory=lambda: np.empty(0))
    row_activity: np.ndarray = field(default_factory=lambda: np.empty(0))
    iterations: int = 0
    basis: np.ndarray | None = None

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"


def dual_objective(c, A, row_lo, row_hi, lb, ub, duals, tol=1e-7):
    """Lagrangian dual bound of the LP for a given row-dual vector."""
    d = np.asarray(c, float) - A.T @ duals
    total = 0.0
    for dj, lo, hi in ((d, lb, ub), (duals, row_lo, row_hi)):
        pos = dj > 0
        neg = dj < 0
        lo_part = np.where(np.isfinite(lo), lo, 0.0)
        hi_part = np.where(np.isfinite(hi), hi, 0.0)
        if np.any(pos & ~np.isfinite(lo) & (dj > tol)) or np.any(neg & ~np.isfinite(hi) & (dj < -tol)):
            return -np.inf
        total += float(np.sum(dj[pos] * lo_part[pos]) + np.sum(dj[neg] * hi_part[neg]))
    return total


class _Eta:
    __slots__ = ("r", "pivot", "idx", "val")

    def __init__(self, r, alpha, drop):
        self.r = r
        self.pivot = 1.0 / alpha[r]
        nz = np.flatnonzero(np.abs(alpha) > drop)
        nz = nz[nz != r]
        self.idx = nz
        self.val = -alpha[nz] * self.pivot


class BoundedSimplex:
    def __init__(self, c, A, row_lo, row_hi, lb, ub, tol: Tolerances | None = None):
        self.tol = tol or Tolerances()
        A = sp.csr_matrix(A, dtype=float)
        m, n = A.shape
        self.m, self.n = m, n
        c = np.asarray(c, float)
        row_lo = np.asarray(row_lo, float)
        row_hi = np.asarray(row_hi, float)

        # row scaling by max-abs coefficient; objective scaled to unit max-abs
        rmax = abs(A).max(axis=1).toarray().ravel() if m else np.zeros(0)
        rmax[rmax == 0] = 1.0
        self.row_scale = 1.0 / rmax
        self.cost_scale = float(np.max(np.abs(c))) if c.size and np.any(c) else 1.0
        As = sp.diags(self.row_scale) @ A
        self.A = sp.csc_matrix(As)
        self.AT = sp.csr_matrix(As.T)
        self.cost = np.concatenate([c / self.cost_scale, np.zeros(m)])
        self.lo = np.concatenate([np.asarray(lb, float), row_lo * self.row_scale])
        self.hi = np.concatenate([np.asarray(ub, float), row_hi * self.row_scale])
        self.N = n + m
        self.iterations = 0

    # -- basis handling -------------------------------------------------
    def _column(self, j):
        if j < self.n:
            a = np.zeros(self.m)
            s, e = self.A.indptr[j], self.A.indptr[j + 1]
            a[self.A.indices[s:e]] = self.A.data[s:e]
            return a
        a = np.zeros(self.m)
        a[j - self.n] = -1.0
        return a

    def _basis_matrix(self):
        rows, cols, vals = [], [], []
        for k, j in enumerate(self.head):
            if j < self.n:
                s, e = self.A.indptr[j], self.A.indptr[j + 1]
                rows.append(self.A.indices[s:e])
                vals.append(self.A.data[s:e])
                cols.append(np.full(e - s, k))
            else:
                rows.append(np.array([j - self.n]))
                vals.append(np.array([-1.0]))
                cols.append(np.array([k]))
        if not rows:
            return sp.csc_matrix((0, 0))
        return sp.csc_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(self.m, self.m),
        )

    def _factor(self):
        self.etas = []
        if self.m == 0:
            self.lu = None
            return
        try:
            self.lu = splu(self._basis_matrix().tocsc(), permc_spec="COLAMD")
        except RuntimeError as exc:
            raise NumericalBreakdown(f"singular basis: {exc}") from exc
        diag = np.abs(self.lu.U.diagonal())
        if diag.size and diag.min() < 1e-11 * max(1.0, diag.max()):
            raise NumericalBreakdown("ill-conditioned basis factor")

    def _ftran(self, a):
        if self.m == 0:
            return a
        v = self.lu.solve(a)
        for eta in self.etas:
            vr = v[eta.r]
            if vr != 0.0:
                v[eta.idx] += vr * eta.val
                v[eta.r] = vr * eta.pivot
        return v

    def _btran(self, cb):
        if self.m == 0:
            return cb
        z = cb.copy()
        for eta in reversed(self.etas):
            z[eta.r] = eta.pivot * z[eta.r] + eta.val @ z[eta.idx]
        return self.lu.solve(z, trans="T")

    def _recompute_basics(self):
        xn = self.x.copy()
        xn[self.head] = 0.0
        rhs = -(self.A @ xn[: self.n] - xn[self.n:])
        self.x[self.head] = self._ftran(rhs) if self.m else rhs

    def _init_basis(self, basis):
        st = np.empty(self.N, dtype=np.int8)
        finite_lo = np.isfinite(self.lo)
        finite_hi = np.isfinite(self.hi)
        st[:] = np.where(finite_lo, AT_LOWER, np.where(finite_hi, AT_UPPER, FREE_ZERO))
        st[(self.lo == self.hi)] = FIXED
        if basis is not None and len(basis) == self.N and np.count_nonzero(basis == BASIC) == self.m:
            basis = np.asarray(basis, dtype=np.int8)
            keep = basis == BASIC
            st[keep] = BASIC
            # nonbasic statuses carried over where the bound still exists
            up = (basis == AT_UPPER) & finite_hi & ~keep
            st[up] = AT_UPPER
            st[(self.lo == self.hi) & ~keep] = FIXED
            self.head = np.flatnonzero(keep)
        else:
            self.head = np.arange(self.n, self.N)
            st[self.head] = BASIC
        self.state = st
        self.x = np.zeros(self.N)
        nb = st != BASIC
        self.x[nb & ((st == AT_LOWER) | (st == FIXED))] = self.lo[nb & ((st == AT_LOWER) | (st == FIXED))]
        self.x[st == AT_UPPER] = self.hi[st == AT_UPPER]

    # -- main loop ------------------------------------------------------
    def _set_nonbasic_values(self):
        st = self.state
        lower = (st == AT_LOWER) | (st == FIXED)
        self.x[lower] = self.lo[lower]
        self.x[st == AT_UPPER] = self.hi[st == AT_UPPER]
        self.x[st == FREE_ZERO] = 0.0

    def _perturb(self):
        """Widen every finite bound by a small random amount to break degeneracy."""
        rng = np.random.default_rng(20240531)
        eps = self.tol.perturbation
        self.lo0, self.hi0 = self.lo.copy(), self.hi.copy()
        fl, fh = np.isfinite(self.lo), np.isfinite(self.hi)
        self.lo[fl] -= eps * (1 + np.abs(self.lo[fl])) * (1 + rng.random(fl.sum()))
        self.hi[fh] += eps * (1 + np.abs(self.hi[fh])) * (1 + rng.random(fh.sum()))
        self.state[(self.state == FIXED)] = AT_LOWER
        self._set_nonbasic_values()
        self._recompute_basics()

    def _restore(self):
        self.lo, self.hi = self.lo0, self.hi0
        nb = self.state != BASIC
        self.state[nb & (self.lo == self.hi)] = FIXED
        self._set_nonbasic_values()
        self._factor()
        self._recompute_basics()

    def solve(self, basis=None) -> LpResult:
        tol = self.tol
        self.it_limit = 50 * (self.m + self.n) + 100 if tol.iteration_limit is None else tol.iteration_limit
        self.degen_limit = 10 * (self.m + self.n) if tol.degenerate_limit is None else tol.degenerate_limit
        self.degenerate_total = 0
        self._init_basis(basis)
        try:
            self._factor()
        except NumericalBreakdown:
            if basis is None:
                raise
            self._init_basis(None)
            self._factor()
        self._recompute_basics()
        if tol.perturbation > 0:
            self._perturb()
            self._iterate(shift=True)
            self._restore()
        for attempt in range(3):
            base = self.lo.copy(), self.hi.copy()
            status, y, d = self._iterate(shift=attempt < 2)
            if not self._unshift(*base) or status != "optimal":
                break
        if status == "optimal":
            return self._finish(y, d)
        return self._result(status)

    def _unshift(self, lo, hi) -> bool:
        """Put back bounds moved by shifting; True if that left basics infeasible."""
        moved = (self.lo != lo) | (self.hi != hi)
        if not moved.any():
            return False
        self.lo, self.hi = lo, hi
        self._set_nonbasic_values()
        self._factor()
        self._recompute_basics()
        xb = self.x[self.head]
        ptol = self.tol.primal
        return bool(np.any(xb < self.lo[self.head] - ptol) or np.any(xb > self.hi[self.head] + ptol))

    def _iterate(self, shift=False):
        tol = self.tol
        m, n = self.m, self.n
        bland = False
        verified = False
        ptol = tol.primal
        while True:
            if self.iterations >= self.it_limit:
                raise IterationLimit(f"simplex exceeded {self.it_limit} iterations")
            xb = self.x[self.head]
            lob, hib = self.lo[self.head], self.hi[self.head]
            below = xb < lob - ptol
            above = xb > hib + ptol
            phase1 = bool(below.any() or above.any())
            if phase1 and shift:
                # drift from eta updates: move the bound rather than restart phase 1
                gap = np.maximum(lob - xb, xb - hib)
                if gap.max() <= SHIFT_TOL * max(1.0, float(np.abs(xb).max())):
                    hb = self.head
                    self.lo[hb[below]] = xb[below]
                    self.hi[hb[above]] = xb[above]
                    continue
            if phase1:
                cb = np.where(below, -1.0, np.where(above, 1.0, 0.0))
                y = self._btran(cb)
                d = np.concatenate([-(self.AT @ y), y])
            else:
                cb = self.cost[self.head]
                y = self._btran(cb)
                d = np.concatenate([self.cost[:n] - self.AT @ y, y])
            d[self.head] = 0.0
            st = self.state
            dtol = tol.dual
            elig = ((st == AT_LOWER) & (d < -dtol)) | ((st == AT_UPPER) & (d > dtol)) | (
                (st == FREE_ZERO) & (np.abs(d) > dtol)
            )
            cand = np.flatnonzero(elig)
            if cand.size == 0:
                if self.etas and not verified:
                    # confirm on a fresh factorization before declaring the outcome
                    self._factor()
                    self._recompute_basics()
                    verified = True
                    continue
                return ("infeasible" if phase1 else "optimal"), y, d
            verified = False
            q = int(cand[0]) if bland else int(cand[np.argmax(np.abs(d[cand]))])
            direction = 1.0 if d[q] < 0 else -1.0
            alpha = self._ftran(self._column(q))
            delta = -direction * alpha  # change of basics per unit step

            # Harris two-pass ratio test
            usable = np.abs(alpha) > tol.pivot
            dec = usable & (delta < 0)
            inc = usable & (delta > 0)
            bound = np.full(m, np.nan)
            if phase1:
                feas = ~above & ~below
                bound[dec & above] = hib[dec & above]
                bound[dec & feas] = lob[dec & feas]
                bound[inc & below] = lob[inc & below]
                bound[inc & feas] = hib[inc & feas]
            else:
                bound[dec] = lob[dec]
                bound[inc] = hib[inc]
            has = np.isfinite(bound)
            theta_flip = self.hi[q] - self.lo[q]
            r = -1
            theta = np.inf
            if has.any():
                idx = np.flatnonzero(has)
                rate = np.abs(delta[idx])
                # distance toward the bound; basics already slightly past it count as zero
                signed = np.where(delta[idx] < 0, xb[idx] - bound[idx], bound[idx] - xb[idx])
                # relaxed bounds sit half a tolerance outside, so no basic ends up past ptol
                tmax = (np.maximum(signed + 0.5 * ptol, 0.0) / rate).min()
                exact = np.maximum(signed, 0.0) / rate
                pick = np.flatnonzero(exact <= tmax)
                if bland:
                    best = pick[np.argmin(self.head[idx[pick]])]
                else:
                    best = pick[np.argmax(rate[pick])]
                r = int(idx[best])
                theta = float(exact[best])
            if theta_flip <= theta:
                theta = float(theta_flip)
                r = -1
            if not np.isfinite(theta):
                if phase1:
                    raise NumericalBreakdown("phase 1 direction without a blocking bound")
                return "unbounded", y, d

            self.iterations += 1
            if theta <= 1e-12:
                self.degenerate_total += 1
                if self.degenerate_total > self.degen_limit:
                    bland = True
            self.x[q] += direction * theta
            self.x[self.head] += delta * theta
            if r < 0:
                self.state[q] = AT_UPPER if direction > 0 else AT_LOWER
                self.x[q] = self.hi[q] if direction > 0 else self.lo[q]
                continue
            p = int(self.head[r])
            hit_value = bound[r]
            hit_state = AT_LOWER if hit_value == lob[r] else AT_UPPER
            if self.lo[p] == self.hi[p]:
                hit_state = FIXED
            self.x[p] = hit_value
            self.state[p] = hit_state
            self.head[r] = q
            self.state[q] = BASIC
            self.etas.append(_Eta(r, alpha, 1e-14))
            if len(self.etas) >= tol.refactor_every:
                self._factor()
                self._recompute_basics()

    def _result(self, status):
        return LpResult(status=status, iterations=self.iterations, basis=self.state.copy())

    def _finish(self, y, d):
        n = self.n
        x = self.x[:n].copy()
        # snap nonbasic structurals exactly onto their bounds
        duals = y * self.row_scale * self.cost_scale
        red = d[:n] * self.cost_scale
        obj = float(self.cost[:n] @ x) * self.cost_scale
        act = self.x[n:] / self.row_scale
        return LpResult(
            status="optimal",
            objective=obj,
            x=x,
            duals=duals,
            reduced_costs=red,
            row_activity=act,
            iterations=self.iterations,
            basis=self.state.copy(),
        )


def solve_standard(c, A, row_lo, row_hi, lb, ub, tol: Tolerances | None = None, basis=None) -> LpResult:
    """Solve the LP in row-bound form; see module docstring."""
    return BoundedSimplex(c, A, row_lo, row_hi, lb, ub, tol).solve(basis)
