"""Linear programs and a dense two-phase revised simplex solver.

Problems are stated as  min c.x  s.t.  A x (<= or =) rhs,  lb <= x <= ub
and converted internally to  min c'.z  s.t.  A' z = b', z >= 0.  The basis
inverse is kept explicitly, updated by rank-one pivots and refactored
periodically.  Pricing is Dantzig's rule (most negative reduced cost, lowest
index on ties); once the objective stalls for as many pivots as there are
rows the solver switches permanently to Bland's rule, which cannot cycle.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

log = logging.getLogger(__name__)

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
ITERATION_LIMIT = "iteration-limit"
NUMERICAL = "numerical-error"

COST_TOL = 1e-9
PIVOT_TOL = 1e-9
REFACTOR_EVERY = 64
AUTO_MAX_ROWS = 1500


@dataclass
class LinearProgram:
    c: np.ndarray
    A: sp.csr_matrix
    rhs: np.ndarray
    is_eq: np.ndarray
    lb: np.ndarray
    ub: np.ndarray
    var_names: list = field(default=None)
    row_names: list = field(default=None)
    blocks: dict = field(default=None)  # variable slices by role, set by assemblers

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float)
        self.A = sp.csr_matrix(self.A, dtype=float)
        self.rhs = np.asarray(self.rhs, dtype=float)
        self.is_eq = np.asarray(self.is_eq, dtype=bool)
        self.lb = np.asarray(self.lb, dtype=float)
        self.ub = np.asarray(self.ub, dtype=float)
        m, n = self.A.shape
        if self.c.shape != (n,) or self.rhs.shape != (m,) or self.is_eq.shape != (m,):
            raise ValueError("inconsistent LP dimensions")
        if self.lb.shape != (n,) or self.ub.shape != (n,) or np.any(self.lb > self.ub):
            raise ValueError("bad variable bounds")
        if not (np.all(np.isfinite(self.c)) and np.all(np.isfinite(self.A.data)) and np.all(np.isfinite(self.rhs))):
            raise ValueError("LP coefficients must be finite")

    @classmethod
    def from_rows(cls, c, rows, lb=None, ub=None):
        """Build from ``[(coefficients, "<=" | ">=" | "=", rhs), ...]``."""
        c = np.asarray(c, dtype=float)
        A, rhs, eq = [], [], []
        for coef, rel, b in rows:
            coef = np.asarray(coef, dtype=float)
            if rel == ">=":
                coef, b = -coef, -b
            elif rel not in ("<=", "="):
                raise ValueError(f"unknown relation {rel!r}")
            A.append(coef)
            rhs.append(b)
            eq.append(rel == "=")
        n = len(c)
        A = np.array(A, dtype=float).reshape(len(rows), n)
        lb = np.zeros(n) if lb is None else lb
        ub = np.full(n, np.inf) if ub is None else ub
        return cls(c, sp.csr_matrix(A), np.array(rhs, dtype=float), np.array(eq, dtype=bool), lb, ub)

    @property
    def n_vars(self):
        return self.A.shape[1]

    @property
    def n_rows(self):
        return self.A.shape[0]

    def constraints(self):
        for r in range(self.n_rows):
            yield self.A.getrow(r).toarray().ravel(), "=" if self.is_eq[r] else "<=", self.rhs[r]

    def violation(self, x):
        """Largest absolute violation of any row or bound at ``x``."""
        ax = self.A @ x - self.rhs
        row = np.where(self.is_eq, np.abs(ax), np.maximum(ax, 0.0))
        bnd = np.maximum(np.maximum(self.lb - x, x - self.ub), 0.0)
        return float(max(row.max(initial=0.0), bnd.max(initial=0.0)))

    def dump(self, fh):
        """Plain-text listing: objective, one line per row, then bounds."""
        names = self.var_names or [f"x{j}" for j in range(self.n_vars)]

        def expr(coefs, idx):
            return " ".join(f"{v:+.17g} {names[j]}" for j, v in zip(idx, coefs)) or "0"

        nz = np.flatnonzero(self.c)
        fh.write(f"minimize\n  obj: {expr(self.c[nz], nz)}\nsubject to\n")
        for r in range(self.n_rows):
            lo, hi = self.A.indptr[r], self.A.indptr[r + 1]
            rel = "=" if self.is_eq[r] else "<="
            rname = self.row_names[r] if self.row_names else f"r{r}"
            fh.write(f"  {rname}: {expr(self.A.data[lo:hi], self.A.indices[lo:hi])} {rel} {self.rhs[r]:.17g}\n")
        fh.write("bounds\n")
        for j in range(self.n_vars):
            fh.write(f"  {self.lb[j]:.17g} <= {names[j]} <= {self.ub[j]:.17g}\n")
        fh.write("end\n")


@dataclass
class SimplexSolution:
    x: np.ndarray
    objective: float
    status: str
    iterations: int
    pivots: list = field(default_factory=list)
    method: str = "simplex"

    @property
    def ok(self):
        return self.status == OPTIMAL


def _standard_form(lp: LinearProgram):
    """Return (A_std, b, c_std, obj_offset, T, offset, slack_row) with x = offset + T z."""
    n = lp.n_vars
    T_cols, offset, bound_rows = [], np.zeros(n), []
    for j in range(n):
        lo, hi = lp.lb[j], lp.ub[j]
        if np.isinf(lo) and np.isinf(hi):
            T_cols += [(j, 1.0), (j, -1.0)]
        elif not np.isinf(lo) and not np.isinf(hi) and lo < 0 < hi:
            T_cols.append((j, 1.0))
            bound_rows.append((len(T_cols) - 1, hi))
            T_cols.append((j, -1.0))
            bound_rows.append((len(T_cols) - 1, -lo))
        elif not np.isinf(lo):
            offset[j] = lo
            T_cols.append((j, 1.0))
            if not np.isinf(hi):
                bound_rows.append((len(T_cols) - 1, hi - lo))
        else:
            offset[j] = hi
            T_cols.append((j, -1.0))
    nz = len(T_cols)
    T = sp.csr_matrix(
        (np.array([s for _, s in T_cols]), (np.array([j for j, _ in T_cols]), np.arange(nz))),
        shape=(n, nz),
    )
    A0 = (lp.A @ T).toarray()
    b0 = lp.rhs - lp.A @ offset
    m0, mb = lp.n_rows, len(bound_rows)
    A1 = np.zeros((mb, nz))
    b1 = np.zeros(mb)
    for r, (col, u) in enumerate(bound_rows):
        A1[r, col] = 1.0
        b1[r] = u
    A = np.vstack([A0, A1])
    b = np.concatenate([b0, b1])
    ineq = np.concatenate([~lp.is_eq, np.ones(mb, dtype=bool)])
    slack_rows = np.flatnonzero(ineq)
    S = np.zeros((A.shape[0], len(slack_rows)))
    S[slack_rows, np.arange(len(slack_rows))] = 1.0
    A = np.hstack([A, S])
    c = np.concatenate([T.T @ lp.c, np.zeros(len(slack_rows))])
    slack_of_row = np.full(A.shape[0], -1)
    slack_of_row[slack_rows] = nz + np.arange(len(slack_rows))
    neg = b < 0
    A[neg] *= -1.0
    b[neg] *= -1.0
    slack_of_row[neg] = -1  # a flipped slack has coefficient -1: not a starting basis column
    return A, b, c, float(lp.c @ offset), T, offset, slack_of_row


class _Simplex:
    """Revised simplex iterations on  min c.z, A z = b, z >= 0  from a feasible basis."""

    def __init__(self, A, b, basis, max_iters, pricing="dantzig", iters=0, pivots=None):
        self.A, self.b = A, b
        self.m, self.n = A.shape
        self.basis = list(basis)
        self.max_iters = max_iters
        self.bland = pricing == "bland"
        self.iters = iters
        self.pivots = pivots if pivots is not None else []
        self.refactor()

    def refactor(self):
        self.Binv = np.linalg.inv(self.A[:, self.basis])
        self.xB = self.Binv @ self.b
        self.xB[np.abs(self.xB) < 1e-13] = 0.0
        self.since_refactor = 0

    def run(self, c, allowed):
        """Minimize c.z over columns flagged in ``allowed``; returns a status string."""
        best = np.inf
        stall = 0
        while True:
            cB = c[self.basis]
            y = cB @ self.Binv
            d = c - y @ self.A
            d[self.basis] = 0.0
            d[~allowed] = 0.0
            cand = np.flatnonzero(d < -COST_TOL)
            if cand.size == 0:
                return OPTIMAL
            if self.iters >= self.max_iters:
                return ITERATION_LIMIT
            e = int(cand[0]) if self.bland else int(cand[np.argmin(d[cand])])
            u = self.Binv @ self.A[:, e]
            rows = np.flatnonzero(u > PIVOT_TOL)
            if rows.size == 0:
                return UNBOUNDED
            ratios = self.xB[rows] / u[rows]
            tmin = ratios.min()
            ties = rows[ratios <= tmin + 1e-12 * max(1.0, abs(tmin))]
            if self.bland:
                r = int(min(ties, key=lambda i: self.basis[i]))
            else:
                r = int(max(ties, key=lambda i: (u[i], -self.basis[i])))
            self._pivot(r, e, u)
            obj = float(c[self.basis] @ self.xB)
            if obj < best - 1e-12 * max(1.0, abs(best) if np.isfinite(best) else 1.0):
                best, stall = obj, 0
            else:
                stall += 1
                if not self.bland and stall >= self.m:
                    log.debug("objective stalled for %d pivots; switching to Bland's rule", stall)
                    self.bland = True

    def _pivot(self, r, e, u):
        self.pivots.append((int(e), int(self.basis[r])))
        t = self.xB[r] / u[r]
        self.xB -= t * u
        self.xB[r] = t
        self.xB[(self.xB < 0) & (self.xB > -1e-10)] = 0.0
        self.xB[np.abs(self.xB) < 1e-13] = 0.0
        piv = self.Binv[r] / u[r]
        self.Binv -= np.outer(u, piv)
        self.Binv[r] = piv
        self.basis[r] = e
        self.iters += 1
        self.since_refactor += 1
        if self.since_refactor >= REFACTOR_EVERY:
            self.refactor()


def _solve_simplex(lp: LinearProgram, max_iters, pricing):
    A, b, c, c0, T, offset, slack_of_row = _standard_form(lp)
    m, nz = A.shape
    need_art = np.flatnonzero(slack_of_row < 0)
    n_art = len(need_art)
    art = np.zeros((m, n_art))
    art[need_art, np.arange(n_art)] = 1.0
    A1 = np.hstack([A, art])
    basis = slack_of_row.copy().tolist()
    for a, r in enumerate(need_art):
        basis[r] = nz + a
    c1 = np.concatenate([np.zeros(nz), np.ones(n_art)])
    allowed = np.ones(nz + n_art, dtype=bool)

    solver = _Simplex(A1, b, basis, max_iters, pricing)
    if n_art:
        status = solver.run(c1, allowed)
        if status != OPTIMAL:
            return _result(lp, None, status, solver)
        infeas = float(c1[solver.basis] @ solver.xB)
        if infeas > 1e-9 * max(1.0, float(np.abs(b).max(initial=0.0))):
            return _result(lp, None, INFEASIBLE, solver)
        # drive zero-level artificials out of the basis; drop redundant rows
        keep = list(range(m))
        for r in range(m):
            if solver.basis[r] < nz:
                continue
            row = solver.Binv[r] @ A1
            row[solver.basis] = 0.0
            row = row[:nz]
            if np.abs(row).max(initial=0.0) > 1e-9:
                e = int(np.argmax(np.abs(row)))
                solver._pivot(r, e, solver.Binv @ A1[:, e])
            else:
                keep.remove(r)
        basis = [solver.basis[r] for r in keep]
        solver = _Simplex(A[keep], b[keep], basis, max_iters, pricing, solver.iters, solver.pivots)
    else:
        solver = _Simplex(A, b, basis, max_iters, pricing, solver.iters, solver.pivots)
    status = solver.run(c, np.ones(nz, dtype=bool))
    z = np.zeros(nz)
    z[solver.basis] = solver.xB
    if status == UNBOUNDED:
        return _result(lp, None, status, solver)
    return _result(lp, offset + T @ z[: T.shape[1]], status, solver)


def _result(lp, x, status, solver):
    if x is None:
        return SimplexSolution(np.full(lp.n_vars, np.nan), np.nan, status, solver.iters, solver.pivots)
    x = np.clip(x, lp.lb, lp.ub)
    return SimplexSolution(x, float(lp.c @ x), status, solver.iters, solver.pivots)


def _solve_highs(lp: LinearProgram, max_iters):
    from scipy.optimize import linprog

    ub_rows = ~lp.is_eq
    kw = {}
    if ub_rows.any():
        kw.update(A_ub=lp.A[ub_rows], b_ub=lp.rhs[ub_rows])
    if lp.is_eq.any():
        kw.update(A_eq=lp.A[lp.is_eq], b_eq=lp.rhs[lp.is_eq])
    bounds = np.column_stack([np.where(np.isinf(lp.lb), None, lp.lb), np.where(np.isinf(lp.ub), None, lp.ub)])
    res = linprog(lp.c, bounds=bounds, method="highs", options={"maxiter": max_iters}, **kw)
    status = {0: OPTIMAL, 1: ITERATION_LIMIT, 2: INFEASIBLE, 3: UNBOUNDED}.get(res.status, NUMERICAL)
    iters = int(getattr(res, "nit", 0) or 0)
    if status != OPTIMAL or res.x is None:
        return SimplexSolution(np.full(lp.n_vars, np.nan), np.nan, status, iters, method="highs")
    x = np.clip(res.x, lp.lb, lp.ub)
    return SimplexSolution(x, float(lp.c @ x), status, iters, method="highs")


def standard_rows(lp: LinearProgram) -> int:
    """Row count of the bundled solver's standard form (original rows plus finite-box rows)."""
    lo, hi = lp.lb, lp.ub
    both = np.isfinite(lo) & np.isfinite(hi)
    split = both & (lo < 0) & (hi > 0)
    return lp.n_rows + int(both.sum() + split.sum())


def solve_lp(lp: LinearProgram, max_iters: int | None = None, method: str = "simplex",
             pricing: str = "dantzig") -> SimplexSolution:
    """Solve ``lp``.  ``method`` is "simplex" (bundled), "highs" (scipy) or "auto".

    "auto" uses the bundled solver up to AUTO_MAX_ROWS standard-form rows.
    """
    if method == "auto":
        method = "simplex" if standard_rows(lp) <= AUTO_MAX_ROWS else "highs"
    if max_iters is None:
        max_iters = 50 * (lp.n_rows + lp.n_vars) + 1000
    if method == "highs":
        return _solve_highs(lp, max_iters)
    if method != "simplex":
        raise ValueError(f"unknown LP method {method!r}")
    if pricing not in ("dantzig", "bland"):
        raise ValueError(f"unknown pricing rule {pricing!r}")
    return _solve_simplex(lp, max_iters, pricing)
