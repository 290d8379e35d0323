"""Global training of the linear node decision functions by one linear program.

Variables, in order: node weight vectors w_j (box-bounded by +-W_max; the
last basis entry is the bias), gamma_i (free), alpha_ij >= 0, beta_ij >= 0.

    min  sum_i gamma_i
    s.t. gamma_i >= w_pk^i . alpha_i + w_nk^i . beta_i       for all i, k
         1 + g_j(x_i) <= alpha_ij,  1 - g_j(x_i) <= beta_ij   for all i, j

At an optimum gamma_i equals the surrogate max-term of example i, so the
objective plus sum_i (R_max - sum_k pi_k^i) is the total surrogate risk.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .data import BasisConfig, SensorSpec, expand_basis
from .errors import SolverError
from .risk import SavingsMatrix, WeightVectors, build_weights, surrogate_risk, surrogate_terms
from .simplex import LinearProgram, SimplexSolution, solve_lp
from .tree import TreeStructure

log = logging.getLogger(__name__)

DEFAULT_WMAX = 1e3


@dataclass(frozen=True)
class DecisionFunctions:
    weights: tuple  # per node, over expand_basis(node columns) with bias last
    columns: tuple  # per node, feature columns read
    basis: BasisConfig

    @property
    def n_nodes(self):
        return len(self.weights)

    def node_basis(self, j, X_full):
        X_full = np.atleast_2d(np.asarray(X_full, dtype=float))
        return expand_basis(X_full[:, list(self.columns[j])], self.basis)

    def values(self, X_full):
        """g_j(x) for every row and node: (n, K-1)."""
        X_full = np.atleast_2d(np.asarray(X_full, dtype=float))
        out = np.zeros((X_full.shape[0], self.n_nodes))
        for j, w in enumerate(self.weights):
            out[:, j] = self.node_basis(j, X_full) @ w
        return out

    def to_json(self):
        return {
            "basis": self.basis.to_json(),
            "nodes": [{"columns": list(c), "weights": list(map(float, w))} for c, w in zip(self.columns, self.weights)],
        }

    @classmethod
    def from_json(cls, doc):
        return cls(
            tuple(np.array(n["weights"], dtype=float) for n in doc["nodes"]),
            tuple(tuple(n["columns"]) for n in doc["nodes"]),
            BasisConfig.from_json(doc["basis"]),
        )


def decision_basis(cfg: BasisConfig) -> BasisConfig:
    """Node bases always carry a bias."""
    return BasisConfig(cfg.degree, cfg.homogeneous, True)


def node_columns(tree: TreeStructure, sensors: SensorSpec):
    return tuple(tuple(sensors.columns(node.sensors)) for node in tree.nodes)


def assemble_lp(tree: TreeStructure, weights: WeightVectors, node_bases, w_max: float = DEFAULT_WMAX) -> LinearProgram:
    K = tree.K
    J = K - 1
    wp = np.asarray(weights.wp, dtype=float)
    wn = np.asarray(weights.wn, dtype=float)
    n = wp.shape[0]
    if wp.shape != (n, K, J) or wn.shape != (n, K, J):
        raise ValueError("weight vectors do not match the tree")
    if not (np.all(np.isfinite(wp)) and np.all(np.isfinite(wn))):
        raise ValueError("non-finite lost-savings weight")
    if np.any(wp < 0) or np.any(wn < 0):
        raise ValueError("lost-savings weights must be non-negative")
    if len(node_bases) != J:
        raise ValueError(f"expected {J} node bases, got {len(node_bases)}")
    node_bases = [np.asarray(Z, dtype=float) for Z in node_bases]
    for Z in node_bases:
        if Z.ndim != 2 or Z.shape[0] != n:
            raise ValueError("each node basis must have one row per example")
        if not np.all(np.isfinite(Z)):
            raise ValueError("non-finite basis value")

    sizes = [Z.shape[1] for Z in node_bases]
    w_off = np.concatenate([[0], np.cumsum(sizes)]).astype(int)
    g0 = int(w_off[-1])
    a0 = g0 + n
    b0 = a0 + n * J
    n_vars = b0 + n * J
    ii, jj = np.meshgrid(np.arange(n), np.arange(J), indexing="ij")
    a_idx = a0 + ii * J + jj  # (n, J)
    b_idx = b0 + ii * J + jj

    rows, cols, vals = [], [], []
    # gamma rows: -gamma_i + wp.alpha_i + wn.beta_i <= 0, row index i*K + k
    r_gamma = np.arange(n * K).reshape(n, K)
    rows.append(r_gamma.ravel())
    cols.append(np.repeat(g0 + np.arange(n), K))
    vals.append(np.full(n * K, -1.0))
    for W, idx in ((wp, a_idx), (wn, b_idx)):
        nz = np.nonzero(W)
        rows.append(r_gamma[nz[0], nz[1]])
        cols.append(idx[nz[0], nz[2]])
        vals.append(W[nz])
    # hinge rows
    ra0 = n * K
    rb0 = ra0 + n * J
    for j, Z in enumerate(node_bases):
        B = Z.shape[1]
        zr, zc = np.nonzero(Z)
        for sign, r0, idx in ((1.0, ra0, a_idx), (-1.0, rb0, b_idx)):
            rows.append(r0 + zr * J + j)
            cols.append(w_off[j] + zc)
            vals.append(sign * Z[zr, zc])
            rows.append(r0 + np.arange(n) * J + j)
            cols.append(idx[:, j])
            vals.append(np.full(n, -1.0))
    n_rows = n * K + 2 * n * J
    A = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n_rows, n_vars)
    ).tocsr()
    rhs = np.concatenate([np.zeros(n * K), np.full(2 * n * J, -1.0)])
    c = np.zeros(n_vars)
    c[g0:a0] = 1.0
    lb = np.concatenate([np.full(g0, -w_max), np.full(n, -np.inf), np.zeros(2 * n * J)])
    ub = np.concatenate([np.full(g0, w_max), np.full(n, np.inf), np.full(2 * n * J, np.inf)])
    names = (
        [f"w{j}_{b}" for j in range(J) for b in range(sizes[j])]
        + [f"gamma{i}" for i in range(n)]
        + [f"alpha{i}_{j}" for i in range(n) for j in range(J)]
        + [f"beta{i}_{j}" for i in range(n) for j in range(J)]
    )
    row_names = (
        [f"max{i}_{k}" for i in range(n) for k in range(K)]
        + [f"hinge_pos{i}_{j}" for i in range(n) for j in range(J)]
        + [f"hinge_neg{i}_{j}" for i in range(n) for j in range(J)]
    )
    blocks = {
        "w": [slice(int(w_off[j]), int(w_off[j + 1])) for j in range(J)],
        "gamma": slice(g0, a0),
        "alpha": slice(a0, b0),
        "beta": slice(b0, n_vars),
    }
    return LinearProgram(c, A, rhs, np.zeros(n_rows, dtype=bool), lb, ub, names, row_names, blocks)


@dataclass
class LPReport:
    status: str
    method: str
    iterations: int
    n_vars: int
    n_rows: int
    objective: float
    constant: float  # sum_i (R_max - sum_k pi_k^i)
    surrogate_total: float  # sum_i surrogate_risk at the extracted g
    max_gamma_gap: float  # max_i |gamma_i - surrogate max-term_i|
    loose_hinges: int  # weighted alpha/beta entries above their hinge by > 1e-6

    def to_json(self):
        return dict(self.__dict__)


def extract(lp: LinearProgram, sol: SimplexSolution, node_bases):
    ws = tuple(sol.x[s].copy() for s in lp.blocks["w"])
    n = node_bases[0].shape[0] if node_bases else 0
    g = np.column_stack([Z @ w for Z, w in zip(node_bases, ws)]) if ws else np.zeros((n, 0))
    return ws, g


def train_decisions(tree: TreeStructure, sav: SavingsMatrix, X_full, sensors: SensorSpec,
                    basis: BasisConfig, w_max: float = DEFAULT_WMAX, method: str = "auto",
                    dump_lp=None):
    """Fit g_1..g_{K-1} on training rows ``X_full`` (standardized, all columns).

    Returns (DecisionFunctions, LPReport).  Raises SolverError unless the LP
    solves to optimality.
    """
    cfg = decision_basis(basis)
    cols = node_columns(tree, sensors)
    X_full = np.asarray(X_full, dtype=float)
    bases = [expand_basis(X_full[:, list(c)], cfg) for c in cols]
    weights = build_weights(tree, sav)
    lp = assemble_lp(tree, weights, bases, w_max)
    if dump_lp is not None:
        with open(dump_lp, "w") as fh:
            lp.dump(fh)
    sol = solve_lp(lp, method=method)
    if not sol.ok:
        raise SolverError(sol.status, f"decision LP ({lp.n_rows} rows, {lp.n_vars} vars): {sol.status}")
    ws, g = extract(lp, sol, bases)
    funcs = DecisionFunctions(ws, cols, cfg)

    terms = surrogate_terms(weights, g)
    best = terms.max(axis=1) if tree.K > 1 else np.zeros(sav.n)
    gamma = sol.x[lp.blocks["gamma"]]
    a_h = np.maximum(1 + g, 0).ravel()
    b_h = np.maximum(1 - g, 0).ravel()
    used_a = (weights.wp > 0).any(axis=1).ravel()
    used_b = (weights.wn > 0).any(axis=1).ravel()
    loose = int(np.sum(used_a & (sol.x[lp.blocks["alpha"]] - a_h > 1e-6))
                + np.sum(used_b & (sol.x[lp.blocks["beta"]] - b_h > 1e-6)))
    constant = float(np.sum(sav.r_max - sav.pi.sum(axis=1)))
    report = LPReport(
        status=sol.status,
        method=sol.method,
        iterations=sol.iterations,
        n_vars=lp.n_vars,
        n_rows=lp.n_rows,
        objective=sol.objective,
        constant=constant,
        surrogate_total=float(np.sum(surrogate_risk(tree, sav, weights, g))),
        max_gamma_gap=float(np.max(np.abs(gamma - best), initial=0.0)),
        loose_hinges=loose,
    )
    log.info("decision LP: %s via %s, %d iterations, objective %.6g", sol.status, sol.method, sol.iterations, sol.objective)
    return funcs, report
