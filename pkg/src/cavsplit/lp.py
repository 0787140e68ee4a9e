"""Dense two-phase primal simplex: maximize c.x s.t. A x = b, G x >= h, x >= 0.

Inequalities get one slack column each (G x - s = h, s >= 0), appended after
the structural variables so callers can ignore them by index range.  Phase 1
drives artificial variables to zero or declares infeasibility; Phase 2
optimizes the real objective.  Dantzig's rule with lowest-index tie-breaks is
used until a stall threshold of degenerate pivots, after which Bland's rule
is engaged permanently to guarantee termination.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

PIVOT_TOL = 1e-10   # entries smaller in magnitude are treated as zero in pivots
OPT_TOL = 1e-9      # reduced-cost threshold for optimality
DEGENERATE_STEP = 1e-12
STALL_THRESHOLD = 200


class LpStatus(Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


@dataclass(frozen=True, eq=False)
class LinearProgram:
    """maximize objective . x  s.t.  eq_matrix x = eq_rhs, ge_matrix x >= ge_rhs, x >= 0."""

    objective: np.ndarray
    eq_matrix: np.ndarray = None
    eq_rhs: np.ndarray = None
    ge_matrix: np.ndarray = None
    ge_rhs: np.ndarray = None

    def __post_init__(self):
        c = np.asarray(self.objective, dtype=float)
        n = c.shape[0]
        A = _as_matrix(self.eq_matrix, n)
        b = _as_vector(self.eq_rhs, A.shape[0], "eq_rhs")
        G = _as_matrix(self.ge_matrix, n)
        h = _as_vector(self.ge_rhs, G.shape[0], "ge_rhs")
        for name, arr in (("objective", c), ("eq", A), ("eq_rhs", b), ("ge", G), ("ge_rhs", h)):
            if arr.size and not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} contains non-finite coefficients")
        object.__setattr__(self, "objective", c)
        object.__setattr__(self, "eq_matrix", A)
        object.__setattr__(self, "eq_rhs", b)
        object.__setattr__(self, "ge_matrix", G)
        object.__setattr__(self, "ge_rhs", h)

    @property
    def n(self) -> int:
        return self.objective.shape[0]


def _as_matrix(m, n: int) -> np.ndarray:
    if m is None:
        return np.zeros((0, n))
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[1] != n:
        raise ValueError(f"constraint matrix shape {m.shape} incompatible with n={n}")
    return m

def _as_vector(v, rows: int, name: str) -> np.ndarray:
    if v is None:
        v = np.zeros(rows)
    v = np.asarray(v, dtype=float)
    if v.shape != (rows,):
        raise ValueError(f"{name} has shape {v.shape}, expected ({rows},)")
    return v


@dataclass(frozen=True, eq=False)
class LpSolution:
    status: LpStatus
    value: float
    x: np.ndarray = field(default=None)      # structural variables only
    basis: tuple[int, ...] = ()               # basic indices in (structural+slack) space


def solve_lp(lp: LinearProgram, stall_threshold: int = STALL_THRESHOLD) -> LpSolution:
    """Two-phase primal simplex.  See the module docstring for conventions."""
    n = lp.n
    me = lp.eq_matrix.shape[0]
    mg = lp.ge_matrix.shape[0]
    m = me + mg

    if m == 0:
        # No rows: x = 0 is optimal unless some objective entry is positive.
        if np.any(lp.objective > OPT_TOL):
            return LpSolution(LpStatus.UNBOUNDED, float("inf"))
        return LpSolution(LpStatus.OPTIMAL, 0.0, np.zeros(n), ())

    # Standard form with slacks: [A 0; G -I] x_aug = [b; h], x_aug >= 0.
    n_aug = n + mg
    M = np.zeros((m, n_aug))
    M[:me, :n] = lp.eq_matrix
    M[me:, :n] = lp.ge_matrix
    M[me:, n:] = -np.eye(mg)
    q = np.concatenate([lp.eq_rhs, lp.ge_rhs])

    neg = q < 0
    M[neg] *= -1.0
    q = np.abs(q)

    state = _SimplexState(stall_threshold)

    # Phase 1: minimize the sum of artificials from the all-artificial basis.
    T = np.zeros((m + 1, n_aug + m + 1))
    T[:m, :n_aug] = M
    T[:m, n_aug:-1] = np.eye(m)
    T[:m, -1] = q
    T[m, :] = -T[:m, :].sum(axis=0)
    T[m, n_aug:-1] = 0.0
    basis = list(range(n_aug, n_aug + m))

    status = _iterate(T, basis, state, blocked_above=None)
    if status is LpStatus.UNBOUNDED:  # cannot happen: phase-1 objective >= 0
        raise RuntimeError("phase 1 reported unbounded")
    if -T[m, -1] > 1e-9:
        return LpSolution(LpStatus.INFEASIBLE, float("-inf"))

    _drive_out_artificials(T, basis, n_aug)
    m_eff = len(basis)

    # Phase 2 on the artificial-free tableau, real objective (min -c).
    T2 = np.zeros((m_eff + 1, n_aug + 1))
    T2[:m_eff, :n_aug] = T[:m_eff, :n_aug]
    T2[:m_eff, -1] = T[:m_eff, -1]
    c_min = np.zeros(n_aug)
    c_min[:n] = -lp.objective
    obj = c_min.copy()
    rhs_obj = 0.0
    for i, bi in enumerate(basis):
        if c_min[bi] != 0.0:
            obj -= c_min[bi] * T2[i, :n_aug]
            rhs_obj -= c_min[bi] * T2[i, -1]
    T2[m_eff, :n_aug] = obj
    T2[m_eff, -1] = rhs_obj

    status = _iterate(T2, basis, state, blocked_above=None)
    if status is LpStatus.UNBOUNDED:
        return LpSolution(LpStatus.UNBOUNDED, float("inf"))

    x_aug = np.zeros(n_aug)
    for i, bi in enumerate(basis):
        x_aug[bi] = T2[i, -1]
    x = x_aug[:n]
    value = float(lp.objective @ x)

    eq_res, ge_viol, min_x = lp_residuals(lp, x)
    if max(eq_res, ge_viol, -min_x) > 1e-7:
        raise RuntimeError(
            f"simplex produced an uncertified solution "
            f"(residuals {eq_res:.2e}, {ge_viol:.2e}, min x {min_x:.2e})"
        )
    return LpSolution(LpStatus.OPTIMAL, value, x, tuple(sorted(basis)))


class _SimplexState:
    """Pivot bookkeeping shared across both phases of one solve."""

    def __init__(self, stall_threshold: int):
        self.stall_threshold = stall_threshold
        self.degenerate_pivots = 0
        self.bland = False

    def record_step(self, step: float):
        if step <= DEGENERATE_STEP:
            self.degenerate_pivots += 1
            if self.degenerate_pivots > self.stall_threshold:
                self.bland = True


def _iterate(T, basis, state, blocked_above, max_iter: int = 50_000):
    """Pivot to optimality of the tableau's (minimization) objective row.

    `blocked_above`: columns with index >= this never enter (unused: None).
    """
    m = T.shape[0] - 1
    width = T.shape[1] - 1
    limit = width if blocked_above is None else blocked_above
    for _ in range(max_iter):
        red = T[m, :limit]
        if state.bland:
            candidates = np.flatnonzero(red < -OPT_TOL)
            if candidates.size == 0:
                return LpStatus.OPTIMAL
            j = int(candidates[0])
        else:
            j = int(np.argmin(red))
            if red[j] >= -OPT_TOL:
                return LpStatus.OPTIMAL

        col = T[:m, j]
        rows = np.flatnonzero(col > PIVOT_TOL)
        if rows.size == 0:
            return LpStatus.UNBOUNDED
        ratios = T[rows, -1] / col[rows]
        best = ratios.min()
        ties = rows[np.flatnonzero(ratios <= best + 1e-15)]
        # Lowest basic-variable index among ties (Bland-compatible, deterministic).
        p = int(min(ties, key=lambda i: basis[i]))

        state.record_step(best)
        _pivot(T, p, j)
        basis[p] = j
    raise RuntimeError("simplex iteration limit exceeded")


def _pivot(T, p: int, j: int):
    T[p, :] /= T[p, j]
    col = T[:, j].copy()
    col[p] = 0.0
    T -= np.outer(col, T[p, :])
    T[:, j] = 0.0
    T[p, j] = 1.0


def _drive_out_artificials(T, basis, n_aug: int):
    """Pivot basic artificials onto structural/slack columns; drop redundant rows."""
    rows_to_drop = []
    for i in range(len(basis)):
        if basis[i] < n_aug:
            continue
        row = T[i, :n_aug]
        nz = np.flatnonzero(np.abs(row) > PIVOT_TOL)
        if nz.size == 0:
            rows_to_drop.append(i)
            continue
        j = int(nz[0])
        _pivot(T, i, j)
        basis[i] = j
    for i in reversed(rows_to_drop):
        T_rows = list(range(T.shape[0]))
        T_rows.remove(i)
        T[: len(T_rows), :] = T[T_rows, :]
        basis.pop(i)
    # callers slice rows by len(basis) afterwards


def lp_residuals(lp: LinearProgram, x) -> tuple[float, float, float]:
    """(max equality residual, max inequality violation, min variable value)."""
    x = np.asarray(x, dtype=float)
    eq_res = 0.0
    if lp.eq_matrix.shape[0]:
        eq_res = float(np.max(np.abs(lp.eq_matrix @ x - lp.eq_rhs)))
    ge_viol = 0.0
    if lp.ge_matrix.shape[0]:
        ge_viol = float(np.max(np.maximum(lp.ge_rhs - lp.ge_matrix @ x, 0.0)))
    min_x = float(np.min(x)) if x.size else 0.0
    return eq_res, ge_viol, min_x


def reduced_costs(lp: LinearProgram, basis) -> np.ndarray:
    """Reduced costs of every (structural + slack) column at the given basis.

    Maximization convention: at an optimal basis all entries are <= ~1e-8.
    """
    n = lp.n
    mg = lp.ge_matrix.shape[0]
    me = lp.eq_matrix.shape[0]
    n_aug = n + mg
    M = np.zeros((me + mg, n_aug))
    M[:me, :n] = lp.eq_matrix
    M[me:, :n] = lp.ge_matrix
    M[me:, n:] = -np.eye(mg)
    c = np.zeros(n_aug)
    c[:n] = lp.objective

    basis = list(basis)
    B = M[:, basis]
    # Multipliers from the basis; lstsq tolerates the redundant rows that
    # phase 1 removed from its own tableau but are still present in M.
    y, *_ = np.linalg.lstsq(B.T, c[basis], rcond=None)
    return c - M.T @ y
