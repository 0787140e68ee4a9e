"""Assemble and solve the constrained concavification program on an atom table.

The program maximizes sum_m lambda_m f(mu_m) over weights lambda >= 0 on the
table's non-excluded atoms, subject to the N barycenter equalities
sum_m lambda_m mu_m = prior plus one aggregate row per constraint.  Weight
normalization is implied (every atom's belief sums to 1) and asserted on
output rather than added as a redundant row.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import caratheodory
from .core import (
    FEASIBILITY_TOL,
    NEG_INF,
    WEIGHT_FLOOR,
    Belief,
    ConstraintDiagnostic,
    ConstraintKind,
    ProblemSpec,
    SolveReport,
    SolveStatus,
    SpecError,
    SplittingPlan,
    evaluate_function,
)
from .grid import AtomTable
from .lp import LinearProgram, LpStatus, solve_lp


def _check_table(problem: ProblemSpec, table: AtomTable):
    if table.n_states != problem.n_states:
        raise SpecError(
            f"table has {table.n_states} states, problem has {problem.n_states}"
        )
    k = len(table.atoms[0].g_values)
    if k != problem.n_constraints:
        raise SpecError(
            f"table was tabulated with K={k}, problem has K={problem.n_constraints}"
        )


def build_program(
    problem: ProblemSpec, table: AtomTable, include_constraints: bool = True
) -> tuple[LinearProgram, tuple[int, ...]]:
    """The LP over non-excluded atoms, plus the column -> atom index map."""
    _check_table(problem, table)
    included = table.included_indices()
    if not included:
        raise SpecError("every atom is excluded (objective -inf everywhere)")
    idx = np.array(included, dtype=int)

    beliefs = table.beliefs_matrix()[:, idx]       # N x n
    f = table.f_vector()[idx]
    eq_rows = [beliefs]
    eq_rhs = [problem.prior.as_array()]
    ge_rows = []
    ge_rhs = []

    if include_constraints and problem.n_constraints:
        g = table.g_matrix()[:, idx]               # K x n
        for l, c in enumerate(problem.constraints):
            if c.kind is ConstraintKind.GE:
                ge_rows.append(g[l])
                ge_rhs.append(c.threshold)
            else:
                eq_rows.append(g[l].reshape(1, -1))
                eq_rhs.append(np.array([c.threshold]))

    lp = LinearProgram(
        objective=f,
        eq_matrix=np.vstack(eq_rows),
        eq_rhs=np.concatenate([np.atleast_1d(r) for r in eq_rhs]),
        ge_matrix=np.vstack(ge_rows) if ge_rows else None,
        ge_rhs=np.array(ge_rhs) if ge_rows else None,
    )
    return lp, included


def _extract_plan(
    table: AtomTable, included: tuple[int, ...], weights: np.ndarray
) -> SplittingPlan:
    entries = [
        (float(w), included[i]) for i, w in enumerate(weights) if w > WEIGHT_FLOOR
    ]
    total = math.fsum(w for w, _ in entries)
    if abs(total - 1.0) > FEASIBILITY_TOL:
        raise RuntimeError(
            f"implied weight normalization violated: sum lambda = {total!r}"
        )
    value = math.fsum(w * table.atoms[m].f_value for w, m in entries)
    return SplittingPlan(atoms=table.atoms, entries=tuple(entries), value=value)


def _diagnostics(
    problem: ProblemSpec,
    table: AtomTable,
    plan: SplittingPlan | None,
) -> tuple[ConstraintDiagnostic, ...]:
    diags = []
    for l, c in enumerate(problem.constraints):
        if plan is not None:
            agg = plan.aggregate(l)
            diags.append(
                ConstraintDiagnostic(
                    index=l,
                    kind=c.kind,
                    threshold=c.threshold,
                    aggregate=agg,
                    slack=agg - c.threshold,
                )
            )
        else:
            rng = threshold_range(problem, table, l)
            lo, hi = rng if rng is not None else (None, None)
            diags.append(
                ConstraintDiagnostic(
                    index=l,
                    kind=c.kind,
                    threshold=c.threshold,
                    achievable_min=lo,
                    achievable_max=hi,
                )
            )
    return tuple(diags)


def solve_constrained(problem: ProblemSpec, table: AtomTable) -> SolveReport:
    """Optimal constrained splitting on this atom table, or INFEASIBLE."""
    lp, included = build_program(problem, table)
    sol = solve_lp(lp)
    if sol.status is LpStatus.INFEASIBLE:
        return SolveReport(
            status=SolveStatus.INFEASIBLE,
            value=NEG_INF,
            plan=None,
            support_size=0,
            binding=frozenset(),
            diagnostics=_diagnostics(problem, table, None),
        )
    if sol.status is LpStatus.UNBOUNDED:
        raise RuntimeError(
            "unbounded program: assembly bug (weights live in the unit simplex)"
        )
    plan = _extract_plan(table, included, sol.x)
    report = caratheodory.binding_report(plan, problem)
    return SolveReport(
        status=SolveStatus.OPTIMAL,
        value=plan.value,
        plan=plan,
        support_size=plan.support_size,
        binding=frozenset(report.binding),
        diagnostics=_diagnostics(problem, table, plan),
    )


def solve_unconstrained(problem: ProblemSpec, table: AtomTable) -> SolveReport:
    """Classical concavification baseline (K = 0); support size <= N."""
    if problem.n_constraints:
        raise SpecError("solve_unconstrained requires a problem with no constraints")
    return solve_constrained(problem, table)


def evaluate_extended(problem: ProblemSpec, belief: Belief, gamma) -> float:
    """The lifted objective: f(belief) when every per-point threshold respects
    its constraint function at this belief, -inf otherwise."""
    gamma = tuple(float(g) for g in gamma)
    if len(gamma) != problem.n_constraints:
        raise SpecError(
            f"gamma has {len(gamma)} entries, problem has {problem.n_constraints}"
        )
    g_vals = problem.constraint_values(belief)
    for l, c in enumerate(problem.constraints):
        if c.kind is ConstraintKind.GE:
            if gamma[l] > g_vals[l] + FEASIBILITY_TOL:
                return NEG_INF
        else:
            if abs(gamma[l] - g_vals[l]) > FEASIBILITY_TOL:
                return NEG_INF
    return evaluate_function(problem.objective, belief)


def threshold_range(
    problem: ProblemSpec, table: AtomTable, l: int
) -> tuple[float, float] | None:
    """Min and max achievable aggregate for constraint l over Bayes-plausible
    weightings of the non-excluded atoms; None when the prior is unreachable.

    The constrained program can be feasible only if gamma_l lies weakly below
    the max (GE) or inside [min, max] (EQ); jointly necessary across
    constraints, not sufficient.
    """
    _check_table(problem, table)
    if not 0 <= l < problem.n_constraints:
        raise SpecError(f"constraint index {l} out of range")
    included = table.included_indices()
    if not included:
        return None
    idx = np.array(included, dtype=int)
    beliefs = table.beliefs_matrix()[:, idx]
    g = table.g_matrix()[l, idx]

    bounds = []
    for sign in (1.0, -1.0):
        lp = LinearProgram(
            objective=sign * g,
            eq_matrix=beliefs,
            eq_rhs=problem.prior.as_array(),
        )
        sol = solve_lp(lp)
        if sol.status is not LpStatus.OPTIMAL:
            return None
        bounds.append(sign * sol.value)
    hi, lo = bounds
    return lo, hi
