"""Support reduction of feasible plans to the N+K and N+M+K-r bounds.

While the support exceeds the target, a kernel vector of the matrix whose
rows are the belief coordinates, the preserved constraint aggregates, and
the all-ones row gives a direction that moves weight between atoms without
changing the barycenter, the preserved aggregates, or the total weight.
Following the direction with the weakly better objective until a weight
hits zero removes at least one atom per step.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .core import (
    BINDING_TOL,
    WEIGHT_FLOOR,
    ConstraintKind,
    InfeasiblePlanError,
    ProblemSpec,
    SplittingPlan,
    check_plan_feasibility,
)

logger = logging.getLogger(__name__)

KERNEL_TOL = 1e-10


class NumericalRankError(RuntimeError):
    """No usable kernel vector found even though the support exceeds the rank."""


@dataclass(frozen=True)
class BindingReport:
    """GE constraints split into binding and slack at the given plan."""

    binding: frozenset[int]
    slack: frozenset[int]

    @property
    def m(self) -> int:
        return len(self.binding)


def binding_report(
    plan: SplittingPlan, problem: ProblemSpec, tol: float = BINDING_TOL
) -> BindingReport:
    """Classify each GE constraint by |aggregate - threshold| <= tol."""
    binding = set()
    slack = set()
    for l in problem.ge_indices:
        agg = plan.aggregate(l)
        if abs(agg - problem.constraints[l].threshold) <= tol:
            binding.add(l)
        else:
            slack.add(l)
    return BindingReport(binding=frozenset(binding), slack=frozenset(slack))


def _kernel_vector(rows: np.ndarray) -> np.ndarray:
    """One nonzero kernel vector of `rows`, by SVD; equilibrated retry."""
    ns = scipy.linalg.null_space(rows)
    if ns.shape[1] and np.max(np.abs(ns[:, 0])) > KERNEL_TOL:
        return ns[:, 0]
    scale = np.linalg.norm(rows, axis=0)
    scale[scale == 0.0] = 1.0
    ns = scipy.linalg.null_space(rows / scale)
    if ns.shape[1] and np.max(np.abs(ns[:, 0])) > KERNEL_TOL:
        return ns[:, 0] / scale
    raise NumericalRankError(
        f"no kernel vector for a {rows.shape[0]}x{rows.shape[1]} row matrix"
    )


def _removal_step(weights: np.ndarray, eta: np.ndarray) -> tuple[float, int]:
    """Largest t with weights + t*eta >= 0, and the first index hitting zero."""
    neg = np.flatnonzero(eta < -WEIGHT_FLOOR)
    # The all-ones row forces sum(eta) = 0, so eta has negative entries.
    ratios = weights[neg] / -eta[neg]
    k = int(np.argmin(ratios))
    return float(ratios[k]), int(neg[k])


def reduce_support(
    plan: SplittingPlan, problem: ProblemSpec, preserve
) -> SplittingPlan:
    """Reduce support to at most N + |preserve| atoms, weakly increasing the
    objective and holding the barycenter and preserved aggregates fixed.

    `preserve` lists the constraint indices whose aggregates must be held;
    it must contain every EQ index.  Returns the plan unchanged when already
    within the bound.
    """
    preserve = sorted(set(int(l) for l in preserve))
    for l in preserve:
        if not 0 <= l < problem.n_constraints:
            raise ValueError(f"preserve index {l} out of range")
    missing = set(problem.eq_indices) - set(preserve)
    if missing:
        raise ValueError(f"EQ constraints must always be preserved: missing {sorted(missing)}")

    target = problem.n_states + len(preserve)
    if plan.support_size <= target:
        return plan

    verdict = check_plan_feasibility(plan, problem)
    if not verdict.ok:
        raise InfeasiblePlanError(verdict)

    weights = plan.weights
    indices = list(plan.atom_indices)
    beliefs = np.array([plan.atoms[m].belief.probs for m in indices]).T
    g_rows = np.array([[plan.atoms[m].g_values[l] for m in indices] for l in preserve])
    f_vals = np.array([plan.atoms[m].f_value for m in indices])

    while len(indices) > target:
        s = len(indices)
        rows = np.vstack([beliefs, g_rows.reshape(len(preserve), s), np.ones((1, s))])
        eta = _kernel_vector(rows)

        drift = float(f_vals @ eta)
        if drift < 0.0:
            eta = -eta
        elif drift == 0.0:
            # Either direction preserves the objective; pick the one that
            # removes the atom of lowest index.
            _, k_pos = _removal_step(weights, eta)
            _, k_neg = _removal_step(weights, -eta)
            if indices[k_neg] < indices[k_pos]:
                eta = -eta

        t, _ = _removal_step(weights, eta)
        weights = weights + t * eta
        keep = np.flatnonzero(weights > WEIGHT_FLOOR)
        if len(keep) == len(indices):  # numerical safety: force the argmin out
            _, k = _removal_step(weights, eta)
            keep = np.array([i for i in range(len(indices)) if i != k])
        weights = weights[keep]
        indices = [indices[i] for i in keep]
        beliefs = beliefs[:, keep]
        g_rows = g_rows[:, keep] if g_rows.size else g_rows.reshape(len(preserve), len(keep))
        f_vals = f_vals[keep]

    entries = tuple((float(w), m) for w, m in zip(weights, indices))
    value = math.fsum(w * plan.atoms[m].f_value for w, m in entries)
    return SplittingPlan(atoms=plan.atoms, entries=entries, value=value)


def reduce_support_slack(
    plan: SplittingPlan,
    problem: ProblemSpec,
    binding_tol: float = BINDING_TOL,
    feasibility_tol: float = 1e-8,
) -> SplittingPlan:
    """Reduce support preserving only binding GE aggregates plus all EQ ones,
    for the N + M + K - r bound.

    A dropped (slack) constraint can be grazed by the reduction on perturbed
    plans; any slack constraint found violated afterwards is promoted to
    preserved and the reduction restarts from the input plan (at most r
    restarts, logged).
    """
    report = binding_report(plan, problem, binding_tol)
    preserve = set(report.binding) | set(problem.eq_indices)

    while True:
        reduced = reduce_support(plan, problem, preserve)
        violated = {
            l
            for l in problem.ge_indices
            if l not in preserve
            and reduced.aggregate(l)
            < problem.constraints[l].threshold - feasibility_tol
        }
        if not violated:
            return reduced
        logger.warning(
            "slack constraints %s violated after reduction; promoting and restarting",
            sorted(violated),
        )
        preserve |= violated
