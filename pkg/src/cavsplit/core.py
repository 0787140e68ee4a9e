"""Domain types and feasibility checking shared by all solver modules.

A splitting assigns weights to posterior beliefs so that they average back
to the prior (Bayes plausibility).  All types here are immutable; every
operation is a pure function.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

NEG_INF = float("-inf")

# Centralized tolerance ledger.  Keep comparisons consistent across modules.
FEASIBILITY_TOL = 1e-9     # plan feasibility (Bayes rows, thresholds, weights)
WEIGHT_FLOOR = 1e-12       # weights at or below this are treated as zero
BINDING_TOL = 1e-7         # binding/slack classification (looser than feasibility)
BELIEF_DECIMALS = 12       # rounding used for exact belief identity/lookup


class SpecError(ValueError):
    """Structurally invalid input: bad dimensions, bad ordering, bad values."""


class TableDomainError(LookupError):
    """A TABLE function was queried at a belief outside its listed atom set."""


class InfeasiblePlanError(ValueError):
    """An operation required a feasible plan and was given an infeasible one."""

    def __init__(self, verdict: "FeasibilityVerdict"):
        self.verdict = verdict
        worst = ", ".join(str(v) for v in verdict.violations[:3])
        super().__init__(f"plan is infeasible: {worst}")


def belief_key(probs) -> tuple[float, ...]:
    """Canonical rounded tuple used for exact belief comparisons and lookups."""
    return tuple(round(float(p), BELIEF_DECIMALS) + 0.0 for p in probs)


@dataclass(frozen=True)
class Belief:
    """A probability vector over the N states."""

    probs: tuple[float, ...]

    def __post_init__(self):
        probs = tuple(float(p) for p in self.probs)
        object.__setattr__(self, "probs", probs)
        if len(probs) < 2:
            raise SpecError(f"belief needs at least 2 states, got {len(probs)}")
        if any(p < -WEIGHT_FLOOR for p in probs):
            raise SpecError(f"negative belief entry in {probs}")
        total = math.fsum(probs)
        if abs(total - 1.0) > FEASIBILITY_TOL:
            raise SpecError(f"belief entries sum to {total!r}, not 1")

    @property
    def n(self) -> int:
        return len(self.probs)

    def key(self) -> tuple[float, ...]:
        return belief_key(self.probs)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.probs, dtype=float)

    def __getitem__(self, i: int) -> float:
        return self.probs[i]


# ---------------------------------------------------------------------------
# Function forms.  The solver only ever needs point evaluations, so each form
# is a small frozen dataclass with an evaluate() method; evaluate_function()
# is the dispatching entry point.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AffineFunction:
    """coeffs . mu + offset."""

    coeffs: tuple[float, ...]
    offset: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "coeffs", tuple(float(c) for c in self.coeffs))
        object.__setattr__(self, "offset", float(self.offset))

    def evaluate(self, belief: Belief) -> float:
        if len(self.coeffs) != belief.n:
            raise SpecError(
                f"affine coeffs length {len(self.coeffs)} != {belief.n} states"
            )
        return math.fsum(c * p for c, p in zip(self.coeffs, belief.probs)) + self.offset


@dataclass(frozen=True)
class IndicatorThreshold:
    """Value `hi` when coordinate `coord` is >= cutoff, else `lo`.

    The boundary is included (>=) so the maximizer is attained at the cutoff
    atom on a grid containing it.
    """

    coord: int
    cutoff: float
    hi: float = 1.0
    lo: float = 0.0

    def evaluate(self, belief: Belief) -> float:
        if not 0 <= self.coord < belief.n:
            raise SpecError(f"indicator coord {self.coord} out of range")
        return float(self.hi) if belief[self.coord] >= self.cutoff else float(self.lo)


@dataclass(frozen=True)
class EntropyFunction:
    """scale * Shannon entropy (natural log, 0 log 0 := 0)."""

    scale: float = 1.0

    def evaluate(self, belief: Belief) -> float:
        h = -math.fsum(p * math.log(p) for p in belief.probs if p > 0.0)
        return self.scale * h


@dataclass(frozen=True)
class TableFunction:
    """Explicit values on a listed atom set; undefined elsewhere.

    Values may be -inf only when the table is used as an objective.
    """

    beliefs: tuple[Belief, ...]
    values: tuple[float, ...]

    def __post_init__(self):
        beliefs = tuple(
            b if isinstance(b, Belief) else Belief(tuple(b)) for b in self.beliefs
        )
        values = tuple(float(v) for v in self.values)
        if len(beliefs) != len(values):
            raise SpecError("table beliefs and values differ in length")
        object.__setattr__(self, "beliefs", beliefs)
        object.__setattr__(self, "values", values)
        object.__setattr__(
            self, "_lookup", {b.key(): v for b, v in zip(beliefs, values)}
        )
        if len(self._lookup) != len(beliefs):
            raise SpecError("table contains duplicate beliefs")

    def evaluate(self, belief: Belief) -> float:
        try:
            return self._lookup[belief.key()]
        except KeyError:
            raise TableDomainError(
                f"belief {belief.probs} is not in the table's atom set"
            ) from None


@dataclass(frozen=True)
class PiecewiseLinear:
    """Max (or min) of finitely many affine pieces."""

    pieces: tuple[AffineFunction, ...]
    mode: str = "max"  # "max" or "min"

    def __post_init__(self):
        pieces = tuple(
            p if isinstance(p, AffineFunction) else AffineFunction(*p)
            for p in self.pieces
        )
        if not pieces:
            raise SpecError("piecewise-linear function needs at least one piece")
        if self.mode not in ("max", "min"):
            raise SpecError(f"piecewise-linear mode must be max or min: {self.mode}")
        object.__setattr__(self, "pieces", pieces)

    def evaluate(self, belief: Belief) -> float:
        vals = [p.evaluate(belief) for p in self.pieces]
        return max(vals) if self.mode == "max" else min(vals)


FunctionSpec = (
    AffineFunction | IndicatorThreshold | EntropyFunction | TableFunction | PiecewiseLinear
)


def evaluate_function(spec: FunctionSpec, belief: Belief) -> float:
    """Evaluate a function form at a belief.  May return -inf (objectives only)."""
    return spec.evaluate(belief)


# ---------------------------------------------------------------------------
# Problems
# ---------------------------------------------------------------------------


class ConstraintKind(Enum):
    GE = "ge"
    EQ = "eq"


@dataclass(frozen=True)
class ConstraintSpec:
    function: FunctionSpec
    kind: ConstraintKind
    threshold: float

    def __post_init__(self):
        object.__setattr__(self, "threshold", float(self.threshold))
        if not isinstance(self.kind, ConstraintKind):
            object.__setattr__(self, "kind", ConstraintKind(self.kind))


@dataclass(frozen=True)
class ProblemSpec:
    """States, prior, objective f, and ordered constraints (inequalities first)."""

    states: tuple[str, ...]
    prior: Belief
    objective: FunctionSpec
    constraints: tuple[ConstraintSpec, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "states", tuple(str(s) for s in self.states))
        object.__setattr__(self, "constraints", tuple(self.constraints))
        if len(self.states) < 2:
            raise SpecError("need at least 2 states")
        if self.prior.n != len(self.states):
            raise SpecError(
                f"prior has {self.prior.n} entries for {len(self.states)} states"
            )
        seen_eq = False
        for c in self.constraints:
            if c.kind is ConstraintKind.EQ:
                seen_eq = True
            elif seen_eq:
                raise SpecError("all GE constraints must precede EQ constraints")

    @property
    def n_states(self) -> int:
        return len(self.states)

    @property
    def n_constraints(self) -> int:
        return len(self.constraints)

    @property
    def n_inequalities(self) -> int:
        """Number of GE constraints (the leading block)."""
        return sum(1 for c in self.constraints if c.kind is ConstraintKind.GE)

    @property
    def ge_indices(self) -> tuple[int, ...]:
        return tuple(range(self.n_inequalities))

    @property
    def eq_indices(self) -> tuple[int, ...]:
        return tuple(range(self.n_inequalities, self.n_constraints))

    def constraint_values(self, belief: Belief) -> tuple[float, ...]:
        vals = []
        for i, c in enumerate(self.constraints):
            v = evaluate_function(c.function, belief)
            if not math.isfinite(v):
                raise SpecError(f"constraint {i} is not real-valued at {belief.probs}")
            vals.append(v)
        return tuple(vals)

    def without_constraints(self) -> "ProblemSpec":
        return replace(self, constraints=())


# ---------------------------------------------------------------------------
# Atoms and plans
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Atom:
    """A candidate posterior with cached objective and constraint values."""

    belief: Belief
    f_value: float
    g_values: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "f_value", float(self.f_value))
        object.__setattr__(self, "g_values", tuple(float(g) for g in self.g_values))
        if any(not math.isfinite(g) for g in self.g_values):
            raise SpecError("constraint values must be real-valued")

    @property
    def excluded(self) -> bool:
        """True when the objective is -inf here; the atom never enters an LP."""
        return self.f_value == NEG_INF


@dataclass(frozen=True)
class SplittingPlan:
    """A weighted family of atoms averaging back to the prior.

    Entries hold (weight, atom index) into one shared canonical atom tuple,
    so atom identity checks stay exact across lift/reduce round trips.
    """

    atoms: tuple[Atom, ...] = field(repr=False)
    entries: tuple[tuple[float, int], ...]
    value: float

    def __post_init__(self):
        entries = tuple((float(w), int(m)) for w, m in self.entries)
        object.__setattr__(self, "entries", entries)
        object.__setattr__(self, "value", float(self.value))
        if not entries:
            raise SpecError("plan has no entries")
        for w, m in entries:
            if w <= WEIGHT_FLOOR:
                raise SpecError(f"plan weight {w!r} is not strictly positive")
            if not 0 <= m < len(self.atoms):
                raise SpecError(f"atom index {m} out of range")
        total = math.fsum(w for w, _ in entries)
        if abs(total - 1.0) > FEASIBILITY_TOL:
            raise SpecError(f"plan weights sum to {total!r}, not 1")

    @property
    def support_size(self) -> int:
        return len(self.entries)

    @property
    def weights(self) -> np.ndarray:
        return np.array([w for w, _ in self.entries], dtype=float)

    @property
    def atom_indices(self) -> tuple[int, ...]:
        return tuple(m for _, m in self.entries)

    def support_atoms(self) -> tuple[Atom, ...]:
        return tuple(self.atoms[m] for _, m in self.entries)

    def barycenter(self) -> np.ndarray:
        beliefs = np.array([self.atoms[m].belief.probs for _, m in self.entries])
        return self.weights @ beliefs

    def aggregate(self, l: int) -> float:
        """Expected constraint value sum_m lambda_m g_l(mu_m)."""
        return math.fsum(w * self.atoms[m].g_values[l] for w, m in self.entries)

    def objective_value(self) -> float:
        """Recompute sum_m lambda_m f(mu_m) from the atoms."""
        return math.fsum(w * self.atoms[m].f_value for w, m in self.entries)


@dataclass(frozen=True)
class LiftedPlan:
    """A plan augmented with per-entry threshold shares for each constraint."""

    base: SplittingPlan
    gamma_shares: tuple[tuple[float, ...], ...]  # one K-vector per plan entry
    gamma_bar: tuple[float, ...]  # realized aggregates sum_m lambda_m g_l(mu_m)

    def __post_init__(self):
        shares = tuple(tuple(float(s) for s in row) for row in self.gamma_shares)
        object.__setattr__(self, "gamma_shares", shares)
        object.__setattr__(self, "gamma_bar", tuple(float(g) for g in self.gamma_bar))
        if len(shares) != self.base.support_size:
            raise SpecError("one share vector per plan entry required")
        k = len(self.gamma_bar)
        if any(len(row) != k for row in shares):
            raise SpecError("share vectors must all have length K")


# ---------------------------------------------------------------------------
# Verdicts and reports
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Violation:
    check: str        # "bayes", "weights", "ge", "eq"
    index: int        # state or constraint index; -1 when not applicable
    magnitude: float

    def __str__(self):
        return f"{self.check}[{self.index}] off by {self.magnitude:.3g}"


@dataclass(frozen=True)
class FeasibilityVerdict:
    ok: bool
    violations: tuple[Violation, ...] = ()


class SolveStatus(Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"


@dataclass(frozen=True)
class ConstraintDiagnostic:
    """Per-constraint slack report; achievable range filled on infeasibility."""

    index: int
    kind: ConstraintKind
    threshold: float
    aggregate: float | None = None
    slack: float | None = None
    achievable_min: float | None = None
    achievable_max: float | None = None


@dataclass(frozen=True)
class SolveReport:
    status: SolveStatus
    value: float
    plan: SplittingPlan | None
    support_size: int
    binding: frozenset[int]
    diagnostics: tuple[ConstraintDiagnostic, ...] = ()

    def __post_init__(self):
        if self.status is SolveStatus.INFEASIBLE:
            if self.plan is not None or self.value != NEG_INF:
                raise SpecError("infeasible report must carry value -inf and no plan")
        elif self.plan is not None and self.support_size != self.plan.support_size:
            raise SpecError("support_size disagrees with the plan")


def check_plan_feasibility(
    plan: SplittingPlan, problem: ProblemSpec, tol: float = FEASIBILITY_TOL
) -> FeasibilityVerdict:
    """Check Bayes plausibility, weight normalization, and all thresholds.

    Raises SpecError on dimension mismatches; threshold violations are
    reported in the verdict, not raised.
    """
    n = problem.n_states
    k = problem.n_constraints
    for _, m in plan.entries:
        atom = plan.atoms[m]
        if atom.belief.n != n:
            raise SpecError(f"atom {m} has {atom.belief.n} states, problem has {n}")
        if len(atom.g_values) != k:
            raise SpecError(f"atom {m} has {len(atom.g_values)} g-values, problem has {k}")

    violations = []
    total = math.fsum(w for w, _ in plan.entries)
    if abs(total - 1.0) > tol:
        violations.append(Violation("weights", -1, abs(total - 1.0)))

    bary = plan.barycenter()
    for i in range(n):
        gap = abs(bary[i] - problem.prior[i])
        if gap > tol:
            violations.append(Violation("bayes", i, gap))

    for l, c in enumerate(problem.constraints):
        agg = plan.aggregate(l)
        if c.kind is ConstraintKind.GE:
            if agg < c.threshold - tol:
                violations.append(Violation("ge", l, c.threshold - agg))
        else:
            if abs(agg - c.threshold) > tol:
                violations.append(Violation("eq", l, abs(agg - c.threshold)))

    return FeasibilityVerdict(ok=not violations, violations=tuple(violations))
