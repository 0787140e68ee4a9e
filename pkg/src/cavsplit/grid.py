"""Candidate posterior sets: simplex grids and atom tables."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import (
    NEG_INF,
    Atom,
    Belief,
    ProblemSpec,
    SpecError,
    belief_key,
    evaluate_function,
)

DEFAULT_ATOM_BUDGET = 2_000_000


class AtomBudgetError(ValueError):
    """The requested grid would exceed the configured atom budget."""


@dataclass(frozen=True)
class AtomTable:
    """Ordered, pairwise-distinct atoms; mesh_denominator is 0 if user-supplied."""

    atoms: tuple[Atom, ...] = field(repr=False)
    mesh_denominator: int = 0

    def __post_init__(self):
        keys = {a.belief.key() for a in self.atoms}
        if len(keys) != len(self.atoms):
            raise SpecError("atom table contains duplicate beliefs")

    def __len__(self) -> int:
        return len(self.atoms)

    @property
    def n_states(self) -> int:
        return self.atoms[0].belief.n

    def included_indices(self) -> tuple[int, ...]:
        return tuple(i for i, a in enumerate(self.atoms) if not a.excluded)

    def beliefs_matrix(self) -> np.ndarray:
        """N x |atoms| matrix whose columns are the atom beliefs."""
        return np.array([a.belief.probs for a in self.atoms], dtype=float).T

    def g_matrix(self) -> np.ndarray:
        """K x |atoms| matrix of constraint values."""
        k = len(self.atoms[0].g_values)
        return np.array([a.g_values for a in self.atoms], dtype=float).T.reshape(
            k, len(self.atoms)
        )

    def f_vector(self) -> np.ndarray:
        return np.array([a.f_value for a in self.atoms], dtype=float)


def simplex_grid(
    n_states: int, denominator: int, atom_budget: int = DEFAULT_ATOM_BUDGET
) -> list[Belief]:
    """All beliefs whose entries are integer multiples of 1/denominator.

    Atoms are generated as integer compositions of the denominator into
    n_states parts (first coordinate descending), so membership and equality
    are exact and every vertex is present.  Count is C(d+N-1, N-1).
    """
    if n_states < 2:
        raise SpecError(f"need at least 2 states, got {n_states}")
    if denominator < 1:
        raise SpecError(f"denominator must be >= 1, got {denominator}")
    count = math.comb(denominator + n_states - 1, n_states - 1)
    if count > atom_budget:
        raise AtomBudgetError(
            f"grid would have {count} atoms, exceeding budget {atom_budget}"
        )

    out: list[Belief] = []
    parts = [0] * n_states

    def fill(pos: int, remaining: int):
        if pos == n_states - 1:
            parts[pos] = remaining
            out.append(Belief(tuple(p / denominator for p in parts)))
            return
        for k in range(remaining, -1, -1):
            parts[pos] = k
            fill(pos + 1, remaining - k)

    fill(0, denominator)
    return out


def refine_nested(d: int, factor: int) -> int:
    """Denominator of the refined grid; the d-grid atoms all lie on it."""
    if factor < 2:
        raise SpecError(f"refinement factor must be >= 2, got {factor}")
    return d * factor


def dedupe_beliefs(beliefs) -> list[Belief]:
    """Drop exact duplicates (after rounding), keeping first occurrences."""
    seen = set()
    out = []
    for b in beliefs:
        k = b.key()
        if k not in seen:
            seen.add(k)
            out.append(b)
    return out


def tabulate(
    problem: ProblemSpec, beliefs, mesh_denominator: int = 0
) -> AtomTable:
    """Evaluate f and every g_l at each belief, preserving order.

    Atoms where f is -inf are retained but flagged excluded from LPs.  A
    constraint evaluating to -inf (or any non-finite value) is a
    specification error: constraints must be real-valued.
    """
    atoms = []
    for b in beliefs:
        if b.n != problem.n_states:
            raise SpecError(
                f"belief has {b.n} entries, problem has {problem.n_states} states"
            )
        f = evaluate_function(problem.objective, b)
        if math.isnan(f) or f == math.inf:
            raise SpecError(f"objective must be real or -inf, got {f!r}")
        g = problem.constraint_values(b)
        atoms.append(Atom(belief=b, f_value=f, g_values=g))
    return AtomTable(atoms=tuple(atoms), mesh_denominator=mesh_denominator)


def build_table(
    problem: ProblemSpec,
    denominator: int,
    extra_beliefs=(),
    atom_budget: int = DEFAULT_ATOM_BUDGET,
) -> AtomTable:
    """Tabulate the d-grid, optionally merged with user-supplied beliefs."""
    beliefs = simplex_grid(problem.n_states, denominator, atom_budget)
    if extra_beliefs:
        beliefs = dedupe_beliefs([*beliefs, *extra_beliefs])
        if len(beliefs) > atom_budget:
            raise AtomBudgetError(
                f"{len(beliefs)} atoms exceed budget {atom_budget}"
            )
    return tabulate(problem, beliefs, mesh_denominator=denominator)
