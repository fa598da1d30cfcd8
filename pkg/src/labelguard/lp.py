"""Dense two-phase simplex over box-bounded variables.

Problems are small (inputs plus one variable per unstable ReLU), so a dense tableau
with Bland's rule is enough and keeps the solver deterministic.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .interval import Interval

PIVOT_TOL = 1e-9
FEAS_TOL = 1e-7


class LPError(RuntimeError):
    """The simplex hit its iteration cap or found an unbounded ray (should not happen
    on box-bounded problems, so both indicate numerical trouble)."""


class Relation(str, enum.Enum):
    LE = "<="
    GE = ">="
    EQ = "="


class Status(str, enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"


@dataclass(frozen=True, eq=False)
class LinConstraint:
    coeffs: np.ndarray
    relation: Relation
    rhs: float

    def __post_init__(self):
        object.__setattr__(self, "coeffs", np.asarray(self.coeffs, dtype=float))
        object.__setattr__(self, "relation", Relation(self.relation))
        object.__setattr__(self, "rhs", float(self.rhs))

    def violation(self, x) -> float:
        lhs = float(self.coeffs @ np.asarray(x, dtype=float))
        if self.relation is Relation.LE:
            return max(0.0, lhs - self.rhs)
        if self.relation is Relation.GE:
            return max(0.0, self.rhs - lhs)
        return abs(lhs - self.rhs)


@dataclass(eq=False)
class LPProblem:
    """Maximize ``objective . x + objective_const`` subject to ``constraints`` and finite
    ``var_bounds``."""

    num_vars: int
    constraints: list[LinConstraint]
    objective: np.ndarray
    var_bounds: Sequence[Interval]
    objective_const: float = 0.0

    def __post_init__(self):
        self.objective = np.asarray(self.objective, dtype=float)
        if self.objective.shape != (self.num_vars,):
            raise ValueError(f"objective must have {self.num_vars} coefficients")
        if len(self.var_bounds) != self.num_vars:
            raise ValueError(f"need bounds for all {self.num_vars} variables")
        for b in self.var_bounds:
            if not (np.isfinite(b.lo) and np.isfinite(b.hi)):
                raise ValueError("variable bounds must be finite")
        for c in self.constraints:
            if c.coeffs.shape != (self.num_vars,):
                raise ValueError(f"constraint has {c.coeffs.size} coefficients, need {self.num_vars}")

    def add(self, coeffs, relation, rhs) -> None:
        self.constraints.append(LinConstraint(coeffs, relation, rhs))

    def value_at(self, x) -> float:
        return float(self.objective @ np.asarray(x, dtype=float) + self.objective_const)

    def max_violation(self, x) -> float:
        x = np.asarray(x, dtype=float)
        worst = 0.0
        for i, b in enumerate(self.var_bounds):
            worst = max(worst, b.lo - x[i], x[i] - b.hi)
        for c in self.constraints:
            worst = max(worst, c.violation(x))
        return worst


@dataclass(frozen=True, eq=False)
class LPOutcome:
    status: Status
    value: float | None = None
    point: np.ndarray | None = None
    iterations: int = field(default=0, compare=False)

    @property
    def optimal(self) -> bool:
        return self.status is Status.OPTIMAL


class _Tableau:
    """Rows ``A x' <= b`` with ``x' >= 0`` after shifting variables to their lower bounds."""

    def __init__(self, problem: LPProblem):
        lo = np.array([b.lo for b in problem.var_bounds])
        hi = np.array([b.hi for b in problem.var_bounds])
        n = problem.num_vars

        rows, rhs = [], []
        for c in problem.constraints:
            shifted = c.rhs - c.coeffs @ lo
            if c.relation in (Relation.LE, Relation.EQ):
                rows.append(c.coeffs)
                rhs.append(shifted)
            if c.relation in (Relation.GE, Relation.EQ):
                rows.append(-c.coeffs)
                rhs.append(-shifted)
        for i in range(n):
            row = np.zeros(n)
            row[i] = 1.0
            rows.append(row)
            rhs.append(hi[i] - lo[i])

        A = np.array(rows, dtype=float).reshape(len(rows), n)
        b = np.array(rhs, dtype=float)
        m = A.shape[0]
        negative = np.flatnonzero(b < 0)
        k = negative.size

        # columns: x' (n) | slacks (m) | artificials (k) | rhs
        T = np.zeros((m + 1, n + m + k + 1))
        T[:m, :n] = A
        T[:m, n : n + m] = np.eye(m)
        T[:m, -1] = b
        basis = np.arange(n, n + m)
        for a, i in enumerate(negative):
            T[i, :-1] *= -1.0
            T[i, -1] *= -1.0
            T[i, n + m + a] = 1.0
            basis[i] = n + m + a

        self.T = T
        self.basis = basis
        self.n, self.m, self.k = n, m, k
        self.lo = lo
        self.problem = problem
        self.iterations = 0
        self.max_iterations = 50 * (n + m)

    def _set_objective(self, costs: np.ndarray) -> None:
        """Load a maximization objective (one cost per column) as a reduced-cost row."""
        T = self.T
        T[-1, :] = 0.0
        T[-1, : costs.size] = -costs
        for i, j in enumerate(self.basis):
            if T[-1, j] != 0.0:
                T[-1, :] -= T[-1, j] * T[i, :]

    def _pivot(self, row: int, col: int) -> None:
        T = self.T
        T[row, :] /= T[row, col]
        col_vals = T[:, col].copy()
        col_vals[row] = 0.0
        T -= np.outer(col_vals, T[row, :])
        self.basis[row] = col
        self.iterations += 1

    def _optimize(self, n_cols: int) -> None:
        T = self.T
        while True:
            reduced = T[-1, :n_cols]
            candidates = np.flatnonzero(reduced < -PIVOT_TOL)
            if candidates.size == 0:
                return
            col = int(candidates[0])  # Bland: lowest index improving column
            column = T[:-1, col]
            ok = np.flatnonzero(column > PIVOT_TOL)
            if ok.size == 0:
                raise LPError("objective unbounded; variable bounds should prevent this")
            ratios = T[ok, -1] / column[ok]
            best = ratios.min()
            tied = ok[ratios <= best + PIVOT_TOL * max(1.0, abs(best))]
            row = int(tied[np.argmin(self.basis[tied])])  # Bland tie-break on basis index
            if self.iterations >= self.max_iterations:
                raise LPError(f"simplex did not converge in {self.max_iterations} pivots")
            self._pivot(row, col)

    def phase_one(self) -> bool:
        n, m, k = self.n, self.m, self.k
        if k == 0:
            return True
        costs = np.zeros(n + m + k)
        costs[n + m :] = -1.0
        self._set_objective(costs)
        self._optimize(n + m + k)
        if self.T[-1, -1] < -FEAS_TOL * max(1.0, np.abs(self.T[:-1, -1]).max(initial=0.0)):
            return False
        # drive zero-valued artificials out of the basis; drop redundant rows
        keep = []
        for i in range(m):
            if self.basis[i] >= n + m:
                entries = np.flatnonzero(np.abs(self.T[i, : n + m]) > PIVOT_TOL)
                if entries.size == 0:
                    continue
                self._pivot(i, int(entries[0]))
            keep.append(i)
        T = self.T
        self.T = np.vstack([T[keep][:, : n + m], np.zeros((1, n + m))])
        self.T = np.hstack([self.T, np.vstack([T[keep][:, -1:], [[0.0]]])])
        self.basis = self.basis[keep]
        self.m_active = len(keep)
        self.k = 0
        return True

    def point(self) -> np.ndarray:
        x = np.zeros(self.n)
        for i, j in enumerate(self.basis):
            if j < self.n:
                x[j] = self.T[i, -1]
        return self.lo + np.maximum(x, 0.0)

    def phase_two(self) -> None:
        n_cols = self.T.shape[1] - 1
        costs = np.zeros(n_cols)
        costs[: self.n] = self.problem.objective
        self._set_objective(costs)
        self._optimize(n_cols)


def solve(problem: LPProblem) -> LPOutcome:
    tab = _Tableau(problem)
    if not tab.phase_one():
        return LPOutcome(Status.INFEASIBLE, iterations=tab.iterations)
    tab.phase_two()
    x = tab.point()
    return LPOutcome(Status.OPTIMAL, problem.value_at(x), x, tab.iterations)


def feasible(problem: LPProblem) -> tuple[bool, np.ndarray | None]:
    """Phase one only. Returns ``(True, witness)`` or ``(False, None)``."""
    tab = _Tableau(problem)
    if not tab.phase_one():
        return False, None
    return True, tab.point()
