"""
Two-Phase Simplex Engine

Solves small dense linear programs in standard form

    minimize    c @ x
    subject to  A_eq @ x = b_eq,  x >= 0

with a full tableau. Phase one minimises the sum of artificial variables,
phase two the real objective. Bland's smallest-index rule picks both the
entering and the leaving variable, so the method cannot cycle.

The cone engine only ever needs tens of columns, so nothing here is tuned
for speed.
"""

import logging
from enum import Enum
from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict

from src.errors import DimensionMismatchError, LPNumericalError

logger = logging.getLogger(__name__)

# Tableau entries below this magnitude never serve as pivots
PIVOT_TOL = 1e-12


class LPStatus(str, Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


class LPResult(BaseModel):
    """Outcome of a two-phase solve."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    status: LPStatus
    x: Optional[np.ndarray] = None
    objective: float = 0.0
    infeasibility: float = 0.0
    iterations: int = 0

    @property
    def feasible(self) -> bool:
        return self.status != LPStatus.INFEASIBLE


def _pivot(T: np.ndarray, row: int, col: int) -> None:
    T[row] /= T[row, col]
    factors = T[:, col].copy()
    factors[row] = 0.0
    T -= np.outer(factors, T[row])


def _run_phase(
    T: np.ndarray,
    basis: list[int],
    allowed: np.ndarray,
    tol: float,
    max_iter: int,
) -> tuple[LPStatus, int]:
    """Pivot until no allowed column has a negative reduced cost."""
    iterations = 0
    while True:
        costs = T[-1, :-1]
        entering = np.flatnonzero((costs < -tol) & allowed)
        if entering.size == 0:
            return LPStatus.OPTIMAL, iterations
        col = int(entering[0])

        column = T[:-1, col]
        rows = np.flatnonzero(column > PIVOT_TOL)
        if rows.size == 0:
            return LPStatus.UNBOUNDED, iterations

        ratios = T[rows, -1] / column[rows]
        best = ratios.min()
        tied = rows[ratios <= best + PIVOT_TOL * (1.0 + abs(best))]
        row = int(min(tied, key=lambda i: basis[i]))

        _pivot(T, row, col)
        basis[row] = col
        iterations += 1
        if iterations > max_iter:
            raise LPNumericalError(f"simplex exceeded {max_iter} pivots")


def solve_lp(
    c: np.ndarray,
    A_eq: np.ndarray,
    b_eq: np.ndarray,
    tol: float = 1e-9,
    max_iter: int = 10_000,
) -> LPResult:
    """
    Solve min c@x s.t. A_eq@x = b_eq, x >= 0.

    Args:
        c: Cost vector of length n.
        A_eq: Constraint matrix of shape (m, n).
        b_eq: Right-hand side of length m.
        tol: Feasibility / optimality tolerance (scaled by 1 + max|b|).
        max_iter: Pivot cap per phase.

    Returns:
        LPResult. For INFEASIBLE results `infeasibility` holds the phase-one
        optimum, i.e. the smallest l1 violation of the equality system.

    Raises:
        DimensionMismatchError: If the shapes disagree.
        LPNumericalError: If pivoting does not terminate or produces NaNs.
    """
    A = np.array(A_eq, dtype=float, ndmin=2)
    b = np.array(b_eq, dtype=float).ravel()
    cost = np.array(c, dtype=float).ravel()
    m, n = A.shape
    if b.shape[0] != m or cost.shape[0] != n:
        raise DimensionMismatchError(
            f"LP shapes disagree: A is {A.shape}, b has {b.shape[0]}, c has {cost.shape[0]}"
        )

    if m == 0:
        if np.any(cost < -tol):
            return LPResult(status=LPStatus.UNBOUNDED, x=np.zeros(n))
        return LPResult(status=LPStatus.OPTIMAL, x=np.zeros(n))

    flip = b < 0
    A[flip] *= -1.0
    b[flip] *= -1.0
    scale = 1.0 + float(np.max(np.abs(b)))

    # Phase one: artificial identity basis
    T = np.zeros((m + 1, n + m + 1))
    T[:m, :n] = A
    T[:m, n:n + m] = np.eye(m)
    T[:m, -1] = b
    T[-1, :n] = -A.sum(axis=0)
    T[-1, -1] = -b.sum()
    basis = list(range(n, n + m))
    allowed = np.ones(n + m, dtype=bool)

    _, it1 = _run_phase(T, basis, allowed, tol, max_iter)
    infeasibility = max(-float(T[-1, -1]), 0.0)
    if not np.all(np.isfinite(T)):
        raise LPNumericalError("non-finite tableau entries after phase one")

    if infeasibility > tol * scale:
        logger.debug(f"LP infeasible: phase-one optimum {infeasibility:.3e}")
        return LPResult(
            status=LPStatus.INFEASIBLE, infeasibility=infeasibility, iterations=it1
        )

    # Pivot remaining artificials out; rows that cannot be pivoted are redundant
    for row in range(m):
        if basis[row] >= n:
            candidates = np.flatnonzero(np.abs(T[row, :n]) > tol)
            if candidates.size:
                col = int(candidates[0])
                _pivot(T, row, col)
                basis[row] = col

    # Phase two: real objective, artificials barred from re-entering
    T[-1, :] = 0.0
    T[-1, :n] = cost
    for row, var in enumerate(basis):
        if var < n and cost[var] != 0.0:
            T[-1] -= cost[var] * T[row]
    allowed[n:] = False

    status, it2 = _run_phase(T, basis, allowed, tol, max_iter)
    if not np.all(np.isfinite(T)):
        raise LPNumericalError("non-finite tableau entries after phase two")

    x = np.zeros(n)
    for row, var in enumerate(basis):
        if var < n:
            x[var] = max(T[row, -1], 0.0)

    return LPResult(
        status=status,
        x=x,
        objective=float(cost @ x),
        infeasibility=infeasibility,
        iterations=it1 + it2,
    )
