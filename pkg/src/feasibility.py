"""
Feasibility Solver

Residuals, alternating-projection solves and local sampling of the
solution sets Phi(A, B, c) and Psi(A, b).

    NSEP: alternate between C x Q and the affine set {(x, y) : A x - B y = c}
          (least-norm correction with the pseudo-inverse of [A, -B]).
    NSFP: project onto C, then move x by A^+ (P_Q(A x + b) - (A x + b)).

Everything runs on (N, d) batches so that the sampler repairs thousands of
candidates at once. Nonconvex sets void the convergence guarantees, so
feasibility of every returned point is re-checked.
"""

import logging
from typing import List, Optional

import numpy as np
from pydantic import BaseModel, Field

from src.certifier import NsepInstance, NsfpInstance, ProblemInstance
from src.config import solver_config
from src.errors import UnsupportedProjectionError
from src.set_catalog import ConstraintSet, as_batch, as_point

logger = logging.getLogger(__name__)

# Feasibility tolerance for sampled points
SAMPLE_TOL = 1e-8


class SolveReport(BaseModel):
    point: List[float]
    residual: float
    iterations: int
    converged: bool
    history: List[float] = Field(
        default_factory=list,
        description="Alternation gap |z_k - a_k| between the two sets after each sweep",
    )


# =============================================================================
# Residuals
# =============================================================================

def _distance_batch(constraint_set: ConstraintSet, X: np.ndarray) -> np.ndarray:
    try:
        return constraint_set.distance_batch(X)
    except UnsupportedProjectionError:
        inside = constraint_set.contains_batch(X, SAMPLE_TOL)
        return np.where(inside, 0.0, np.inf)


def _split(p: ProblemInstance, U: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    n = p.x.size
    return U[:, :n], U[:, n:]


def decision_dim(p: ProblemInstance) -> int:
    return p.x.size + p.y.size if isinstance(p, NsepInstance) else p.x.size


def _residual_batch(p: ProblemInstance, U: np.ndarray) -> np.ndarray:
    if isinstance(p, NsepInstance):
        X, Y = _split(p, U)
        equality = np.linalg.norm(X @ p.A.T - Y @ p.B.T - p.c, axis=1)
        return equality + _distance_batch(p.C, X) + _distance_batch(p.Q, Y)
    return _distance_batch(p.Q, U @ p.A.T + p.b) + _distance_batch(p.C, U)


def residual_nsep(p: NsepInstance, x, y) -> float:
    """|A x - B y - c| + dist(x, C) + dist(y, Q)."""
    u = np.concatenate([as_point(x, p.x.size), as_point(y, p.y.size)])
    return float(_residual_batch(p, u.reshape(1, -1))[0])


def residual_nsfp(p: NsfpInstance, x) -> float:
    """dist(A x + b, Q) + dist(x, C)."""
    return float(_residual_batch(p, as_point(x, p.x.size).reshape(1, -1))[0])


def _set_side_residual(p: ProblemInstance, U: np.ndarray) -> np.ndarray:
    """Residual of points already projected onto C x Q (NSEP) or C (NSFP)."""
    if isinstance(p, NsepInstance):
        X, Y = _split(p, U)
        return np.linalg.norm(X @ p.A.T - Y @ p.B.T - p.c, axis=1)
    return _distance_batch(p.Q, U @ p.A.T + p.b)


def is_solution_batch(p: ProblemInstance, U, tol: float = SAMPLE_TOL) -> np.ndarray:
    """Independent membership checks, without projections."""
    U = as_batch(U, decision_dim(p))
    if isinstance(p, NsepInstance):
        X, Y = _split(p, U)
        equality = np.linalg.norm(X @ p.A.T - Y @ p.B.T - p.c, axis=1)
        return p.C.contains_batch(X, tol) & p.Q.contains_batch(Y, tol) & (equality <= tol)
    return p.C.contains_batch(U, tol) & p.Q.contains_batch(U @ p.A.T + p.b, tol)


# =============================================================================
# Alternating projections
# =============================================================================

class _Alternation:
    """One problem instance prepared for batched sweeps."""

    def __init__(self, p: ProblemInstance):
        self.p = p
        if isinstance(p, NsepInstance):
            self.M = np.hstack([p.A, -p.B])
            self.M_pinv = np.linalg.pinv(self.M)
        else:
            self.A_pinv = np.linalg.pinv(p.A)

    def project_sets(self, U: np.ndarray) -> np.ndarray:
        p = self.p
        if isinstance(p, NsepInstance):
            X, Y = _split(p, U)
            return np.hstack([p.C.project_batch(X), p.Q.project_batch(Y)])
        return p.C.project_batch(U)

    def correct(self, U: np.ndarray) -> np.ndarray:
        p = self.p
        if isinstance(p, NsepInstance):
            return U - (U @ self.M.T - p.c) @ self.M_pinv.T
        image = U @ p.A.T + p.b
        return U + (p.Q.project_batch(image) - image) @ self.A_pinv.T


def _alternate(
    p: ProblemInstance,
    start: np.ndarray,
    max_iter: int,
    tol: float,
    stall_window: Optional[int] = None,
    history: Optional[list] = None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Run alternating sweeps on every row of start.

    Returns:
        (points, iterations, converged); points lie on the set side
        (C x Q or C) of the alternation.
    """
    sweep = _Alternation(p)
    points = sweep.project_sets(start)
    residuals = _set_side_residual(p, points)
    converged = residuals <= tol
    iterations = np.zeros(start.shape[0], dtype=int)
    dropped = np.zeros(start.shape[0], dtype=bool)
    window: list[np.ndarray] = []

    for _ in range(max_iter):
        active = ~converged & ~dropped
        if not active.any():
            break
        z = sweep.correct(points[active])
        candidates = sweep.project_sets(z)
        if history is not None:
            history.append(float(np.linalg.norm(z - candidates)))
        points[active] = candidates
        residuals[active] = _set_side_residual(p, candidates)
        iterations[active] += 1
        converged |= residuals <= tol

        if stall_window:
            window.append(residuals.copy())
            if len(window) > stall_window:
                stalled = window[-1] > 0.5 * window.pop(0)
                dropped |= stalled & ~converged
    else:
        logger.debug(f"alternation stopped at the cap of {max_iter} sweeps")

    if dropped.any():
        logger.debug(f"dropped {int(dropped.sum())} stalled candidates")
    converged &= is_solution_batch(p, points, max(tol, SAMPLE_TOL))
    return points, iterations, converged


def solve_alternating(
    p: ProblemInstance,
    start=None,
    max_iter: Optional[int] = None,
    tol: Optional[float] = None,
) -> SolveReport:
    """
    Alternating projections from `start` (defaults to the reference point).

    Args:
        p: The instance; the reference point is not required to be feasible here.
        start: Decision vector, (x, y) for NSEP or x for NSFP.
        max_iter: Sweep cap, solver_config.max_iter by default.
        tol: Residual counted as converged, solver_config.tol by default.

    Returns:
        SolveReport; on a cap hit converged is False and the last point is returned.

    Raises:
        UnsupportedProjectionError: If a set cannot be projected onto.
    """
    max_iter = solver_config.max_iter if max_iter is None else max_iter
    tol = solver_config.tol if tol is None else tol
    d = decision_dim(p)
    start = p.reference if start is None else start
    start = as_point(start, d).reshape(1, -1)

    gaps: list[float] = []
    points, iterations, converged = _alternate(p, start, max_iter, tol, history=gaps)
    report = SolveReport(
        point=points[0].tolist(),
        residual=float(_residual_batch(p, points)[0]),
        iterations=int(iterations[0]),
        converged=bool(converged[0]),
        history=gaps,
    )
    logger.info(
        f"solve: converged={report.converged} residual={report.residual:.3e} "
        f"after {report.iterations} sweeps"
    )
    return report


# =============================================================================
# Sampling
# =============================================================================

def unit_ball_draws(rng: np.random.Generator, count: int, dim: int) -> np.ndarray:
    """Uniform samples of the closed unit ball in R^dim."""
    directions = rng.standard_normal((count, dim))
    norms = np.linalg.norm(directions, axis=1, keepdims=True)
    norms[norms == 0] = 1.0
    radii = rng.random((count, 1)) ** (1.0 / dim)
    return directions / norms * radii


def repair(p: ProblemInstance, candidates: np.ndarray, center: np.ndarray, radius: float) -> np.ndarray:
    """Repair candidates and keep the verified solutions inside B(center, radius), in candidate order."""
    if candidates.shape[0] == 0:
        return candidates
    points, _, converged = _alternate(
        p,
        candidates,
        solver_config.sample_max_iter,
        SAMPLE_TOL,
        stall_window=solver_config.stall_window,
    )
    inside = np.linalg.norm(points - center, axis=1) <= radius
    return points[converged & inside]


def sample_solutions(p: ProblemInstance, center, radius: float, count: int, seed: int) -> List[np.ndarray]:
    """
    Up to `count` verified solutions of p within B(center, radius).

    Uniform draws in the ball are repaired by alternating projections; the
    generator is numpy's PCG64 seeded with `seed`, so lists are reproducible.
    """
    if radius <= 0:
        raise ValueError("radius must be positive")
    d = decision_dim(p)
    center = as_point(center, d)
    if count <= 0:
        return []
    rng = np.random.Generator(np.random.PCG64(seed))
    candidates = center + radius * unit_ball_draws(rng, count, d)
    kept = repair(p, candidates, center, radius)
    logger.debug(f"sampled {kept.shape[0]} of {count} candidates within radius {radius:g}")
    return list(kept)

