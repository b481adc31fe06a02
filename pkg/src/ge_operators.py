"""
Generalized-Equation Operators

The split problems are rewritten as generalized equations
0 in f(w, u) + G(u) with

    NSEP:  f1(A, B, c, x, y) = (-x, -y, A x - B y - c),   G1 = C x Q x {0}
    NSFP:  f2(A, b, x)       = (-x, -A x - b),            G2 = C x Q

This module materialises the derivatives of f1 and f2 as dense matrices over
the flattened parameter-and-decision space (matrices flattened row-major,
then the vector blocks in the order above), their adjoints, rank checks, and
the coderivative membership tests of G1 and G2.
"""

import logging
from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator

from src.cone_algebra import Cone, intersect, member, negate, preimage_transpose, product
from src.config import tolerances
from src.errors import DimensionMismatchError, PointNotInSetError
from src.set_catalog import ConstraintSet, as_point

logger = logging.getLogger(__name__)


# =============================================================================
# Points
# =============================================================================

class _ArrayModel(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    @field_validator("*", mode="before")
    @classmethod
    def _to_array(cls, value, info):
        matrix = info.field_name in ("A", "B")
        return np.array(value, dtype=float, ndmin=2 if matrix else 1)


class NsepPoint(_ArrayModel):
    """Parameters w = (A, B, c) and decision u = (x, y) of a split equality problem."""

    A: np.ndarray
    B: np.ndarray
    c: np.ndarray
    x: np.ndarray
    y: np.ndarray

    @property
    def shape(self) -> tuple[int, int, int]:
        """(n, m, l) after checking that all blocks agree."""
        l, n = self.A.shape
        if self.B.shape[0] != l or self.c.shape != (l,):
            raise DimensionMismatchError(
                f"A is {self.A.shape}, B is {self.B.shape}, c has length {self.c.size}"
            )
        m = self.B.shape[1]
        if self.x.shape != (n,) or self.y.shape != (m,):
            raise DimensionMismatchError(
                f"x has length {self.x.size} (expected {n}), y has length {self.y.size} (expected {m})"
            )
        return n, m, l

    def check(self) -> None:
        self.shape

    def flatten(self) -> np.ndarray:
        self.check()
        return np.concatenate([self.A.ravel(), self.B.ravel(), self.c, self.x, self.y])

    @classmethod
    def unflatten(cls, vector, n: int, m: int, l: int) -> "NsepPoint":
        v = np.asarray(vector, dtype=float).ravel()
        if v.size != l * n + l * m + l + n + m:
            raise DimensionMismatchError(f"vector of length {v.size} does not fit (n, m, l) = {(n, m, l)}")
        cuts = np.cumsum([l * n, l * m, l, n])
        A, B, c, x, y = np.split(v, cuts)
        return cls(A=A.reshape(l, n), B=B.reshape(l, m), c=c, x=x, y=y)


class NsfpPoint(_ArrayModel):
    """Parameters w = (A, b) and decision x of a split feasibility problem."""

    A: np.ndarray
    b: np.ndarray
    x: np.ndarray

    @property
    def shape(self) -> tuple[int, int]:
        """(n, m) after checking that all blocks agree."""
        m, n = self.A.shape
        if self.b.shape != (m,) or self.x.shape != (n,):
            raise DimensionMismatchError(
                f"A is {self.A.shape}, b has length {self.b.size}, x has length {self.x.size}"
            )
        return n, m

    def check(self) -> None:
        self.shape

    def flatten(self) -> np.ndarray:
        self.check()
        return np.concatenate([self.A.ravel(), self.b, self.x])

    @classmethod
    def unflatten(cls, vector, n: int, m: int) -> "NsfpPoint":
        v = np.asarray(vector, dtype=float).ravel()
        if v.size != m * n + m + n:
            raise DimensionMismatchError(f"vector of length {v.size} does not fit (n, m) = {(n, m)}")
        A, b, x = np.split(v, np.cumsum([m * n, m]))
        return cls(A=A.reshape(m, n), b=b, x=x)


def _numerical_rank(M: np.ndarray) -> int:
    if M.size == 0:
        return 0
    s = np.linalg.svd(M, compute_uv=False)
    return int(np.sum(s > tolerances.rank * s[0])) if s[0] > 0 else 0


def _check_increment(base_shape: tuple, delta_shape: tuple) -> None:
    if base_shape != delta_shape:
        raise DimensionMismatchError(f"increment shape {delta_shape} does not match base {base_shape}")


# =============================================================================
# f1 (NSEP)
# =============================================================================

def f1_eval(p: NsepPoint) -> np.ndarray:
    p.check()
    return np.concatenate([-p.x, -p.y, p.A @ p.x - p.B @ p.y - p.c])


def f1_derivative_matrix(base: NsepPoint) -> np.ndarray:
    """Jacobian of f1 at base, rows V = R^n x R^m x R^l, columns the flattened (A, B, c, x, y)."""
    n, m, l = base.shape
    J = np.zeros((n + m + l, l * n + l * m + l + n + m))
    # first column of the B, c, x and y blocks
    b0, c0, x0, y0 = l * n, l * n + l * m, l * n + l * m + l, l * n + l * m + l + n
    J[:n, x0:y0] = -np.eye(n)
    J[n:n + m, y0:] = -np.eye(m)
    rows = slice(n + m, n + m + l)
    J[rows, :b0] = np.kron(np.eye(l), base.x)
    J[rows, b0:c0] = -np.kron(np.eye(l), base.y)
    J[rows, c0:x0] = -np.eye(l)
    J[rows, x0:y0] = base.A
    J[rows, y0:] = -base.B
    return J


def f1_derivative_apply(base: NsepPoint, delta: NsepPoint) -> np.ndarray:
    """(-x, -y, Abar x - Bbar y + A xbar - B ybar - c) for the increment (A, B, c, x, y)."""
    _check_increment(base.shape, delta.shape)
    return f1_derivative_matrix(base) @ delta.flatten()


def f1_adjoint_apply(base: NsepPoint, v) -> NsepPoint:
    """
    Covector (w', u') with <(w', u'), (w, u)> = <v, grad f1 (w, u)>.

    For v = (x', y', z') the decision block is (-x' + Abar^T z', -y' - Bbar^T z').
    """
    n, m, l = base.shape
    v = as_point(v, n + m + l)
    return NsepPoint.unflatten(f1_derivative_matrix(base).T @ v, n, m, l)


def f1_derivative_rank(base: NsepPoint) -> int:
    return _numerical_rank(f1_derivative_matrix(base))


def f1_derivative_surjective(base: NsepPoint) -> bool:
    n, m, l = base.shape
    return f1_derivative_rank(base) == n + m + l


def f1_adjoint_injective(base: NsepPoint) -> bool:
    n, m, l = base.shape
    return _numerical_rank(f1_derivative_matrix(base).T) == n + m + l


# =============================================================================
# f2 (NSFP)
# =============================================================================

def f2_eval(p: NsfpPoint) -> np.ndarray:
    p.check()
    return np.concatenate([-p.x, -p.A @ p.x - p.b])


def f2_derivative_matrix(base: NsfpPoint) -> np.ndarray:
    """Jacobian of f2 at base, rows V = R^n x R^m, columns the flattened (A, b, x)."""
    n, m = base.shape
    J = np.zeros((n + m, m * n + m + n))
    b0, x0 = m * n, m * n + m
    J[:n, x0:] = -np.eye(n)
    J[n:, :b0] = -np.kron(np.eye(m), base.x)
    J[n:, b0:x0] = -np.eye(m)
    J[n:, x0:] = -base.A
    return J


def f2_derivative_apply(base: NsfpPoint, delta: NsfpPoint) -> np.ndarray:
    _check_increment(base.shape, delta.shape)
    return f2_derivative_matrix(base) @ delta.flatten()


def f2_adjoint_apply(base: NsfpPoint, v) -> NsfpPoint:
    """Covector of grad f2; for v = (u', v') the decision block is -u' - Abar^T v'."""
    n, m = base.shape
    v = as_point(v, n + m)
    return NsfpPoint.unflatten(f2_derivative_matrix(base).T @ v, n, m)


def f2_derivative_rank(base: NsfpPoint) -> int:
    return _numerical_rank(f2_derivative_matrix(base))


def f2_derivative_surjective(base: NsfpPoint) -> bool:
    n, m = base.shape
    return f2_derivative_rank(base) == n + m


def f2_adjoint_injective(base: NsfpPoint) -> bool:
    n, m = base.shape
    return _numerical_rank(f2_derivative_matrix(base).T) == n + m


# =============================================================================
# Coderivatives of G1 / G2
# =============================================================================

def _graph_normal_cone(vbar: np.ndarray, C: ConstraintSet, Q: ConstraintSet, zero_block: int) -> Cone:
    """N(vbar; C x Q x {0}) with a trailing zero block of the given size (possibly empty)."""
    n, m = C.dim, Q.dim
    xbar, ybar, tail = vbar[:n], vbar[n:n + m], vbar[n + m:]
    if zero_block and np.max(np.abs(tail)) > tolerances.membership:
        raise PointNotInSetError(f"last block {tail.tolist()} of the graph point is not zero")
    factors = [C.normal_cone(xbar), Q.normal_cone(ybar)]
    if zero_block:
        factors.append(Cone.full(zero_block))
    return product(*factors)


def coderivative_G1_nonempty(vbar, vprime, C: ConstraintSet, Q: ConstraintSet) -> bool:
    """
    D*G1(vbar)(v') is {(0, 0)} when -v' lies in N(xbar; C) x N(ybar; Q) x R^l and empty otherwise.

    Args:
        vbar: (xbar, ybar, 0) in C x Q x {0}.
        vprime: Multiplier in R^n x R^m x R^l.

    Returns:
        True when the coderivative value is nonempty.
    """
    vbar = np.asarray(vbar, dtype=float).ravel()
    l = vbar.size - C.dim - Q.dim
    if l < 1:
        raise DimensionMismatchError(f"graph point of length {vbar.size} leaves no room for the R^l block")
    vprime = as_point(vprime, vbar.size)
    cone = _graph_normal_cone(vbar, C, Q, l)
    return _member(cone, -vprime)


def coderivative_G2_nonempty(vbar, vprime, C: ConstraintSet, Q: ConstraintSet) -> bool:
    """D*G2(vbar)(u', v') is {(0, 0)} when u' in -N(ubar; C) and v' in -N(vbar; Q), empty otherwise."""
    vbar = as_point(vbar, C.dim + Q.dim)
    vprime = as_point(vprime, vbar.size)
    cone = _graph_normal_cone(vbar, C, Q, 0)
    return _member(cone, -vprime)


def _member(cone: Cone, z: np.ndarray) -> bool:
    return member(cone, z, tolerances.witness)


def coderivative_criterion_cone(
    base, C: ConstraintSet, Q: ConstraintSet, qpoint: Optional[np.ndarray] = None
) -> Cone:
    """
    Multipliers v' with -v' in the normal cone of the G-graph and a zero decision block of the adjoint.

    The solution map is Lipschitz-like (for a surjective derivative) exactly when
    this cone is {0}; it is the generalized-equation form of the regularity
    condition that the certifier evaluates directly.

    Args:
        base: NsepPoint or NsfpPoint at the reference point.
        qpoint: Point of Q for NSFP (Abar xbar + bbar); ignored for NSEP.
    """
    if isinstance(base, NsepPoint):
        n, m, l = base.shape
        J = f1_derivative_matrix(base)
        decision = J[:, l * n + l * m + l:]
        graph = _graph_normal_cone(np.concatenate([base.x, base.y, np.zeros(l)]), C, Q, l)
    else:
        n, m = base.shape
        J = f2_derivative_matrix(base)
        decision = J[:, m * n + m:]
        if qpoint is None:
            qpoint = base.A @ base.x + base.b
        graph = _graph_normal_cone(np.concatenate([base.x, qpoint]), C, Q, 0)
    adjoint_kernel = preimage_transpose(decision, Cone.zero(decision.shape[1]))
    return intersect(negate(graph), adjoint_kernel)
