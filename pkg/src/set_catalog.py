"""
Constraint Set Catalog

Closed sets C and Q of the split problems, as pydantic models forming a
discriminated union on `type`. The same models are the problem-file schema
and the in-memory catalog.

Every set answers three questions:

- membership (`contains`, exact up to a tolerance),
- the limiting normal cone at a member point (`normal_cone`, as a Cone),
- the nearest point (`project`), for single points or (N, d) batches.

QuadraticSublevel covers nonconvex but normally regular sets such as
{x1 <= x2^2} and annuli {g1 <= |x|^2 <= g2}.
"""

import logging
from typing import Annotated, List, Literal, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, TypeAdapter, field_validator, model_validator

from src.cone_algebra import Cone, product
from src.config import tolerances
from src.errors import (
    DimensionMismatchError,
    EmptySetError,
    PointNotInSetError,
    QualificationError,
    UnsupportedProjectionError,
)
from src.lp_simplex import solve_lp

logger = logging.getLogger(__name__)


# =============================================================================
# Helpers
# =============================================================================

def as_point(x, dim: int) -> np.ndarray:
    """Flatten x to a float vector of length dim."""
    point = np.asarray(x, dtype=float).ravel()
    if point.size != dim:
        raise DimensionMismatchError(f"expected a point in R^{dim}, got length {point.size}")
    return point


def as_batch(X, dim: int) -> np.ndarray:
    batch = np.asarray(X, dtype=float)
    if batch.ndim == 1:
        batch = batch.reshape(1, -1)
    if batch.ndim != 2 or batch.shape[1] != dim:
        raise DimensionMismatchError(f"expected an (N, {dim}) batch, got shape {batch.shape}")
    return batch


def _bounds(values: List[Optional[float]], fill: float) -> np.ndarray:
    return np.array([fill if v is None else v for v in values], dtype=float)


def _is_active(residual: float, bound: float) -> bool:
    return abs(residual) <= tolerances.active * (1.0 + abs(bound))


class _SetBase(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    @property
    def dim(self) -> int:
        raise NotImplementedError

    @property
    def is_convex(self) -> bool:
        return True

    def contains_batch(self, X, tol: float) -> np.ndarray:
        raise NotImplementedError

    def project_batch(self, X) -> np.ndarray:
        raise NotImplementedError

    def _normal_cone(self, x: np.ndarray) -> Cone:
        raise NotImplementedError

    def contains(self, x, tol: Optional[float] = None) -> bool:
        tol = tolerances.membership if tol is None else tol
        return bool(self.contains_batch(as_point(x, self.dim).reshape(1, -1), tol)[0])

    def project(self, x) -> np.ndarray:
        return self.project_batch(as_point(x, self.dim).reshape(1, -1))[0]

    def distance_batch(self, X) -> np.ndarray:
        X = as_batch(X, self.dim)
        return np.linalg.norm(X - self.project_batch(X), axis=1)

    def normal_cone(self, x) -> Cone:
        """
        Limiting normal cone at a member point.

        Raises:
            PointNotInSetError: If x is not in the set.
            QualificationError: If a quadratic gradient vanishes at an active bound.
        """
        point = as_point(x, self.dim)
        if not self.contains(point):
            raise PointNotInSetError(f"{self.type} set does not contain {point.tolist()}")
        return self._normal_cone(point)


# =============================================================================
# Polyhedron
# =============================================================================

class Polyhedron(_SetBase):
    """{x : rows[i] . x <= rhs[i] for all i}."""

    type: Literal["polyhedron"] = "polyhedron"
    rows: List[List[float]]
    rhs: List[float]

    @model_validator(mode="after")
    def _check(self) -> "Polyhedron":
        if not self.rows:
            raise ValueError("polyhedron needs at least one halfspace")
        widths = {len(r) for r in self.rows}
        if len(widths) != 1 or 0 in widths:
            raise ValueError("polyhedron rows must be nonempty and of equal length")
        if len(self.rhs) != len(self.rows):
            raise ValueError(f"{len(self.rows)} rows but {len(self.rhs)} right-hand sides")
        self._check_nonempty()
        return self

    def _check_nonempty(self) -> None:
        # phase one on  A x+ - A x- + s = alpha
        A, alpha = self.matrix, self.vector
        m, d = A.shape
        system = np.hstack([A, -A, np.eye(m)])
        result = solve_lp(np.zeros(2 * d + m), system, alpha, tol=tolerances.lp_feasibility)
        if not result.feasible:
            raise EmptySetError(f"polyhedron is empty (phase-one residual {result.infeasibility:.3e})")

    @property
    def matrix(self) -> np.ndarray:
        return np.array(self.rows, dtype=float)

    @property
    def vector(self) -> np.ndarray:
        return np.array(self.rhs, dtype=float)

    @property
    def dim(self) -> int:
        return len(self.rows[0])

    def contains_batch(self, X, tol: float) -> np.ndarray:
        X = as_batch(X, self.dim)
        return np.all(X @ self.matrix.T <= self.vector + tol, axis=1)

    def _normal_cone(self, x: np.ndarray) -> Cone:
        A, alpha = self.matrix, self.vector
        residual = A @ x - alpha
        scale = np.maximum(np.abs(alpha), np.abs(A).sum(axis=1) * np.max(np.abs(x)))
        active = np.abs(residual) <= tolerances.active * (1.0 + scale)
        logger.debug(f"polyhedron active rows: {np.flatnonzero(active).tolist()}")
        return Cone.generated(G=A[active].T, dim=self.dim)

    def project_batch(self, X) -> np.ndarray:
        X = as_batch(X, self.dim)
        A, alpha = self.matrix, self.vector
        keep = np.linalg.norm(A, axis=1) > 0
        A, alpha = A[keep], alpha[keep]
        if A.shape[0] == 0:
            return X.copy()
        if A.shape[0] == 1:
            return _project_halfspace(X, A[0], alpha[0])
        return _dykstra(X, A, alpha)


def _project_halfspace(X: np.ndarray, a: np.ndarray, alpha: float) -> np.ndarray:
    excess = np.maximum(X @ a - alpha, 0.0)
    return X - np.outer(excess / (a @ a), a)


def _dykstra(X: np.ndarray, A: np.ndarray, alpha: np.ndarray) -> np.ndarray:
    """Dykstra's alternating projection onto an intersection of halfspaces, batched over rows of X."""
    max_iter, tol = tolerances.dykstra_max_iter, tolerances.dykstra_tol
    current = X.copy()
    increments = np.zeros((A.shape[0],) + X.shape)
    for iteration in range(max_iter):
        previous = current.copy()
        for i, (a, b) in enumerate(zip(A, alpha)):
            shifted = current + increments[i]
            current = _project_halfspace(shifted, a, b)
            increments[i] = shifted - current
        change = np.max(np.abs(current - previous))
        violation = np.max(current @ A.T - alpha)
        if change <= tol * (1.0 + np.max(np.abs(current))) and violation <= tol:
            logger.debug(f"Dykstra converged after {iteration + 1} sweeps")
            return current
    logger.warning(f"Dykstra stopped at the cap of {max_iter} sweeps")
    return current


# =============================================================================
# Box and Orthant
# =============================================================================

class Box(_SetBase):
    """Per-coordinate closed intervals; `null` bounds are infinite."""

    type: Literal["box"] = "box"
    lower: List[Optional[float]]
    upper: List[Optional[float]]

    @model_validator(mode="after")
    def _check(self) -> "Box":
        if not self.lower or len(self.lower) != len(self.upper):
            raise ValueError("box needs equally long, nonempty lower and upper bounds")
        if np.any(self.lo > self.hi):
            raise EmptySetError("box has a lower bound above its upper bound")
        return self

    @property
    def lo(self) -> np.ndarray:
        return _bounds(self.lower, -np.inf)

    @property
    def hi(self) -> np.ndarray:
        return _bounds(self.upper, np.inf)

    @property
    def dim(self) -> int:
        return len(self.lower)

    def contains_batch(self, X, tol: float) -> np.ndarray:
        X = as_batch(X, self.dim)
        return np.all((X >= self.lo - tol) & (X <= self.hi + tol), axis=1)

    def _normal_cone(self, x: np.ndarray) -> Cone:
        rays, lines = [], []
        for i, (lo, hi) in enumerate(zip(self.lo, self.hi)):
            at_lo = np.isfinite(lo) and _is_active(x[i] - lo, lo)
            at_hi = np.isfinite(hi) and _is_active(x[i] - hi, hi)
            axis = np.eye(self.dim)[i]
            if at_lo and at_hi:
                lines.append(axis)
            elif at_lo:
                rays.append(-axis)
            elif at_hi:
                rays.append(axis)
        return Cone.generated(
            G=np.array(rays).T if rays else None,
            L=np.array(lines).T if lines else None,
            dim=self.dim,
        )

    def project_batch(self, X) -> np.ndarray:
        return np.clip(as_batch(X, self.dim), self.lo, self.hi)


class Orthant(_SetBase):
    """The nonnegative orthant R_+^dim."""

    type: Literal["orthant"] = "orthant"
    dim_: int = Field(alias="dim", ge=1)

    model_config = ConfigDict(frozen=True, extra="forbid", populate_by_name=True)

    @property
    def dim(self) -> int:
        return self.dim_

    def contains_batch(self, X, tol: float) -> np.ndarray:
        return np.all(as_batch(X, self.dim) >= -tol, axis=1)

    def _normal_cone(self, x: np.ndarray) -> Cone:
        active = [i for i in range(self.dim) if _is_active(x[i], 0.0)]
        if not active:
            return Cone.zero(self.dim)
        return Cone.generated(G=-np.eye(self.dim)[:, active], dim=self.dim)

    def project_batch(self, X) -> np.ndarray:
        return np.maximum(as_batch(X, self.dim), 0.0)


# =============================================================================
# Singleton
# =============================================================================

class Singleton(_SetBase):
    type: Literal["singleton"] = "singleton"
    point: List[float]

    @field_validator("point")
    @classmethod
    def _nonempty(cls, point: List[float]) -> List[float]:
        if not point:
            raise ValueError("singleton point must have at least one coordinate")
        return point

    @property
    def dim(self) -> int:
        return len(self.point)

    def contains_batch(self, X, tol: float) -> np.ndarray:
        X = as_batch(X, self.dim)
        return np.max(np.abs(X - np.array(self.point)), axis=1) <= tol

    def _normal_cone(self, x: np.ndarray) -> Cone:
        return Cone.full(self.dim)

    def project_batch(self, X) -> np.ndarray:
        X = as_batch(X, self.dim)
        return np.tile(np.array(self.point, dtype=float), (X.shape[0], 1))


# =============================================================================
# Quadratic sublevel / level-band sets
# =============================================================================

# Relative slack under which a point already counts as inside for projection
_INSIDE_SLACK = 1e-12


class QuadraticSublevel(_SetBase):
    """
    {x : theta[0] <= x^T P x + q^T x + r <= theta[1]}, `null` bounds infinite.

    Examples:
        {x1 <= x2^2}:          P = [[0, 0], [0, -1]], q = [1, 0], theta = [null, 0]
        annulus 2 <= |x|^2 <= 5:  P = I, q = 0, theta = [2, 5]
    """

    type: Literal["quadratic"] = "quadratic"
    P: List[List[float]]
    q: List[float]
    r: float = 0.0
    theta: Tuple[Optional[float], Optional[float]]

    @model_validator(mode="after")
    def _check(self) -> "QuadraticSublevel":
        d = len(self.q)
        if d == 0:
            raise ValueError("quadratic set needs a nonempty q")
        P = np.array(self.P, dtype=float)
        if P.shape != (d, d):
            raise ValueError(f"P must be {d}x{d}, got shape {P.shape}")
        if not np.allclose(P, P.T, rtol=0.0, atol=1e-12 * (1.0 + np.max(np.abs(P)))):
            raise ValueError("P must be symmetric")
        if self.theta_lo > self.theta_hi:
            raise ValueError("theta must satisfy lo <= hi")
        self._check_nonempty()
        return self

    def _check_nonempty(self) -> None:
        try:
            origin = self.project(np.zeros(self.dim))
            if self.contains(origin, 1e-6 * (1.0 + np.max(np.abs(origin)))):
                return
        except UnsupportedProjectionError:
            pass
        if np.any(self._in_band(_scan_grid(self.dim))):
            return
        raise EmptySetError(f"quadratic set with theta={list(self.theta)} has no points")

    @property
    def dim(self) -> int:
        return len(self.q)

    @property
    def matrix(self) -> np.ndarray:
        P = np.array(self.P, dtype=float)
        return 0.5 * (P + P.T)

    @property
    def theta_lo(self) -> float:
        return -np.inf if self.theta[0] is None else float(self.theta[0])

    @property
    def theta_hi(self) -> float:
        return np.inf if self.theta[1] is None else float(self.theta[1])

    @property
    def is_convex(self) -> bool:
        eig = np.linalg.eigvalsh(self.matrix)
        spread = 1.0 + float(np.max(np.abs(eig)))
        if np.all(np.abs(eig) <= 1e-12 * spread):
            return True
        return self.theta[0] is None and bool(np.all(eig >= -1e-12 * spread))

    def value_batch(self, X) -> np.ndarray:
        X = as_batch(X, self.dim)
        return np.einsum("ni,ij,nj->n", X, self.matrix, X) + X @ np.array(self.q) + self.r

    def value(self, x) -> float:
        return float(self.value_batch(as_point(x, self.dim).reshape(1, -1))[0])

    def gradient(self, x) -> np.ndarray:
        return 2.0 * self.matrix @ as_point(x, self.dim) + np.array(self.q, dtype=float)

    def _in_band(self, X: np.ndarray, tol: float = 0.0) -> np.ndarray:
        values = self.value_batch(X)
        return (values >= self.theta_lo - tol) & (values <= self.theta_hi + tol)

    def contains_batch(self, X, tol: float) -> np.ndarray:
        return self._in_band(as_batch(X, self.dim), tol)

    def _normal_cone(self, x: np.ndarray) -> Cone:
        value = self.value(x)
        lo, hi = self.theta_lo, self.theta_hi
        at_lo = np.isfinite(lo) and _is_active(value - lo, lo)
        at_hi = np.isfinite(hi) and _is_active(value - hi, hi)
        if not (at_lo or at_hi):
            return Cone.zero(self.dim)

        grad = self.gradient(x)
        scale = abs(hi) if at_hi else abs(lo)
        if np.linalg.norm(grad) <= tolerances.active * (1.0 + scale):
            raise QualificationError(
                f"gradient vanishes at {x.tolist()} on an active bound; normal regularity cannot be certified"
            )
        if at_lo and at_hi:
            return Cone.line(grad)
        if at_hi:
            return Cone.ray(grad)
        return Cone.ray(-grad)

    def project_batch(self, X) -> np.ndarray:
        """
        Nearest points, batched.

        Points above theta_hi land on the level set f = theta_hi, points below
        theta_lo on f = theta_lo; points inside are returned unchanged.

        Raises:
            UnsupportedProjectionError: If a target level set is empty.
        """
        X = as_batch(X, self.dim)
        out = X.copy()
        values = self.value_batch(X)
        for bound, mask in (
            (self.theta_hi, values > self.theta_hi + _INSIDE_SLACK * (1.0 + abs(self.theta_hi))),
            (self.theta_lo, values < self.theta_lo - _INSIDE_SLACK * (1.0 + abs(self.theta_lo))),
        ):
            if np.isfinite(bound) and mask.any():
                out[mask] = self._project_to_level(X[mask], values[mask], bound)
        return out

    def _project_to_level(self, X: np.ndarray, values: np.ndarray, level: float) -> np.ndarray:
        P, q = self.matrix, np.array(self.q, dtype=float)
        alpha = P[0, 0]
        if alpha != 0.0 and np.array_equal(P, alpha * np.eye(self.dim)):
            return self._project_to_sphere(X, alpha, q, level)
        return _secular_projection(X, values, P, q, self.r, level)

    def _project_to_sphere(self, X: np.ndarray, alpha: float, q: np.ndarray, level: float) -> np.ndarray:
        # f = alpha |x - c|^2 + r - alpha |c|^2
        centre = -q / (2.0 * alpha)
        radius_sq = (level - self.r) / alpha + centre @ centre
        if radius_sq < 0:
            raise UnsupportedProjectionError(f"level {level} of the quadratic is empty")
        offset = X - centre
        norms = np.linalg.norm(offset, axis=1)
        tied = norms <= _INSIDE_SLACK * (1.0 + np.linalg.norm(centre))
        direction = np.zeros_like(offset)
        direction[~tied] = offset[~tied] / norms[~tied, None]
        direction[tied, 0] = 1.0
        return centre + np.sqrt(radius_sq) * direction


def _secular_projection(
    X: np.ndarray, values: np.ndarray, P: np.ndarray, q: np.ndarray, r: float, level: float
) -> np.ndarray:
    """
    Nearest points on {f = level} for f(x) = x^T P x + q^T x + r.

    The minimiser is y(mu) = (I + 2 mu P)^-1 (x - mu q) with I + 2 mu P
    positive semidefinite; along that interval f(y(mu)) - level is monotone
    in mu, so each row is solved by bisection. Rows whose root sits at the
    pole are completed on the extreme eigenspace.
    """
    lam, V = np.linalg.eigh(P)
    # deterministic eigenvector signs: largest component positive
    V = V * np.sign(V[np.argmax(np.abs(V), axis=0), np.arange(V.shape[1])])
    spread = 1.0 + float(np.max(np.abs(lam)))
    lam = np.where(np.abs(lam) <= 1e-12 * spread, 0.0, lam)

    Xt = X @ V
    qt = q @ V
    # +1: moving down to the level (mu > 0); -1: moving up (mu < 0)
    sign = np.where(values > level, 1.0, -1.0)
    limit_down = 0.5 / -lam.min() if lam.min() < 0 else np.inf
    limit_up = 0.5 / lam.max() if lam.max() > 0 else np.inf
    pole = np.where(sign > 0, limit_down, limit_up)

    def evaluate(t: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        mu = (sign * t)[:, None]
        Y = (Xt - mu * qt) / (1.0 + 2.0 * mu * lam)
        return sign * ((Y * Y) @ lam + Y @ qt + r - level), Y

    finite = np.isfinite(pole)
    upper = np.where(finite, pole * (1.0 - 1e-10), 1.0)
    psi, _ = evaluate(upper)
    for _ in range(400):
        grow = ~finite & (psi > 0)
        if not grow.any():
            break
        upper = np.where(grow, 2.0 * upper, upper)
        psi, _ = evaluate(upper)
    if np.any(~finite & (psi > 0)):
        raise UnsupportedProjectionError(f"level {level} of the quadratic is unreachable")

    hard = finite & (psi > 0)
    a, b = np.zeros_like(upper), upper.copy()
    for _ in range(2000):
        mid = 0.5 * (a + b)
        val, _ = evaluate(mid)
        a = np.where(val > 0, mid, a)
        b = np.where(val > 0, b, mid)
        if np.all(b - a <= 4e-16 * np.maximum(b, 1e-300)):
            break
    _, Y = evaluate(0.5 * (a + b))

    for s, ext in ((1.0, lam.min()), (-1.0, lam.max())):
        rows = hard & (sign == s)
        if rows.any():
            Y[rows] = _hard_case(Xt[rows], lam, qt, r, level, ext, -0.5 / ext, spread)
    return Y @ V.T


def _hard_case(
    Xt: np.ndarray, lam: np.ndarray, qt: np.ndarray, r: float, level: float, ext: float, mu: float, spread: float
) -> np.ndarray:
    """Rows whose multiplier is the pole mu = -1 / (2 ext); free coordinates lie on a sphere of the extreme eigenspace."""
    extreme = np.abs(lam - ext) <= 1e-12 * spread
    rest = ~extreme
    Y = np.empty_like(Xt)
    Y[:, rest] = (Xt[:, rest] - mu * qt[rest]) / (1.0 + 2.0 * mu * lam[rest])
    rhs = level - r - (Y[:, rest] ** 2) @ lam[rest] - Y[:, rest] @ qt[rest]

    centre = -qt[extreme] / (2.0 * ext)
    radius = np.sqrt(np.maximum((rhs + qt[extreme] @ qt[extreme] / (4.0 * ext)) / ext, 0.0))
    offset = Xt[:, extreme] - centre
    norms = np.linalg.norm(offset, axis=1)
    direction = np.zeros_like(offset)
    apart = norms > 1e-12 * (1.0 + np.linalg.norm(centre))
    direction[apart] = offset[apart] / norms[apart, None]
    direction[~apart, 0] = 1.0
    Y[:, extreme] = centre + radius[:, None] * direction
    return Y


def _scan_grid(dim: int) -> np.ndarray:
    if dim <= 3:
        axis = np.linspace(-10.0, 10.0, 41)
        mesh = np.meshgrid(*([axis] * dim), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)
    rng = np.random.Generator(np.random.PCG64(0))
    return rng.uniform(-10.0, 10.0, size=(20_000, dim))


# =============================================================================
# Product
# =============================================================================

class ProductSet(_SetBase):
    """Cartesian product of factor sets in concatenated coordinates."""

    type: Literal["product"] = "product"
    factors: List["ConstraintSet"]

    @field_validator("factors")
    @classmethod
    def _nonempty(cls, factors: list) -> list:
        if not factors:
            raise ValueError("product needs at least one factor")
        return factors

    @property
    def dim(self) -> int:
        return sum(f.dim for f in self.factors)

    @property
    def is_convex(self) -> bool:
        return all(f.is_convex for f in self.factors)

    def split(self, X: np.ndarray) -> list[np.ndarray]:
        cuts = np.cumsum([f.dim for f in self.factors])[:-1]
        return np.split(X, cuts, axis=-1)

    def contains_batch(self, X, tol: float) -> np.ndarray:
        X = as_batch(X, self.dim)
        inside = np.ones(X.shape[0], dtype=bool)
        for factor, block in zip(self.factors, self.split(X)):
            inside &= factor.contains_batch(block, tol)
        return inside

    def _normal_cone(self, x: np.ndarray) -> Cone:
        return product(*(f._normal_cone(block) for f, block in zip(self.factors, self.split(x))))

    def project_batch(self, X) -> np.ndarray:
        X = as_batch(X, self.dim)
        return np.hstack([f.project_batch(block) for f, block in zip(self.factors, self.split(X))])


ConstraintSet = Annotated[
    Union[Polyhedron, Box, Orthant, Singleton, QuadraticSublevel, ProductSet],
    Field(discriminator="type"),
]
ProductSet.model_rebuild()

_set_adapter = TypeAdapter(ConstraintSet)


def parse_set(data: dict) -> ConstraintSet:
    """Validate a tagged set description (`{"type": "box", ...}`)."""
    return _set_adapter.validate_python(data)


# =============================================================================
# Module-level operations
# =============================================================================

def contains(constraint_set: ConstraintSet, x, tol: Optional[float] = None) -> bool:
    return constraint_set.contains(x, tol)


def normal_cone(constraint_set: ConstraintSet, x) -> Cone:
    return constraint_set.normal_cone(x)


def project(constraint_set: ConstraintSet, x) -> np.ndarray:
    return constraint_set.project(x)


def distance(constraint_set: ConstraintSet, x) -> float:
    point = as_point(x, constraint_set.dim)
    return float(np.linalg.norm(point - constraint_set.project(point)))
