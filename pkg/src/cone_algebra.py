"""
Polyhedral Cone Algebra

Cones are kept in implicit-generated form

    K = { z in R^d : E z = G lam + L mu,  lam >= 0,  mu free }

which is closed under every operation the regularity conditions need:
negation, preimage under a transposed matrix, products and intersections
are pure matrix composition. Triviality and membership are decided by
linear feasibility problems solved with the two-phase simplex in
`src.lp_simplex`.
"""

import logging
from typing import List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator

from src.config import tolerances
from src.errors import DimensionMismatchError, LPNumericalError
from src.lp_simplex import LPStatus, solve_lp

logger = logging.getLogger(__name__)


# =============================================================================
# Cone type
# =============================================================================

class Cone(BaseModel):
    """A closed polyhedral cone {z : E z = G lam + L mu, lam >= 0}."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    ambient_dim: int
    E: np.ndarray
    G: np.ndarray
    L: np.ndarray

    @model_validator(mode="after")
    def _check_shapes(self) -> "Cone":
        if self.ambient_dim < 1:
            raise ValueError("ambient_dim must be at least 1")
        if self.E.ndim != 2 or self.G.ndim != 2 or self.L.ndim != 2:
            raise ValueError("E, G and L must be 2-D arrays")
        rows = self.E.shape[0]
        if self.E.shape[1] != self.ambient_dim:
            raise ValueError(f"E has {self.E.shape[1]} columns, expected {self.ambient_dim}")
        if self.G.shape[0] != rows or self.L.shape[0] != rows:
            raise ValueError("E, G and L must have the same number of rows")
        return self

    # ------------------------------------------------------------------
    # Constructors (base form: E = identity)
    # ------------------------------------------------------------------

    @classmethod
    def generated(
        cls, G: Optional[np.ndarray] = None, L: Optional[np.ndarray] = None, dim: Optional[int] = None
    ) -> "Cone":
        """Cone spanned by the columns of G (nonnegatively) and L (freely)."""
        if dim is None:
            for block in (G, L):
                if block is not None and np.asarray(block).size:
                    dim = np.asarray(block).shape[0]
                    break
        if dim is None:
            raise ValueError("dimension cannot be inferred from empty generators")
        G = np.zeros((dim, 0)) if G is None else np.asarray(G, dtype=float).reshape(dim, -1)
        L = np.zeros((dim, 0)) if L is None else np.asarray(L, dtype=float).reshape(dim, -1)
        return cls(ambient_dim=dim, E=np.eye(dim), G=G, L=L)

    @classmethod
    def zero(cls, dim: int) -> "Cone":
        return cls.generated(dim=dim)

    @classmethod
    def full(cls, dim: int) -> "Cone":
        return cls.generated(L=np.eye(dim), dim=dim)

    @classmethod
    def ray(cls, g) -> "Cone":
        g = np.asarray(g, dtype=float).ravel()
        return cls.generated(G=g.reshape(-1, 1), dim=g.size)

    @classmethod
    def line(cls, g) -> "Cone":
        g = np.asarray(g, dtype=float).ravel()
        return cls.generated(L=g.reshape(-1, 1), dim=g.size)

    @property
    def has_generators(self) -> bool:
        return bool(np.any(self.G)) or bool(np.any(self.L))


# =============================================================================
# Operations
# =============================================================================

def negate(K: Cone) -> Cone:
    """{-z : z in K}."""
    return Cone(ambient_dim=K.ambient_dim, E=K.E, G=-K.G, L=K.L)


def preimage_transpose(M, K: Cone) -> Cone:
    """
    {z in R^l : M^T z in K} for an l x n matrix M.

    Raises:
        DimensionMismatchError: If M has not K.ambient_dim columns.
    """
    M = np.array(M, dtype=float, ndmin=2)
    if M.shape[1] != K.ambient_dim:
        raise DimensionMismatchError(
            f"matrix with {M.shape[1]} columns cannot pull back a cone in R^{K.ambient_dim}"
        )
    return Cone(ambient_dim=M.shape[0], E=K.E @ M.T, G=K.G, L=K.L)


def _block_diag(blocks: List[np.ndarray]) -> np.ndarray:
    rows = sum(b.shape[0] for b in blocks)
    cols = sum(b.shape[1] for b in blocks)
    out = np.zeros((rows, cols))
    r = c = 0
    for b in blocks:
        out[r:r + b.shape[0], c:c + b.shape[1]] = b
        r += b.shape[0]
        c += b.shape[1]
    return out


def intersect(K1: Cone, K2: Cone) -> Cone:
    """Stacked system representing K1 ∩ K2."""
    if K1.ambient_dim != K2.ambient_dim:
        raise DimensionMismatchError(
            f"cannot intersect cones in R^{K1.ambient_dim} and R^{K2.ambient_dim}"
        )
    return Cone(
        ambient_dim=K1.ambient_dim,
        E=np.vstack([K1.E, K2.E]),
        G=_block_diag([K1.G, K2.G]),
        L=_block_diag([K1.L, K2.L]),
    )


def product(*cones: Cone) -> Cone:
    """Cartesian product K1 x K2 x ... in the concatenated space."""
    if not cones:
        raise ValueError("product needs at least one factor")
    return Cone(
        ambient_dim=sum(K.ambient_dim for K in cones),
        E=_block_diag([K.E for K in cones]),
        G=_block_diag([K.G for K in cones]),
        L=_block_diag([K.L for K in cones]),
    )


def member(K: Cone, z, tol: float = 1e-9) -> bool:
    """
    True iff some lam >= 0, mu give an l1 residual |E z - G lam - L mu| <= tol.

    The l1 residual is exactly the phase-one optimum of the simplex, and it
    dominates the Euclidean residual.

    Raises:
        DimensionMismatchError: If z is not in R^{ambient_dim}.
        LPNumericalError: If the simplex fails.
    """
    z = np.asarray(z, dtype=float).ravel()
    if z.size != K.ambient_dim:
        raise DimensionMismatchError(f"vector of length {z.size} tested against a cone in R^{K.ambient_dim}")
    target = K.E @ z
    k, m = K.G.shape[1], K.L.shape[1]
    if k + m == 0:
        return float(np.abs(target).sum()) <= tol

    A = np.hstack([K.G, K.L, -K.L])
    result = solve_lp(np.zeros(k + 2 * m), A, target, tol=tolerances.lp_feasibility)
    if result.feasible:
        return True
    return result.infeasibility <= tol


def _kernel_witness(E: np.ndarray, dim: int) -> Optional[np.ndarray]:
    if E.shape[0] == 0:
        return np.eye(dim)[0]
    _, s, Vt = np.linalg.svd(E)
    s_max = s[0] if s.size else 0.0
    rank = int(np.sum(s > tolerances.rank * s_max))
    if rank == dim:
        return None
    return Vt[-1]


def is_trivial(K: Cone) -> tuple[bool, Optional[np.ndarray]]:
    """
    Decide K = {0}.

    For each coordinate i and sign s the LP {E z = G lam + L mu, lam >= 0,
    z_i = s} is solved; K is nontrivial iff one of them is feasible. The
    witness is rescaled to max-norm one and re-verified by `member`.

    Returns:
        (True, None) for the zero cone, otherwise (False, witness).

    Raises:
        LPNumericalError: If a witness fails verification.
    """
    d = K.ambient_dim

    if not K.has_generators:
        # K is the kernel of E
        witness = _kernel_witness(K.E, d)
        if witness is None:
            return True, None
        return False, _verified(K, witness)

    e, k, m = K.E.shape[0], K.G.shape[1], K.L.shape[1]
    # variables: z+ (d), z- (d), lam (k), mu+ (m), mu- (m)
    system = np.hstack([K.E, -K.E, -K.G, -K.L, K.L])
    cost = np.ones(2 * d + k + 2 * m)
    for i in range(d):
        for sign in (1.0, -1.0):
            pin = np.zeros((1, system.shape[1]))
            pin[0, i] = 1.0
            pin[0, d + i] = -1.0
            A = np.vstack([system, pin])
            b = np.concatenate([np.zeros(e), [sign]])
            result = solve_lp(cost, A, b, tol=tolerances.lp_feasibility)
            if result.status == LPStatus.INFEASIBLE:
                continue
            if result.x is None:
                raise LPNumericalError("feasible triviality LP returned no point")
            z = result.x[:d] - result.x[d:2 * d]
            logger.debug(f"cone nontrivial: coordinate {i}, sign {sign:+.0f}")
            return False, _verified(K, z)
    return True, None


def _verified(K: Cone, z: np.ndarray) -> np.ndarray:
    scale = float(np.max(np.abs(z)))
    if scale == 0.0:
        raise LPNumericalError("triviality witness vanished")
    z = z / scale
    if not member(K, z, tolerances.witness):
        raise LPNumericalError("triviality witness failed membership verification")
    return z


# =============================================================================
# Classification for reports
# =============================================================================

class ConeSummary(BaseModel):
    """Human-readable classification: ZERO, ray, line, halfline-product, FULL or general."""

    kind: str
    generators: List[List[float]] = []

    def describe(self) -> str:
        if not self.generators:
            return self.kind
        gens = ", ".join("(" + ", ".join(f"{v:g}" for v in g) + ")" for g in self.generators)
        label = "generator" if len(self.generators) == 1 else "generators"
        return f"{self.kind}, {label} {gens}"


def _explicit_generators(K: Cone) -> Optional[tuple[np.ndarray, np.ndarray]]:
    d = K.ambient_dim
    if K.E.shape != (d, d):
        return None
    if np.linalg.matrix_rank(K.E) < d:
        return None
    E_inv = np.linalg.inv(K.E)
    return E_inv @ K.G, E_inv @ K.L


def _nonzero_columns(M: np.ndarray) -> np.ndarray:
    if M.shape[1] == 0:
        return M
    keep = np.linalg.norm(M, axis=0) > tolerances.rank
    return M[:, keep]


def classify(K: Cone) -> ConeSummary:
    trivial, _ = is_trivial(K)
    if trivial:
        return ConeSummary(kind="ZERO")

    d = K.ambient_dim
    axes = np.eye(d)
    if all(member(K, s * axes[i]) for i in range(d) for s in (1.0, -1.0)):
        return ConeSummary(kind="FULL")

    explicit = _explicit_generators(K)
    if explicit is None:
        if d == 1:
            sign = 1.0 if member(K, [1.0]) else -1.0
            return ConeSummary(kind="ray", generators=[[sign]])
        return ConeSummary(kind="general")

    G = _nonzero_columns(explicit[0])
    L = _nonzero_columns(explicit[1])
    if L.shape[1]:
        if G.shape[1] == 0 and np.linalg.matrix_rank(L) == 1:
            return ConeSummary(kind="line", generators=[L[:, 0].tolist()])
        return ConeSummary(kind="general")

    units = G / np.linalg.norm(G, axis=0)
    if np.allclose(units, units[:, :1], atol=1e-9):
        return ConeSummary(kind="ray", generators=[G[:, 0].tolist()])

    on_axis = [np.count_nonzero(np.abs(col) > tolerances.rank) == 1 for col in G.T]
    axes_used = [int(np.argmax(np.abs(col))) for col in G.T]
    if all(on_axis) and len(set(axes_used)) == len(axes_used):
        return ConeSummary(kind="halfline-product", generators=G.T.tolist())
    return ConeSummary(kind="general")


class ConeRecord(BaseModel):
    """Serialisable snapshot of a cone as printed in reports."""

    kind: str
    ambient_dim: int
    generators: List[List[float]] = []
    E: List[List[float]]
    G: List[List[float]]
    L: List[List[float]]

    @classmethod
    def from_cone(cls, K: Cone) -> "ConeRecord":
        summary = classify(K)
        return cls(
            kind=summary.kind,
            ambient_dim=K.ambient_dim,
            generators=summary.generators,
            E=K.E.tolist(),
            G=K.G.tolist(),
            L=K.L.tolist(),
        )

    def to_cone(self) -> Cone:
        rows = len(self.E)

        def _matrix(data: List[List[float]]) -> np.ndarray:
            if not data:
                return np.zeros((rows, 0))
            return np.array(data, dtype=float).reshape(rows, -1)

        return Cone(
            ambient_dim=self.ambient_dim,
            E=np.array(self.E, dtype=float).reshape(rows, self.ambient_dim),
            G=_matrix(self.G),
            L=_matrix(self.L),
        )

    def describe(self) -> str:
        return ConeSummary(kind=self.kind, generators=self.generators).describe()
