"""
Stability Certifier

Decides whether the solution map of a split problem is Lipschitz-like at a
reference point by evaluating the regularity condition

    NSEP:  (A^T)^-1(-N(x; C))  ∩  (B^T)^-1(N(y; Q))  = {0}
    NSFP:  (A^T)^-1(-N(x; C))  ∩  N(A x + b; Q)      = {0}

The condition is sufficient in general and necessary when the reference
point is nonzero, so a failing condition at the zero point is reported as
Inconclusive.
"""

import logging
from enum import Enum
from typing import Annotated, List, Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from src.cone_algebra import Cone, ConeRecord, intersect, is_trivial, member, negate, preimage_transpose
from src.config import Tolerances, tolerances
from src.errors import (
    DimensionMismatchError,
    InfeasibleReferencePointError,
    LPNumericalError,
    UnsupportedProjectionError,
)
from src.ge_operators import (
    NsepPoint,
    NsfpPoint,
    coderivative_criterion_cone,
    f1_adjoint_injective,
    f1_derivative_rank,
    f2_adjoint_injective,
    f2_derivative_rank,
)
from src.set_catalog import ConstraintSet

logger = logging.getLogger(__name__)


# =============================================================================
# Problem instances
# =============================================================================

class _InstanceBase(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    C: ConstraintSet
    Q: ConstraintSet

    @field_validator("A", "B", mode="before", check_fields=False)
    @classmethod
    def _matrix(cls, value):
        return np.array(value, dtype=float, ndmin=2)

    @field_validator("b", "c", "x", "y", mode="before", check_fields=False)
    @classmethod
    def _vector(cls, value):
        return np.array(value, dtype=float, ndmin=1).ravel()


class NsepInstance(_InstanceBase):
    """Find (x, y) in C x Q with A x - B y = c, with a reference solution (x, y)."""

    kind: Literal["nsep"] = "nsep"
    A: np.ndarray
    B: np.ndarray
    c: np.ndarray
    x: np.ndarray
    y: np.ndarray

    @model_validator(mode="after")
    def _check_dims(self) -> "NsepInstance":
        self.point.check()
        if self.C.dim != self.x.size or self.Q.dim != self.y.size:
            raise DimensionMismatchError(
                f"C lives in R^{self.C.dim} and Q in R^{self.Q.dim}, "
                f"but x and y have lengths {self.x.size} and {self.y.size}"
            )
        return self

    @property
    def point(self) -> NsepPoint:
        return NsepPoint(A=self.A, B=self.B, c=self.c, x=self.x, y=self.y)

    @property
    def reference(self) -> np.ndarray:
        return np.concatenate([self.x, self.y])

    @property
    def parameter_blocks(self) -> list[np.ndarray]:
        return [self.A, self.B, self.c]

    def with_parameters(self, A, B, c) -> "NsepInstance":
        return self.model_copy(update={"A": np.asarray(A), "B": np.asarray(B), "c": np.asarray(c)})

    def equality_residual(self, x, y) -> float:
        return float(np.linalg.norm(self.A @ np.asarray(x) - self.B @ np.asarray(y) - self.c))


class NsfpInstance(_InstanceBase):
    """Find x in C with A x + b in Q, with a reference solution x."""

    kind: Literal["nsfp"] = "nsfp"
    A: np.ndarray
    b: np.ndarray
    x: np.ndarray

    @model_validator(mode="after")
    def _check_dims(self) -> "NsfpInstance":
        self.point.check()
        if self.C.dim != self.x.size or self.Q.dim != self.b.size:
            raise DimensionMismatchError(
                f"C lives in R^{self.C.dim} and Q in R^{self.Q.dim}, "
                f"but x and b have lengths {self.x.size} and {self.b.size}"
            )
        return self

    @property
    def point(self) -> NsfpPoint:
        return NsfpPoint(A=self.A, b=self.b, x=self.x)

    @property
    def reference(self) -> np.ndarray:
        return self.x

    @property
    def image(self) -> np.ndarray:
        return self.A @ self.x + self.b

    @property
    def parameter_blocks(self) -> list[np.ndarray]:
        return [self.A, self.b]

    def with_parameters(self, A, b) -> "NsfpInstance":
        return self.model_copy(update={"A": np.asarray(A), "b": np.asarray(b)})


ProblemInstance = Annotated[Union[NsepInstance, NsfpInstance], Field(discriminator="kind")]


def check_feasible(p: ProblemInstance) -> None:
    """
    Raises:
        InfeasibleReferencePointError: If the reference point does not solve p.
    """
    tol = tolerances.membership
    if not p.C.contains(p.x, tol):
        raise InfeasibleReferencePointError(
            f"reference x={p.x.tolist()} is not in C", _distance_or_inf(p.C, p.x)
        )
    if isinstance(p, NsepInstance):
        if not p.Q.contains(p.y, tol):
            raise InfeasibleReferencePointError(
                f"reference y={p.y.tolist()} is not in Q", _distance_or_inf(p.Q, p.y)
            )
        residual = p.equality_residual(p.x, p.y)
        if residual > tol:
            raise InfeasibleReferencePointError(
                f"A x - B y - c has norm {residual:.3e} at the reference point", residual
            )
    else:
        if not p.Q.contains(p.image, tol):
            raise InfeasibleReferencePointError(
                f"A x + b = {p.image.tolist()} is not in Q", _distance_or_inf(p.Q, p.image)
            )


def _distance_or_inf(constraint_set: ConstraintSet, x: np.ndarray) -> float:
    try:
        return float(np.linalg.norm(x - constraint_set.project(x)))
    except UnsupportedProjectionError:
        return float("inf")


# =============================================================================
# Verdicts
# =============================================================================

class Verdict(str, Enum):
    LIPSCHITZ_LIKE = "LipschitzLike"
    NOT_LIPSCHITZ_LIKE = "NotLipschitzLike"
    INCONCLUSIVE = "Inconclusive"


class CertificateTrace(BaseModel):
    """Cones and derivative facts behind a verdict; replayable."""

    normal_cone_C: ConeRecord
    normal_cone_Q: ConeRecord
    q_point: List[float]
    c_side: ConeRecord
    q_side: ConeRecord
    intersection: ConeRecord
    criterion_cone: ConeRecord
    criterion_trivial: bool
    derivative_rank: int
    derivative_rows: int
    adjoint_injective: bool
    reference_norm: float


class StabilityVerdict(BaseModel):
    kind: Literal["nsep", "nsfp"]
    verdict: Verdict
    condition_holds: bool
    witness: Optional[List[float]] = None
    trace: CertificateTrace
    tolerances: Tolerances = Field(default_factory=lambda: tolerances)

    @model_validator(mode="after")
    def _consistent(self) -> "StabilityVerdict":
        if (self.verdict == Verdict.LIPSCHITZ_LIKE) != self.condition_holds:
            raise ValueError("verdict LipschitzLike must coincide with condition_holds")
        if self.verdict == Verdict.NOT_LIPSCHITZ_LIKE and self.witness is None:
            raise ValueError("NotLipschitzLike needs a witness")
        return self


def _decide(
    kind: str,
    nc_C: Cone,
    nc_Q: Cone,
    q_point: np.ndarray,
    q_side: Cone,
    A: np.ndarray,
    reference: np.ndarray,
    criterion: Cone,
    rank: int,
    rows: int,
    injective: bool,
) -> StabilityVerdict:
    c_side = preimage_transpose(A, negate(nc_C))
    K = intersect(c_side, q_side)
    trivial, witness = is_trivial(K)
    criterion_trivial, _ = is_trivial(criterion)
    if criterion_trivial != trivial:
        raise LPNumericalError(
            f"{kind}: regularity condition (trivial={trivial}) and coderivative criterion "
            f"(trivial={criterion_trivial}) disagree"
        )

    reference_norm = float(np.max(np.abs(reference))) if reference.size else 0.0
    if trivial:
        verdict = Verdict.LIPSCHITZ_LIKE
    elif reference_norm > tolerances.zero_point:
        verdict = Verdict.NOT_LIPSCHITZ_LIKE
    else:
        verdict = Verdict.INCONCLUSIVE
    logger.info(f"{kind}: condition {'holds' if trivial else 'fails'}, verdict {verdict.value}")

    trace = CertificateTrace(
        normal_cone_C=ConeRecord.from_cone(nc_C),
        normal_cone_Q=ConeRecord.from_cone(nc_Q),
        q_point=q_point.tolist(),
        c_side=ConeRecord.from_cone(c_side),
        q_side=ConeRecord.from_cone(q_side),
        intersection=ConeRecord.from_cone(K),
        criterion_cone=ConeRecord.from_cone(criterion),
        criterion_trivial=criterion_trivial,
        derivative_rank=rank,
        derivative_rows=rows,
        adjoint_injective=injective,
        reference_norm=reference_norm,
    )
    return StabilityVerdict(
        kind=kind,
        verdict=verdict,
        condition_holds=trivial,
        witness=None if witness is None else witness.tolist(),
        trace=trace,
    )


def certify_nsep(p: NsepInstance) -> StabilityVerdict:
    """
    Evaluate (A^T)^-1(-N(x; C)) ∩ (B^T)^-1(N(y; Q)) = {0} at the reference point.

    Raises:
        InfeasibleReferencePointError: If (x, y) does not solve the instance.
        QualificationError: If a normal cone cannot be certified.
        LPNumericalError: If the coderivative criterion disagrees with the condition.
    """
    check_feasible(p)
    nc_C = p.C.normal_cone(p.x)
    nc_Q = p.Q.normal_cone(p.y)
    n, m, l = p.point.shape
    return _decide(
        "nsep",
        nc_C,
        nc_Q,
        p.y,
        preimage_transpose(p.B, nc_Q),
        p.A,
        p.reference,
        coderivative_criterion_cone(p.point, p.C, p.Q),
        f1_derivative_rank(p.point),
        n + m + l,
        f1_adjoint_injective(p.point),
    )


def certify_nsfp(p: NsfpInstance) -> StabilityVerdict:
    """
    Evaluate (A^T)^-1(-N(x; C)) ∩ N(A x + b; Q) = {0} at the reference point.

    Raises:
        InfeasibleReferencePointError: If x does not solve the instance.
        QualificationError: If a normal cone cannot be certified.
        LPNumericalError: If the coderivative criterion disagrees with the condition.
    """
    check_feasible(p)
    image = p.image
    nc_C = p.C.normal_cone(p.x)
    nc_Q = p.Q.normal_cone(image)
    n, m = p.point.shape
    return _decide(
        "nsfp",
        nc_C,
        nc_Q,
        image,
        nc_Q,
        p.A,
        p.reference,
        coderivative_criterion_cone(p.point, p.C, p.Q, image),
        f2_derivative_rank(p.point),
        n + m,
        f2_adjoint_injective(p.point),
    )


def certify(p: ProblemInstance) -> StabilityVerdict:
    if isinstance(p, NsepInstance):
        return certify_nsep(p)
    return certify_nsfp(p)


def replay_trace(verdict: StabilityVerdict) -> bool:
    """Recompute condition_holds from the recorded intersection cone; also re-verifies the witness."""
    K = verdict.trace.intersection.to_cone()
    trivial, _ = is_trivial(K)
    if verdict.witness is not None and not member(K, verdict.witness, tolerances.witness):
        logger.warning("recorded witness is not a member of the recorded intersection cone")
    return trivial
