"""
Problem File Schema

One JSON file describes one instance and one reference point:

    {
      "version": 1,
      "kind": "nsfp",
      "A": [[1, -2]],
      "b": [1],
      "C": {"type": "quadratic", "P": [[0, 0], [0, -1]], "q": [1, 0], "r": 0, "theta": [null, 0]},
      "Q": {"type": "orthant", "dim": 1},
      "point": {"x": [1, 1]}
    }

NSEP files carry "B", "c" and "point": {"x": [...], "y": [...]} instead of "b".
Infinite bounds are written null (Infinity is accepted too).
"""

import json
import logging
from pathlib import Path
from typing import List, Literal, Optional

from pydantic import BaseModel, ConfigDict, ValidationError, model_validator

from src.certifier import NsepInstance, NsfpInstance, ProblemInstance, check_feasible
from src.errors import ProblemSchemaError
from src.set_catalog import ConstraintSet

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1


class ReferencePoint(BaseModel):
    model_config = ConfigDict(extra="forbid")

    x: List[float]
    y: Optional[List[float]] = None


class ProblemFile(BaseModel):
    model_config = ConfigDict(extra="forbid")

    version: Literal[1]
    kind: Literal["nsep", "nsfp"]
    A: List[List[float]]
    B: Optional[List[List[float]]] = None
    c: Optional[List[float]] = None
    b: Optional[List[float]] = None
    C: ConstraintSet
    Q: ConstraintSet
    point: ReferencePoint

    @model_validator(mode="after")
    def _fields_for_kind(self) -> "ProblemFile":
        if self.kind == "nsep":
            missing = [name for name in ("B", "c") if getattr(self, name) is None]
            if self.point.y is None:
                missing.append("point.y")
            if missing:
                raise ValueError(f"nsep problems need {', '.join(missing)}")
            if self.b is not None:
                raise ValueError("nsep problems take c, not b")
        else:
            if self.b is None:
                raise ValueError("nsfp problems need b")
            if self.B is not None or self.c is not None or self.point.y is not None:
                raise ValueError("nsfp problems take neither B, c nor point.y")
        return self

    def to_instance(self) -> ProblemInstance:
        if self.kind == "nsep":
            return NsepInstance(
                A=self.A, B=self.B, c=self.c, C=self.C, Q=self.Q, x=self.point.x, y=self.point.y
            )
        return NsfpInstance(A=self.A, b=self.b, C=self.C, Q=self.Q, x=self.point.x)


def _format_validation_error(error: ValidationError) -> str:
    parts = []
    for item in error.errors():
        location = ".".join(str(part) for part in item["loc"]) or "<root>"
        parts.append(f"{location}: {item['msg']}")
    return "; ".join(parts)


def parse_problem(text: str) -> ProblemInstance:
    """
    Parse and validate a problem description.

    Raises:
        ProblemSchemaError: Malformed JSON (with line and column) or a schema
            violation (with the field path).
        InfeasibleReferencePointError: The reference point does not solve the
            instance; the residual is attached.
    """
    if not text.strip():
        raise ProblemSchemaError("problem file is empty")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ProblemSchemaError(f"invalid JSON at line {e.lineno}, column {e.colno}: {e.msg}") from e

    try:
        instance = ProblemFile.model_validate(data).to_instance()
    except ValidationError as e:
        raise ProblemSchemaError(_format_validation_error(e)) from e

    check_feasible(instance)
    logger.debug(f"parsed {instance.kind} instance with reference {instance.reference.tolist()}")
    return instance


def load_problem(path) -> ProblemInstance:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ProblemSchemaError(f"cannot read {path}: {e}") from e
    return parse_problem(text)
