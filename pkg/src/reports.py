"""
Versioned JSON reports and their text renderings.

Floats are written by pydantic's JSON serializer, which emits the shortest
decimal string that parses back to the same 64-bit value, so every report
round-trips losslessly.
"""

from typing import List, Literal, Optional

from pydantic import BaseModel

from src.aubin_probe import ModulusEstimate, ProbeLabel
from src.certifier import StabilityVerdict, Verdict
from src.cone_algebra import ConeRecord
from src.feasibility import SolveReport

REPORT_VERSION = 1

EXIT_CODES = {
    Verdict.LIPSCHITZ_LIKE: 0,
    Verdict.NOT_LIPSCHITZ_LIKE: 3,
    Verdict.INCONCLUSIVE: 4,
}
EXIT_ERROR = 2
EXIT_PROBE_INCONSISTENT = 1


class _Report(BaseModel):
    report_version: int = REPORT_VERSION
    problem: str


class AnalyzeReport(_Report):
    command: Literal["analyze"] = "analyze"
    result: StabilityVerdict


class NormalConeReport(_Report):
    command: Literal["normal-cone"] = "normal-cone"
    set_name: Literal["C", "Q"]
    point: List[float]
    cone: ConeRecord


class SolveCommandReport(_Report):
    command: Literal["solve"] = "solve"
    result: SolveReport


class ProbeReport(_Report):
    command: Literal["probe"] = "probe"
    verdict: Verdict
    label: ProbeLabel
    result: ModulusEstimate


def _vector(values: List[float]) -> str:
    return "(" + ", ".join(repr(v) for v in values) + ")"


def _matrix(rows: List[List[float]]) -> str:
    if not rows or not rows[0]:
        return "[]"
    return "[" + "; ".join(", ".join(repr(v) for v in row) for row in rows) + "]"


def render_cone(record: ConeRecord, indent: str = "") -> str:
    return "\n".join([
        f"{indent}{record.describe()}",
        f"{indent}  E = {_matrix(record.E)}",
        f"{indent}  G = {_matrix(record.G)}",
        f"{indent}  L = {_matrix(record.L)}",
    ])


def render_analyze(report: AnalyzeReport) -> str:
    v = report.result
    t = v.trace
    lines = [
        "=" * 60,
        f"[ANALYZE] {report.problem} ({v.kind.upper()})",
        "=" * 60,
        f"Verdict:          {v.verdict.value}",
        f"Condition holds:  {v.condition_holds}",
    ]
    if v.witness is not None:
        lines.append(f"Witness:          {_vector(v.witness)}")
    lines += [
        f"Reference norm:   {t.reference_norm!r}",
        f"Derivative rank:  {t.derivative_rank} of {t.derivative_rows} "
        f"(adjoint injective: {t.adjoint_injective})",
        f"Coderivative criterion trivial: {t.criterion_trivial}",
        "",
        "N(x; C):",
        render_cone(t.normal_cone_C, "  "),
        f"N(q; Q) at q = {_vector(t.q_point)}:",
        render_cone(t.normal_cone_Q, "  "),
        "(A^T)^-1(-N(x; C)):",
        render_cone(t.c_side, "  "),
        "Q-side cone:",
        render_cone(t.q_side, "  "),
        "Intersection:",
        render_cone(t.intersection, "  "),
    ]
    return "\n".join(lines)


def render_normal_cone(report: NormalConeReport) -> str:
    return render_cone(report.cone)


def render_solve(report: SolveCommandReport) -> str:
    r = report.result
    return "\n".join([
        f"Point:       {_vector(r.point)}",
        f"Residual:    {r.residual!r}",
        f"Iterations:  {r.iterations}",
        f"Converged:   {r.converged}",
    ])


def render_probe(report: ProbeReport, table: Optional[str] = None) -> str:
    r = report.result
    lines = [
        f"Verdict:        {report.verdict.value}",
        f"Probe label:    {report.label.value}",
        f"Blowup factor:  {r.blowup_factor!r} (threshold {r.threshold!r}, a convention)",
        f"Seed:           {r.seed} ({r.generator})",
    ]
    if table:
        lines += ["", table]
    for error in r.errors:
        lines.append(f"[!] {error}")
    return "\n".join(lines)
