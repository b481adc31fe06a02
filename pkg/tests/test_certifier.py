"""Tests for the stability certifier."""

import numpy as np
import pytest
from pydantic import ValidationError

from src import certifier
from src.certifier import (
    NsepInstance,
    NsfpInstance,
    Verdict,
    certify,
    certify_nsep,
    certify_nsfp,
    replay_trace,
)
from src.cone_algebra import Cone, member
from src.errors import InfeasibleReferencePointError, LPNumericalError, QualificationError
from src.set_catalog import Box, Orthant, QuadraticSublevel, Singleton

X_HAT = [(1.0 - np.sqrt(3.0)) / 2.0, (1.0 + np.sqrt(3.0)) / 2.0]


class TestSplitFeasibilityVerdicts:
    """{x in C : A x + b in Q} at the documented reference points."""

    def test_boundary_point_is_not_lipschitz_like(self, ex51):
        result = certify_nsfp(ex51((1, 1)))
        assert result.verdict == Verdict.NOT_LIPSCHITZ_LIKE
        assert not result.condition_holds
        assert result.witness == pytest.approx([-1.0])

    def test_interior_point(self, ex51):
        assert certify_nsfp(ex51((-1, 0))).verdict == Verdict.LIPSCHITZ_LIKE

    def test_far_boundary_point(self, ex51):
        result = certify_nsfp(ex51((4, 2)))
        assert result.verdict == Verdict.LIPSCHITZ_LIKE
        assert result.witness is None

    def test_zero_reference_is_inconclusive(self, omega1, half_line):
        p = NsfpInstance(A=[[1, 0]], b=[0], C=omega1, Q=half_line, x=[0, 0])
        result = certify(p)
        assert result.verdict == Verdict.INCONCLUSIVE
        assert not result.condition_holds
        assert result.witness == pytest.approx([-1.0])

    def test_interior_image_point(self, omega1, half_line):
        """A x + b strictly inside Q gives a zero Q-cone."""
        p = NsfpInstance(A=[[1, -2]], b=[2], C=omega1, Q=half_line, x=[1, 1])
        result = certify(p)
        assert result.verdict == Verdict.LIPSCHITZ_LIKE
        assert result.trace.normal_cone_Q.kind == "ZERO"


class TestSplitEqualityVerdicts:
    """{(x, y) in C x Q : A x - B y = c}."""

    def test_annulus_at_interior_y(self, ex52):
        assert certify_nsep(ex52((1, 1), (2,))).verdict == Verdict.LIPSCHITZ_LIKE

    def test_annulus_at_hat_point(self, ex52):
        result = certify_nsep(ex52(X_HAT, (0,)))
        assert result.verdict == Verdict.LIPSCHITZ_LIKE
        assert result.trace.normal_cone_Q.kind == "ray"

    def test_parabola_with_boundary_y(self, omega1, half_line):
        p = NsepInstance(A=[[1, -2]], B=[[1]], c=[-1], C=omega1, Q=half_line, x=[1, 1], y=[0])
        result = certify(p)
        assert result.verdict == Verdict.NOT_LIPSCHITZ_LIKE
        assert result.witness == pytest.approx([-1.0])
        assert result.trace.c_side.kind == "ray"
        assert result.trace.q_side.kind == "ray"


class TestVerdictProperties:
    """Invariants of the verdict and its trace."""

    def test_rescaled_quadratic_keeps_verdicts(self, half_line):
        omega1_x2 = QuadraticSublevel(P=[[0, 0], [0, -2]], q=[2, 0], r=0, theta=(None, 0))
        annulus_x2 = QuadraticSublevel(P=[[2, 0], [0, 2]], q=[0, 0], r=0, theta=(4, 10))
        cases = [
            (NsfpInstance(A=[[1, -2]], b=[1], C=omega1_x2, Q=half_line, x=[1, 1]), Verdict.NOT_LIPSCHITZ_LIKE),
            (NsfpInstance(A=[[1, -2]], b=[1], C=omega1_x2, Q=half_line, x=[4, 2]), Verdict.LIPSCHITZ_LIKE),
            (
                NsepInstance(A=[[1, 1]], B=[[0.5]], c=[1], C=annulus_x2, Q=half_line, x=X_HAT, y=[0]),
                Verdict.LIPSCHITZ_LIKE,
            ),
        ]
        for p, expected in cases:
            assert certify(p).verdict == expected

    def test_replay_reproduces_condition(self, ex51, ex52):
        for p in (ex51((1, 1)), ex51((-1, 0)), ex52((1, 1), (2,)), ex52(X_HAT, (0,))):
            result = certify(p)
            assert replay_trace(result) == result.condition_holds
            if result.witness is not None:
                assert member(result.trace.intersection.to_cone(), result.witness, 1e-8)

    def test_criterion_cone_agrees(self, ex51, ex52):
        for p in (ex51((1, 1)), ex51((-1, 0)), ex51((4, 2)), ex52((1, 1), (2,)), ex52(X_HAT, (0,))):
            result = certify(p)
            assert result.trace.criterion_trivial == result.condition_holds
            assert result.trace.derivative_rank == result.trace.derivative_rows
            assert result.trace.adjoint_injective

    @pytest.mark.parametrize("x, expected", [((1, 1), Verdict.NOT_LIPSCHITZ_LIKE), ((-1, 0), Verdict.LIPSCHITZ_LIKE)])
    def test_equality_with_singleton_matches_feasibility(self, omega1, x, expected):
        """B = 0 and Q = {q} reduce the equality problem to {x in C : A x - c in {0}}."""
        nsep = NsepInstance(A=[[1, -2]], B=[[0]], c=[-1], C=omega1, Q=Singleton(point=[5.0]), x=list(x), y=[5])
        nsfp = NsfpInstance(A=[[1, -2]], b=[1], C=omega1, Q=Singleton(point=[0.0]), x=list(x))
        assert certify(nsep).verdict == certify(nsfp).verdict == expected

    def test_verdict_report_is_json_serialisable(self, ex51):
        dumped = certify(ex51((1, 1))).model_dump(mode="json")
        assert dumped["verdict"] == "NotLipschitzLike"
        assert dumped["trace"]["normal_cone_C"]["kind"] == "ray"


class TestErrors:
    """Invalid instances and references."""

    def test_reference_outside_q(self, ex51):
        with pytest.raises(InfeasibleReferencePointError) as info:
            certify(ex51((2, 2)))
        assert info.value.residual == pytest.approx(1.0)

    def test_reference_outside_c(self, ex51):
        with pytest.raises(InfeasibleReferencePointError):
            certify(ex51((2, 1)))

    def test_equation_violated(self, ex52):
        with pytest.raises(InfeasibleReferencePointError) as info:
            certify(ex52((1, 1), (3,)))
        assert info.value.residual == pytest.approx(0.5)

    def test_dimension_mismatch(self, omega1, half_line):
        with pytest.raises(ValidationError):
            NsfpInstance(A=[[1, -2, 0]], b=[1], C=omega1, Q=half_line, x=[1, 1, 0])

    def test_vanishing_gradient(self, half_line):
        ball = QuadraticSublevel(P=[[1, 0], [0, 1]], q=[0, 0], theta=(None, 0))
        p = NsfpInstance(A=[[1, 0]], b=[0], C=ball, Q=half_line, x=[0, 0])
        with pytest.raises(QualificationError):
            certify(p)

    def test_box_constraints_certify(self):
        p = NsfpInstance(
            A=[[1, 1]], b=[-1], C=Box(lower=[0, 0], upper=[None, None]), Q=Orthant(dim=1), x=[1, 0],
        )
        assert certify(p).verdict == Verdict.LIPSCHITZ_LIKE

    def test_criterion_disagreement_raises(self, ex52, monkeypatch):
        monkeypatch.setattr(certifier, "coderivative_criterion_cone", lambda *args: Cone.full(3))
        with pytest.raises(LPNumericalError, match="disagree"):
            certify(ex52())

    def test_nsep_derivative_facts_in_trace(self, ex52):
        trace = certify(ex52()).trace
        assert trace.derivative_rank == trace.derivative_rows == 4
        assert trace.adjoint_injective
        assert trace.criterion_trivial
