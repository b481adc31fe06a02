"""Tests for the empirical Lipschitz-modulus probe."""

import numpy as np
import pytest
from pydantic import ValidationError

from src.aubin_probe import (
    GENERATOR,
    ModulusEstimate,
    ProbeLabel,
    consistency_label,
    estimate_modulus,
    parameter_norm,
)
from src.certifier import NsfpInstance, Verdict
from src.config import ProbeConfig
from src.errors import InfeasibleReferencePointError
from src.set_catalog import Box, Singleton

RADII = [1e-1, 1e-2, 1e-3]


def _estimate(blowup):
    return ModulusEstimate(
        radii=RADII, estimates=[1.0, None, blowup], sample_counts=[1, 0, 1], seed=0,
        blowup_factor=blowup, threshold=10.0,
    )


class TestVerdictSuites:
    """Probe evidence agrees with the certified verdicts."""

    def test_not_lipschitz_like_point_blows_up(self, ex51):
        estimate = estimate_modulus(ex51((1, 1)), radii=RADII, samples_per_radius=1000, seed=7)
        assert estimate.blowup_factor is not None
        assert estimate.blowup_factor >= 10
        assert consistency_label(Verdict.NOT_LIPSCHITZ_LIKE, estimate) == ProbeLabel.CONSISTENT

    def test_lipschitz_like_point_stays_bounded(self, ex52):
        estimate = estimate_modulus(ex52((1, 1), (2,)), radii=RADII, samples_per_radius=1000, seed=7)
        assert estimate.blowup_factor is not None
        assert estimate.blowup_factor <= 10
        assert consistency_label(Verdict.LIPSCHITZ_LIKE, estimate) == ProbeLabel.CONSISTENT

    def test_affine_singleton_matches_closed_form(self):
        """x(A, b) = -b / A near (1, -1) has product-norm modulus 1."""
        p = NsfpInstance(A=[[1]], b=[-1], C=Box(lower=[None], upper=[None]), Q=Singleton(point=[0]), x=[1])
        estimate = estimate_modulus(p, radii=[1e-2, 1e-3], samples_per_radius=5, seed=3)
        for value in estimate.estimates:
            assert value == pytest.approx(1.0, rel=0.2)
        assert estimate.blowup_factor == pytest.approx(1.0, rel=0.2)


class TestProbeContract:
    """Determinism, bookkeeping and errors."""

    def test_deterministic(self, ex52):
        kwargs = dict(radii=[1e-1, 1e-2], samples_per_radius=50, seed=13)
        first = estimate_modulus(ex52(), **kwargs)
        second = estimate_modulus(ex52(), **kwargs)
        assert first.estimates == second.estimates
        assert first.sample_counts == second.sample_counts
        assert first.generator == GENERATOR

    def test_threads_do_not_change_results(self, ex52):
        kwargs = dict(radii=[1e-1, 1e-2], samples_per_radius=50, seed=13)
        serial = estimate_modulus(ex52(), **kwargs)
        threaded = estimate_modulus(ex52(), config=ProbeConfig(workers=2), **kwargs)
        assert serial.estimates == threaded.estimates

    def test_zero_samples_marks_every_radius_missing(self, ex51):
        estimate = estimate_modulus(ex51(), radii=RADII, samples_per_radius=0, seed=1)
        assert estimate.estimates == [None, None, None]
        assert len(estimate.errors) == 3
        assert estimate.blowup_factor is None

    def test_radii_must_decrease(self, ex51):
        with pytest.raises(ValidationError):
            estimate_modulus(ex51(), radii=[1e-2, 1e-1], samples_per_radius=5, seed=1)

    def test_infeasible_reference(self, ex51):
        with pytest.raises(InfeasibleReferencePointError):
            estimate_modulus(ex51((2, 2)), radii=RADII, samples_per_radius=5, seed=1)

    def test_frame_has_one_row_per_radius(self, ex52):
        estimate = estimate_modulus(ex52(), radii=[1e-1, 1e-2], samples_per_radius=20, seed=2)
        frame = estimate.to_frame()
        assert list(frame.index) == [1e-1, 1e-2]
        assert {"estimate", "pairs", "oracle_samples"} <= set(frame.columns)


class TestLabels:
    """consistency_label and the parameter norm."""

    def test_labels(self):
        assert consistency_label(Verdict.NOT_LIPSCHITZ_LIKE, _estimate(50.0)) == ProbeLabel.CONSISTENT
        assert consistency_label(Verdict.NOT_LIPSCHITZ_LIKE, _estimate(2.0)) == ProbeLabel.INCONSISTENT
        assert consistency_label(Verdict.LIPSCHITZ_LIKE, _estimate(2.0)) == ProbeLabel.CONSISTENT
        assert consistency_label(Verdict.LIPSCHITZ_LIKE, _estimate(50.0)) == ProbeLabel.INCONSISTENT
        assert consistency_label(Verdict.INCONCLUSIVE, _estimate(50.0)) == ProbeLabel.INSUFFICIENT
        assert consistency_label(Verdict.LIPSCHITZ_LIKE, _estimate(None)) == ProbeLabel.INSUFFICIENT

    def test_parameter_norm(self):
        blocks = [np.array([[1.0, -3.0]]), np.array([0.5]), np.zeros(0)]
        assert parameter_norm(blocks) == pytest.approx(3.5)
