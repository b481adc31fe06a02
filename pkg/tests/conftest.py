"""Pytest configuration helpers.

This conftest ensures the project root is on `sys.path` so tests can import
the `src` package regardless of how pytest is invoked, and provides the
sets and instances shared across test modules.
"""
import os
import sys

import pytest


ROOT = os.path.abspath(os.path.join(os.path.dirname(__file__), ".."))
if ROOT not in sys.path:
    sys.path.insert(0, ROOT)

from src.certifier import NsepInstance, NsfpInstance  # noqa: E402
from src.set_catalog import Orthant, QuadraticSublevel  # noqa: E402


@pytest.fixture
def problems_dir():
    return os.path.join(ROOT, "problems")


@pytest.fixture
def omega1():
    """{x : x1 <= x2^2}."""
    return QuadraticSublevel(P=[[0, 0], [0, -1]], q=[1, 0], r=0, theta=(None, 0))


@pytest.fixture
def annulus():
    """{x : 2 <= |x|^2 <= 5}."""
    return QuadraticSublevel(P=[[1, 0], [0, 1]], q=[0, 0], r=0, theta=(2, 5))


@pytest.fixture
def half_line():
    return Orthant(dim=1)


@pytest.fixture
def ex51(omega1, half_line):
    """NSFP with A = (1 -2), b = 1, C = {x1 <= x2^2}, Q = R_+, at a chosen reference point."""

    def build(x=(1.0, 1.0)):
        return NsfpInstance(A=[[1, -2]], b=[1], C=omega1, Q=half_line, x=list(x))

    return build


@pytest.fixture
def ex52(annulus, half_line):
    """NSEP with A = (1 1), B = (1/2), c = 1, C = annulus [2, 5], Q = R_+."""

    def build(x=(1.0, 1.0), y=(2.0,)):
        return NsepInstance(A=[[1, 1]], B=[[0.5]], c=[1], C=annulus, Q=half_line, x=list(x), y=list(y))

    return build
