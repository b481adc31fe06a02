"""Lipschitz-like stability certificates for split equality and split feasibility problems.

This file makes `src` importable as a package during testing and runtime.
"""

__all__ = []
