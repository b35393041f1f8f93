"""Quadrature rules shared by the SPDO solvers."""

from __future__ import annotations

import numpy as np
from numpy.polynomial import legendre as npleg

from .errors import DomainError


def freq_grid(B: float, n: int = 64, rule: str = "gauss") -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights on (-B/2, B/2); the weights sum to ``B``.

    ``rule="riemann"`` gives the midpoint Riemann sum.
    """
    if not B > 0:
        raise DomainError(f"B must be positive, got {B}")
    if n < 2:
        raise DomainError("need at least two frequency nodes")
    if rule == "gauss":
        t, w = npleg.leggauss(n)
    elif rule == "riemann":
        t = -1.0 + (np.arange(n) + 0.5) * (2.0 / n)
        w = np.full(n, 2.0 / n)
    else:
        raise DomainError(f"unknown quadrature rule {rule!r}")
    return 0.5 * B * t, 0.5 * B * w


def chebyshev2(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss rule for the weight sqrt(1 - x^2) on (-1, 1)."""
    j = np.arange(1, n + 1)
    theta = j * np.pi / (n + 1)
    return np.cos(theta), np.pi / (n + 1) * np.sin(theta) ** 2
