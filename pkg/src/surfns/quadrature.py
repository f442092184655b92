"""Quadrature rules on the reference triangle {x,y >= 0, x+y <= 1}."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import roots_jacobi, roots_legendre

MAX_DEGREE = 30

__all__ = ["QuadratureRule", "triangle_rule", "MAX_DEGREE"]


@dataclass(frozen=True)
class QuadratureRule:
    points: np.ndarray  # (nq, 2) reference coordinates
    weights: np.ndarray  # (nq,), summing to the reference area 1/2
    degree: int


def triangle_rule(degree: int) -> QuadratureRule:
    """Rule exact for polynomials of total degree <= ``degree``.

    Degree 1 is the single-midpoint rule; higher degrees use a collapsed
    Gauss-Legendre x Gauss-Jacobi product (the Jacobi weight absorbs the
    collapse factor, so polynomial exactness is preserved).
    """
    if degree < 0:
        raise ValueError("quadrature degree must be nonnegative")
    if degree > MAX_DEGREE:
        raise ValueError(f"quadrature degree {degree} beyond table (max {MAX_DEGREE})")
    if degree <= 1:
        return QuadratureRule(np.array([[1.0 / 3.0, 1.0 / 3.0]]), np.array([0.5]), 1)

    n = (degree + 2) // 2  # 2n-1 >= degree
    xa, wa = roots_jacobi(n, 1.0, 0.0)  # weight (1-x) on [-1,1]
    xb, wb = roots_legendre(n)
    a = 0.5 * (xa + 1.0)
    wa = wa / 4.0  # maps weight (1-x)dx on [-1,1] to (1-a)da on [0,1]
    b = 0.5 * (xb + 1.0)
    wb = wb / 2.0

    A, B = np.meshgrid(a, b, indexing="ij")
    WA, WB = np.meshgrid(wa, wb, indexing="ij")
    x = A.ravel()
    y = (B * (1.0 - A)).ravel()
    w = (WA * WB).ravel()
    return QuadratureRule(np.column_stack([x, y]), w, 2 * n - 1)
