"""Quadrature rules on the reference triangle and the unit interval.

The reference triangle is ``{(x, y): x, y >= 0, x + y <= 1}`` (area 1/2);
the reference edge is ``[0, 1]``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi, roots_legendre

MAX_TRIANGLE_DEGREE = 25
MAX_EDGE_DEGREE = 63


@dataclass(frozen=True)
class QuadRule:
    """Points and positive weights of a quadrature rule.

    ``points`` has shape ``(nq, dim)`` in reference coordinates and the
    weights sum to the measure of the reference domain.
    """

    points: np.ndarray
    weights: np.ndarray
    degree: int

    def __len__(self):
        return len(self.weights)

    def integrate(self, f) -> float:
        vals = f(self.points)
        return float(np.dot(self.weights, vals))


def _frozen(a) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=float)
    a.setflags(write=False)
    return a


def _symmetric_rules(degree: int) -> tuple[np.ndarray, np.ndarray] | None:
    if degree <= 1:
        return np.array([[1 / 3, 1 / 3]]), np.array([0.5])
    if degree == 2:
        pts = np.array([[1 / 6, 1 / 6], [2 / 3, 1 / 6], [1 / 6, 2 / 3]])
        return pts, np.full(3, 1 / 6)
    if degree <= 5:
        # seven-point rule of degree 5 (all weights positive)
        r = np.sqrt(15.0)
        a1, a2 = (6 - r) / 21, (6 + r) / 21
        w1, w2 = (155 - r) / 2400, (155 + r) / 2400
        pts = [[1 / 3, 1 / 3]]
        wts = [9 / 80]
        for a, w in ((a1, w1), (a2, w2)):
            pts += [[a, a], [1 - 2 * a, a], [a, 1 - 2 * a]]
            wts += [w] * 3
        return np.array(pts), np.array(wts)
    return None


def _collapsed_rule(degree: int) -> tuple[np.ndarray, np.ndarray]:
    n = (degree + 2) // 2
    # x carries the (1 - x) Jacobian of the collapse, y is plain Gauss-Legendre
    z, wz = roots_jacobi(n, 1.0, 0.0)
    t, wt = roots_legendre(n)
    a = (1 + z) / 2
    wa = wz / 4
    b = (1 + t) / 2
    wb = wt / 2
    A, B = np.meshgrid(a, b, indexing="ij")
    W = np.outer(wa, wb)
    pts = np.column_stack([A.ravel(), (B * (1 - A)).ravel()])
    return pts, W.ravel()


@lru_cache(maxsize=None)
def triangle_rule(degree: int) -> QuadRule:
    """Rule on the reference triangle exact for total degree ``degree``.

    Low degrees use fully symmetric tabulated rules; higher degrees use the
    collapsed tensor Gauss-Jacobi construction.
    """
    degree = int(degree)
    if degree < 0 or degree > MAX_TRIANGLE_DEGREE:
        raise ValueError(f"triangle rule degree must lie in [0, {MAX_TRIANGLE_DEGREE}], got {degree}")
    rule = _symmetric_rules(degree)
    if rule is None:
        rule = _collapsed_rule(degree)
    pts, wts = rule
    return QuadRule(_frozen(pts), _frozen(wts), degree)


@lru_cache(maxsize=None)
def edge_rule(degree: int) -> QuadRule:
    """Gauss-Legendre rule on [0, 1] with ``ceil((degree + 1) / 2)`` points."""
    degree = int(degree)
    if degree < 0 or degree > MAX_EDGE_DEGREE:
        raise ValueError(f"edge rule degree must lie in [0, {MAX_EDGE_DEGREE}], got {degree}")
    n = max(1, (degree + 2) // 2)
    t, w = roots_legendre(n)
    return QuadRule(_frozen(((1 + t) / 2)[:, None]), _frozen(w / 2), degree)


def monomial_integral(p: int, q: int) -> float:
    """Exact integral of x^p y^q over the reference triangle."""
    from math import factorial

    return factorial(p) * factorial(q) / factorial(p + q + 2)
