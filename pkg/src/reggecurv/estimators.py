"""Estimator-style wrappers around the liftings.

``fit(mesh, metric)`` computes a finite element field; ``transform`` and
``predict`` sample it at physical points::

    est = CurvatureEstimator(degree=2).fit(16, "1/2*(x^2+y^2) - 1/12*(x^4+y^4)")
    est.predict([[0.5, 0.5]])
"""

from __future__ import annotations

from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .geom import connection_coefficients
from .lift import BoundaryData, lift_connection, lift_curl, lift_curvature, lift_inc
from .spaces import AnalyticMetric, build_space, evaluate_points, interpolate, regge_interpolate
from .validation import (check_degree, check_kind, check_mesh, check_metric, check_points, check_tags,
                         check_tensor)


class _FieldEstimator(TransformerMixin, BaseEstimator):
    """Shared sampling of the fitted ``field_``."""

    def _prepare(self, X, y, regge_degree: int):
        mesh = check_mesh(X)
        metric = check_metric(y, mesh)
        if isinstance(metric, AnalyticMetric):
            g = regge_interpolate(metric, build_space(mesh, "regge", regge_degree), self.quad_degree)
        else:
            g = metric
        self.mesh_ = mesh
        self.metric_field_ = g
        return mesh, metric, g

    def transform(self, X):
        """Field components at the points ``X``, shape ``(n, ncomp)``; NaN outside."""
        check_is_fitted(self, "field_")
        return evaluate_points(self.field_, check_points(X))

    def predict(self, X):
        out = self.transform(X)
        return out[:, 0] if out.shape[1] == 1 else out


class ReggeInterpolator(_FieldEstimator):
    """Canonical Regge interpolant of an analytic metric (components ``xx, xy, yy``)."""

    def __init__(self, degree: int = 1, quad_degree=None):
        self.degree = degree
        self.quad_degree = quad_degree

    def fit(self, X, y):
        k = check_degree(self.degree)
        metric = check_metric(y)
        if not isinstance(metric, AnalyticMetric):
            raise TypeError("ReggeInterpolator needs an analytic metric")
        self._prepare(X, metric, k)
        self.field_ = self.metric_field_
        return self


class CurvatureEstimator(_FieldEstimator):
    """Gauss curvature lifting of degree ``degree + 1``.

    Boundary data is taken from the analytic metric passed to ``fit`` or,
    for a discrete metric, from ``exact_metric``.
    """

    def __init__(self, degree: int = 1, dirichlet_tags=("bottom", "right"), neumann_tags=("left", "top"),
                 quad_degree=None):
        self.degree = degree
        self.dirichlet_tags = dirichlet_tags
        self.neumann_tags = neumann_tags
        self.quad_degree = quad_degree

    def fit(self, X, y, exact_metric=None):
        k = check_degree(self.degree)
        mesh, metric, g = self._prepare(X, y, k)
        dtags = check_tags(mesh, self.dirichlet_tags, "dirichlet_tags")
        ntags = check_tags(mesh, self.neumann_tags, "neumann_tags")
        exact = metric if isinstance(metric, AnalyticMetric) else exact_metric
        if exact is None:
            raise ValueError("boundary data needs an analytic metric; pass exact_metric")
        bd = BoundaryData.from_metric(check_metric(exact), dtags, ntags)
        self.functional_space_ = build_space(mesh, "lagrange", g.space.degree + 1, dtags)
        self.field_ = lift_curvature(g, self.functional_space_, bd, self.quad_degree)
        return self


class ConnectionEstimator(_FieldEstimator):
    """Connection 1-form lifting into BDM or RT.

    ``boundary`` selects the normal traces on the boundary: ``"exact"``
    (from the analytic metric), ``"zero"`` or ``"natural"`` (unconstrained).
    """

    def __init__(self, degree: int = 1, space: str = "bdm", boundary: str = "exact", quad_degree=None):
        self.degree = degree
        self.space = space
        self.boundary = boundary
        self.quad_degree = quad_degree

    def fit(self, X, y):
        k = check_degree(self.degree)
        kind = check_kind(self.space, ("bdm", "rt"))
        if self.boundary not in ("exact", "zero", "natural"):
            raise ValueError(f"unknown boundary mode {self.boundary!r}")
        mesh, metric, g = self._prepare(X, y, k)
        W = build_space(mesh, kind, k, () if self.boundary == "natural" else "all")
        values = None
        if self.boundary == "exact":
            if not isinstance(metric, AnalyticMetric):
                raise ValueError("exact boundary traces need an analytic metric")
            values = interpolate(W, lambda xy: connection_coefficients(metric.jet_at(xy, 1))).coeffs
        self.field_ = lift_connection(g, W, self.quad_degree, values)
        return self


class CovariantCurlEstimator(_FieldEstimator):
    """Lifted covariant curl of the Regge interpolant of ``sigma`` into BDM(degree)."""

    def __init__(self, degree: int = 1, sigma=("0", "0", "0"), quad_degree=None):
        self.degree = degree
        self.sigma = sigma
        self.quad_degree = quad_degree

    def fit(self, X, y):
        k = check_degree(self.degree)
        sig = check_tensor(self.sigma)
        mesh, _, g = self._prepare(X, y, k)
        s_h = interpolate(build_space(mesh, "regge", k), sig.values_at, self.quad_degree)
        self.field_ = lift_curl(g, s_h, build_space(mesh, "bdm", k, "all"), self.quad_degree)
        return self


class IncompatibilityEstimator(_FieldEstimator):
    """Lifted covariant incompatibility of the Regge interpolant of ``sigma``."""

    def __init__(self, degree: int = 1, sigma=("0", "0", "0"), path: str = "composed", quad_degree=None):
        self.degree = degree
        self.sigma = sigma
        self.path = path
        self.quad_degree = quad_degree

    def fit(self, X, y):
        k = check_degree(self.degree)
        if self.path not in ("composed", "direct"):
            raise ValueError(f"unknown assembly path {self.path!r}")
        sig = check_tensor(self.sigma)
        mesh, _, g = self._prepare(X, y, k)
        s_h = interpolate(build_space(mesh, "regge", k), sig.values_at, self.quad_degree)
        V = build_space(mesh, "lagrange", k + 1, "all")
        self.field_ = lift_inc(g, s_h, V, self.quad_degree, self.path)
        return self
