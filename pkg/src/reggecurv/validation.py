"""Input checks shared by the estimator classes and the command line."""

from __future__ import annotations

import numbers

import numpy as np

from .mesh import TriMesh, structured_unit_square
from .spaces import KINDS, AnalyticMetric, AnalyticTensor, DofVector


def check_mesh(mesh) -> TriMesh:
    """A :class:`TriMesh`, or an int ``n`` for the structured ``n x n`` unit square."""
    if isinstance(mesh, TriMesh):
        return mesh
    if isinstance(mesh, numbers.Integral) and not isinstance(mesh, bool):
        if mesh < 1:
            raise ValueError(f"mesh size must be positive, got {mesh}")
        return structured_unit_square(int(mesh))
    raise TypeError(f"expected a TriMesh or a grid size, got {type(mesh).__name__}")


def check_degree(k, minimum: int = 0, name: str = "degree") -> int:
    if isinstance(k, bool) or not isinstance(k, numbers.Integral):
        raise TypeError(f"{name} must be an integer, got {k!r}")
    if k < minimum:
        raise ValueError(f"{name} must be >= {minimum}, got {k}")
    return int(k)


def check_points(points) -> np.ndarray:
    """Finite float array of shape ``(n, 2)``; a single point is promoted."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1 and pts.shape == (2,):
        pts = pts[None]
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError(f"points must have shape (n, 2), got {pts.shape}")
    if not np.all(np.isfinite(pts)):
        raise ValueError("points contain NaN or infinite coordinates")
    return pts


def check_tags(mesh: TriMesh, tags, name: str = "tags") -> tuple[str, ...]:
    if isinstance(tags, str):
        tags = (tags,)
    tags = tuple(tags)
    unknown = set(tags) - mesh.tag_names()
    if unknown:
        raise ValueError(f"{name}: unknown boundary tag {sorted(unknown)[0]!r}; "
                         f"the mesh has {sorted(mesh.tag_names())}")
    return tags


def check_field(fe, kind: str = None, mesh: TriMesh = None) -> DofVector:
    if not isinstance(fe, DofVector):
        raise TypeError(f"expected a DofVector, got {type(fe).__name__}")
    if kind is not None and fe.space.kind != kind:
        raise ValueError(f"expected a {kind} field, got {fe.space.kind}")
    if mesh is not None and fe.space.mesh != mesh:
        raise ValueError("field lives on a different mesh")
    if not np.all(np.isfinite(fe.coeffs)):
        raise ValueError("field coefficients contain NaN or infinite values")
    return fe


def check_tensor(spec, cls=AnalyticTensor):
    """Analytic tensor from an instance or a triple of expressions."""
    if isinstance(spec, cls):
        return spec
    if isinstance(spec, (tuple, list)) and len(spec) == 3:
        return cls(*[str(e) for e in spec])
    raise TypeError(f"expected {cls.__name__} or three expressions, got {spec!r}")


def check_metric(metric, mesh: TriMesh = None):
    """An analytic metric or a Regge field.

    Accepts :class:`AnalyticMetric`, a graph expression string, three entry
    expressions, or a Regge :class:`DofVector` on ``mesh``.
    """
    if isinstance(metric, DofVector):
        return check_field(metric, "regge", mesh)
    if isinstance(metric, str):
        return AnalyticMetric.from_graph(metric)
    return check_tensor(metric, AnalyticMetric)


def check_kind(kind: str, allowed=KINDS) -> str:
    if kind not in allowed:
        raise ValueError(f"unknown space kind {kind!r}; expected one of {list(allowed)}")
    return kind
