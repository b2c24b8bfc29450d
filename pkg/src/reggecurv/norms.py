"""Error norms, the discrete H^-1 norm and convergence-rate tables."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import expr as ex
from .linalg import solve_spd
from .mesh import TriMesh
from .spaces import DofVector, ElementQuadrature, build_space

RESOLVED = "—"  # EOC placeholder when an error is already at roundoff


def error_quad_degree(k: int) -> int:
    """Quadrature degree for error integrals of a degree-k study."""
    return 2 * (k + 3) + 4


def reference_function(reference) -> Callable[[np.ndarray], np.ndarray]:
    """Physical-point evaluator ``xy -> (..., ncomp)`` from expressions or a callable."""
    if callable(reference) and not isinstance(reference, ex.Expr):
        def fun(xy):
            v = np.asarray(reference(xy), dtype=float)
            return v[..., None] if v.shape == xy.shape[:-1] else v
        return fun
    if isinstance(reference, (str, int, float, ex.Expr)):
        reference = [reference]
    parts = [ex.as_expr(r) if not isinstance(r, (int, float)) else ex.Const(float(r)) for r in reference]

    def fun(xy):
        return np.stack([np.broadcast_to(ex.evaluate(p, xy[..., 0], xy[..., 1]), xy.shape[:-1])
                         for p in parts], axis=-1)
    return fun


def field_error(fe: Optional[DofVector], reference) -> Callable[[ElementQuadrature], np.ndarray]:
    """Pointwise error ``fe - reference`` sampled at an element quadrature, (nt, nq, ncomp).

    ``fe`` may be ``None`` to measure the reference itself.
    """
    ref = reference_function(reference) if reference is not None else None

    def err(eq: ElementQuadrature) -> np.ndarray:
        val = 0.0
        if fe is not None:
            val = fe.evaluate(eq.ref_points)[0]
        if ref is not None:
            val = val - ref(eq.points)
        return np.asarray(val, dtype=float)
    return err


def l2_norm(err: Callable[[ElementQuadrature], np.ndarray], mesh: TriMesh, quad_degree: int) -> float:
    eq = ElementQuadrature(mesh, quad_degree)
    e = err(eq)
    if e.ndim == 2:
        e = e[..., None]
    return math.sqrt(max(float(np.einsum("eq,eqc,eqc->", eq.weights, e, e)), 0.0))


def l2_error(fe: DofVector, reference, quad_degree: Optional[int] = None) -> float:
    """L2 norm of ``fe - reference`` over the mesh of ``fe``."""
    if quad_degree is None:
        quad_degree = error_quad_degree(fe.space.degree)
    return l2_norm(field_error(fe, reference), fe.space.mesh, quad_degree)


def hminus1_error(err: Callable[[ElementQuadrature], np.ndarray], mesh: TriMesh, k: int,
                  quad_degree: Optional[int] = None) -> float:
    """Discrete H^-1 norm of a scalar error.

    Solves ``-Lap w = err`` with zero boundary values in Lagrange(k+3) and
    returns the full H^1 norm of ``w``.
    """
    from .lift import mass_matrix, stiffness_matrix

    if quad_degree is None:
        quad_degree = error_quad_degree(k)
    V = build_space(mesh, "lagrange", k + 3, "all")
    eq = ElementQuadrature(mesh, quad_degree)
    e = np.asarray(err(eq), dtype=float)
    if e.ndim == 3:
        e = e[..., 0]
    phi = V.tabulate(eq.ref_points)[0][..., 0]
    local = np.einsum("eq,eq,eqj->ej", eq.weights, e, phi)
    b = np.bincount(V.l2g.ravel(), weights=local.ravel(), minlength=V.ndof)
    A = stiffness_matrix(V)
    w = solve_spd(A, b, V.essential, np.zeros(V.ndof))
    M = mass_matrix(V)
    return math.sqrt(max(float(w @ (A @ w) + w @ (M @ w)), 0.0))


@dataclass
class ConvergenceRecord:
    level: int
    n: int
    h_max: float
    ndof: int
    errors: dict = field(default_factory=dict)
    eoc: dict = field(default_factory=dict)


def eoc(records: Sequence[ConvergenceRecord], floor: float = 1e-13) -> list[ConvergenceRecord]:
    """Fill ``eoc[name] = log(e_prev / e) / log(h_prev / h)``.

    The first level gets ``None``; pairs with an error at or below ``floor``
    are reported as resolved.
    """
    for i, r in enumerate(records):
        for name, e in r.errors.items():
            if i == 0:
                r.eoc[name] = None
                continue
            p = records[i - 1]
            e0 = p.errors[name]
            if e0 <= floor or e <= floor:
                r.eoc[name] = RESOLVED
            else:
                r.eoc[name] = math.log(e0 / e) / math.log(p.h_max / r.h_max)
    return list(records)


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, str):
        return v
    return f"{float(v):.17g}"


def records_to_csv(records: Sequence[ConvergenceRecord], norms: Optional[Sequence[str]] = None) -> str:
    """CSV text with columns level,n,h,ndof,<norm>...,<norm>_eoc."""
    if norms is None:
        norms = list(records[0].errors) if records else []
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["level", "n", "h", "ndof"] + list(norms) + [f"{s}_eoc" for s in norms])
    for r in records:
        w.writerow([r.level, r.n, _fmt(r.h_max), r.ndof] + [_fmt(r.errors[s]) for s in norms]
                   + [_fmt(r.eoc.get(s)) for s in norms])
    return buf.getvalue()


def write_csv(path, records: Sequence[ConvergenceRecord], norms: Optional[Sequence[str]] = None) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(records_to_csv(records, norms))


def last_rates(records: Sequence[ConvergenceRecord], name: str, count: int = 3) -> list[float]:
    """EOC values of the last ``count`` levels (numeric ones only)."""
    vals = [r.eoc.get(name) for r in records[-count:]]
    return [float(v) for v in vals if isinstance(v, (int, float))]
