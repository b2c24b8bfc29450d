"""Distributional curvature-type functionals and their finite element liftings.

A functional is assembled as its action on every basis function of a test
space and then represented as a finite element function by one mass-matrix
solve.  The metric ``g`` and the tensor ``sigma`` may be Regge fields,
analytic tensors or differences of the two; they are only ever sampled
element by element, so discontinuities across edges are respected.

Sign conventions: triangles are traversed counterclockwise, ``tau`` is the
local counterclockwise unit tangent of an element edge and
``nu = (-tau_2, tau_1)`` the inward Euclidean normal.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np
import scipy.sparse as sps

from . import expr as ex
from .geom import (MetricError, TensorJet, check_spd, connection_coefficients, curl_g_sigma, det2,
                   edge_frame, frame, gauss_curvature,
                   geodesic_curvature_weight, inc_g_sigma, inner, interior_angle,
                   normal_tangent_component, normal_tangent_component_derivative,
                   principal_value, signed_angle, christoffel_second, EPS)
from .linalg import Factorization, assemble_local, scatter_vector, solve_spd
from .spaces import (REF_VERTICES, AnalyticMetric, DofVector, EdgeSideQuadrature,
                     ElementQuadrature, FeSpace, field_jet, interpolate)

# The edge term of the connection functional enters with this sign relative
# to the principal-value jump of the frame angle.  Chosen so that the lifted
# field converges to g(e_1, nabla e_2) and satisfies <omega, rot u> = <K, u>.
CONNECTION_EDGE_SIGN = -1.0


class BoundaryDataError(ValueError):
    pass


@dataclass
class Functional:
    """Action of a distribution on each basis function of ``space``."""

    space: FeSpace
    values: np.ndarray

    def __add__(self, other: "Functional") -> "Functional":
        return Functional(self.space, self.values + other.values)

    def __sub__(self, other: "Functional") -> "Functional":
        return Functional(self.space, self.values - other.values)

    def __mul__(self, c: float) -> "Functional":
        return Functional(self.space, c * self.values)

    __rmul__ = __mul__

    def apply(self, coeffs: np.ndarray) -> float:
        """Value of the functional on the FE function with these coefficients."""
        return float(np.dot(self.values, coeffs))

    def free_values(self) -> np.ndarray:
        """Values on the free basis functions (the stream-function basis when constrained)."""
        if self.space.constraint is not None:
            return self.space.constraint.T @ self.values
        return self.values[~self.space.essential]

    def to_dict(self) -> dict:
        return {"space": self.space.describe(), "values": self.values.tolist()}


ScalarSpec = Union[str, float, int, ex.Expr, Callable[[np.ndarray], np.ndarray], None]


def scalar_function(spec: ScalarSpec) -> Callable[[np.ndarray], np.ndarray]:
    """Turn an expression, constant or callable into ``f(xy) -> values``."""
    if callable(spec):
        return spec
    if isinstance(spec, (int, float)):
        c = float(spec)
        return lambda xy: np.full(np.shape(xy)[:-1], c)
    e = ex.as_expr(spec)
    return lambda xy: np.broadcast_to(ex.evaluate(e, xy[..., 0], xy[..., 1]), np.shape(xy)[:-1])


@dataclass
class BoundaryData:
    """Boundary data of the curvature problem.

    Parameters
    ----------
    dirichlet : dict
        Tag to the prescribed curvature values.
    neumann : dict
        Tag to the geodesic curvature of the exact metric along edges with
        that tag (counterclockwise orientation).  ``None`` computes it from
        ``metric``.
    neumann_corner_angles : dict
        ``(x, y)`` to the exact-metric interior angle of the domain at a
        boundary vertex.  Vertices not listed take the angle from ``metric``
        or, without a metric, ``pi`` at straight points.
    metric : AnalyticMetric, optional
        Exact metric, used for the length element along Neumann edges and
        for boundary angles.
    """

    dirichlet: dict = field(default_factory=dict)
    neumann: dict = field(default_factory=dict)
    neumann_corner_angles: dict = field(default_factory=dict)
    metric: Optional[AnalyticMetric] = None

    def __post_init__(self):
        common = set(self.dirichlet) & set(self.neumann)
        if common:
            raise BoundaryDataError(f"tags both Dirichlet and Neumann: {sorted(common)}")

    @classmethod
    def from_metric(cls, metric: AnalyticMetric, dirichlet_tags=(), neumann_tags=()) -> "BoundaryData":
        """Data of an exact metric: curvature on Dirichlet, geodesic curvature on Neumann tags."""
        def K(xy):
            return gauss_curvature(metric.jet_at(xy, 2))
        return cls(dirichlet={t: K for t in dirichlet_tags},
                   neumann={t: None for t in neumann_tags}, metric=metric)


def default_quad_degree(g, test_space: FeSpace) -> int:
    space = getattr(g, "space", None)
    k = space.degree if space is not None and space.kind == "regge" else test_space.degree
    return 2 * k + 6


def _side_jet(g, es: EdgeSideQuadrature, nderiv: int) -> TensorJet:
    m = es.mesh
    nt, nq = m.n_triangles, len(es.s)
    j = field_jet(g, m, es.ref_points.reshape(nt, 3 * nq, 2), nderiv)
    return j.reshape_batch((nt, 3, nq))


def _side_tabulate(space: FeSpace, es: EdgeSideQuadrature, nderiv: int = 0):
    m = es.mesh
    nt, nq = m.n_triangles, len(es.s)
    out = space.tabulate(es.ref_points.reshape(nt, 3 * nq, 2), nderiv)
    return [a.reshape((nt, 3, nq) + a.shape[2:]) for a in out]


def _corner_tangents(mesh):
    """Incoming and outgoing unit tangents at each local vertex, (nt, 3, 2)."""
    P = mesh.vertices[mesh.triangles]
    nxt = np.roll(P, -1, axis=1)
    prv = np.roll(P, 1, axis=1)
    t_in = P - prv
    t_out = nxt - P
    t_in /= np.linalg.norm(t_in, axis=-1, keepdims=True)
    t_out /= np.linalg.norm(t_out, axis=-1, keepdims=True)
    return t_in, t_out


# ================================================================ curvature

def assemble_curvature_rhs(g, V: FeSpace, bd: BoundaryData,
                           quad_degree: Optional[int] = None) -> Functional:
    """Distributional Gauss curvature minus Neumann data, tested with ``V``.

    ``V`` must be a Lagrange space; its vertex dofs are nodal values.
    """
    m = V.mesh
    if V.kind != "lagrange":
        raise ValueError("curvature test space must be Lagrange")
    qd = default_quad_degree(g, V) if quad_degree is None else quad_degree
    dir_tags = set(bd.dirichlet)
    neu_tags = set(bd.neumann)
    bedges = m.boundary_edges()
    untagged = [int(e) for e in bedges if m.edge_tags[e] not in dir_tags | neu_tags]
    if untagged:
        raise BoundaryDataError(
            f"boundary edge {untagged[0]} (tag {m.edge_tags[untagged[0]]!r}) has no Dirichlet or Neumann data")

    # element term
    eq = ElementQuadrature(m, qd)
    j = field_jet(g, m, eq.ref_points, 2)
    check_spd(j.g)
    dens = gauss_curvature(j) * np.sqrt(det2(j.g))
    phi = V.tabulate(eq.ref_points)[0][..., 0]
    local = np.einsum("eq,eqj->ej", eq.weights * dens, phi)

    # edge terms, one per element side
    es = EdgeSideQuadrature(m, qd)
    js = _side_jet(g, es, 1)
    check_spd(js.g)
    tau = np.broadcast_to(es.tangent[:, :, None, :], js.g.shape[:-1])
    weight = geodesic_curvature_weight(js, tau)
    side_tags = m.edge_tags[m.tri_edges]
    side_bdry = m.is_boundary_edge[m.tri_edges]
    active = ~(side_bdry & np.isin(side_tags, list(dir_tags)))
    weight = weight * active[:, :, None]
    for tag in neu_tags:
        sel = side_bdry & (side_tags == tag)
        if not np.any(sel):
            continue
        pts = es.points[sel]
        tsel = tau[sel]
        spec = bd.neumann[tag]
        if spec is None:
            if bd.metric is None:
                raise BoundaryDataError(f"no Neumann data and no metric for tag {tag!r}")
            data = geodesic_curvature_weight(bd.metric.jet_at(pts, 1), tsel)
        else:
            kappa = scalar_function(spec)(pts)
            if bd.metric is None:
                raise BoundaryDataError("Neumann data needs the exact metric for the length element")
            gex = bd.metric.jet_at(pts, 0).g
            data = kappa * np.sqrt(inner(gex, tsel, tsel))
        weight[sel] -= data
    phi_e = _side_tabulate(V, es)[0][..., 0]
    local += np.einsum("etq,etqj->ej", es.weights * weight, phi_e)
    F = scatter_vector(V.l2g, local, V.ndof)

    # vertex angle defects
    gv = field_jet(g, m, REF_VERTICES, 0).g
    t_in, t_out = _corner_tangents(m)
    ang_g = interior_angle(gv, t_in, t_out)
    ang_d = interior_angle(np.eye(2), t_in, t_out)
    F[:m.n_vertices] += np.bincount(m.triangles.ravel(), weights=(ang_d - ang_g).ravel(),
                                    minlength=m.n_vertices)

    # Neumann vertices: replace the Euclidean boundary angle by the exact one
    for v, (e_in, e_out) in m.boundary_vertex_edges().items():
        if m.edge_tags[e_in] in dir_tags or m.edge_tags[e_out] in dir_tags:
            continue
        ti = m.boundary_edge_direction(e_in)
        to = m.boundary_edge_direction(e_out)
        eucl = float(interior_angle(np.eye(2), ti, to))
        F[v] += boundary_angle(bd, m.vertices[v], ti, to) - eucl
    return Functional(V, F)


def boundary_angle(bd: BoundaryData, point, t_in, t_out) -> float:
    """Interior angle of the domain at a boundary point, in the exact metric."""
    key = (float(point[0]), float(point[1]))
    for (x, y), angle in bd.neumann_corner_angles.items():
        if abs(x - key[0]) <= 1e-12 and abs(y - key[1]) <= 1e-12:
            return float(angle)
    eucl = float(interior_angle(np.eye(2), t_in, t_out))
    if bd.metric is not None:
        gv = bd.metric.jet_at(np.asarray(point, dtype=float)[None], 0).g[0]
        return float(interior_angle(gv, t_in, t_out))
    if abs(eucl - np.pi) < 1e-12:
        return np.pi
    raise BoundaryDataError(f"no boundary angle given for the corner at {key}")


def mass_matrix(space: FeSpace, g=None, quad_degree: Optional[int] = None):
    """Mass matrix of ``space``; weighted by sqrt(det g) when ``g`` is given."""
    m = space.mesh
    if quad_degree is None:
        quad_degree = default_quad_degree(g, space) if g is not None else 2 * space.poly_degree + 2
    eq = ElementQuadrature(m, quad_degree)
    phi = space.tabulate(eq.ref_points)[0]
    w = eq.weights
    if g is not None:
        j = field_jet(g, m, eq.ref_points, 0)
        check_spd(j.g)
        w = w * np.sqrt(det2(j.g))
    local = np.einsum("eq,eqac,eqbc->eab", w, phi, phi)
    return assemble_local(space.l2g, local, space.ndof)


def stiffness_matrix(space: FeSpace, quad_degree: Optional[int] = None):
    """Euclidean Laplace stiffness matrix of a scalar space."""
    m = space.mesh
    if quad_degree is None:
        quad_degree = max(2 * space.poly_degree - 2, 0)
    eq = ElementQuadrature(m, quad_degree)
    dphi = space.tabulate(eq.ref_points, 1)[1][:, :, :, 0, :]
    local = np.einsum("eq,eqai,eqbi->eab", eq.weights, dphi, dphi)
    return assemble_local(space.l2g, local, space.ndof)


def _dirichlet_values(V: FeSpace, bd: BoundaryData) -> tuple[np.ndarray, np.ndarray]:
    mask = np.zeros(V.ndof, dtype=bool)
    values = np.zeros(V.ndof)
    for tag, spec in bd.dirichlet.items():
        sel = V.essential_mask_for([tag])
        if not np.any(sel):
            continue
        fun = scalar_function(spec)
        interp = interpolate(V, lambda xy: np.asarray(fun(xy))[..., None], 0).coeffs
        values[sel] = interp[sel]
        mask |= sel
    return mask, values


def lift_curvature(g, V: FeSpace, bd: BoundaryData, quad_degree: Optional[int] = None,
                   functional: Optional[Functional] = None) -> DofVector:
    """Curvature approximation in ``V``: solve M_g K = F with Dirichlet data imposed."""
    F = assemble_curvature_rhs(g, V, bd, quad_degree) if functional is None else functional
    M = mass_matrix(V, g, quad_degree if quad_degree is not None else default_quad_degree(g, V))
    mask, values = _dirichlet_values(V, bd)
    return DofVector(V, solve_spd(M, F.values, mask, values))


# ================================================================ connection

def frame_angles(g, es: EdgeSideQuadrature) -> np.ndarray:
    """Angle from the oriented metric normal to e_1 on every element side.

    The normal points into the ``plus`` triangle of the edge, so both sides
    measure against the same direction.  Shape (nt, 3, nq).
    """
    m = es.mesh
    js = _side_jet(g, es, 0)
    check_spd(js.g)
    tau = np.broadcast_to(es.tangent[:, :, None, :], js.g.shape[:-1])
    gn = edge_frame(js.g, tau).gn
    e, _ = frame(js)
    orient = m.tri_edge_signs[:, :, None, None].astype(float)
    return signed_angle(js.g, e[..., 0, :], orient * gn)


def connection_edge_jumps(g, es: EdgeSideQuadrature) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Principal-value frame angle jumps on interior edges.

    Returns (edges, plus-side (triangle, local edge) pairs, jumps (n, nq)).
    """
    m = es.mesh
    theta = frame_angles(g, es)
    interior = np.flatnonzero(~m.is_boundary_edge)
    tp, tm = m.edge_tris[interior, 0], m.edge_tris[interior, 1]
    lp = np.argmax(m.tri_edges[tp] == interior[:, None], axis=1)
    lm = np.argmax(m.tri_edges[tm] == interior[:, None], axis=1)
    jump = principal_value(theta[tp, lp] - theta[tm, lm])
    return interior, (tp, lp), jump


def assemble_connection_rhs(g, W: FeSpace, quad_degree: Optional[int] = None) -> Functional:
    """Distributional connection 1-form tested with an H(div) space."""
    if W.kind not in ("bdm", "rt"):
        raise ValueError("connection test space must be BDM or RT")
    m = W.mesh
    qd = default_quad_degree(g, W) if quad_degree is None else quad_degree
    eq = ElementQuadrature(m, qd)
    j = field_jet(g, m, eq.ref_points, 1)
    check_spd(j.g)
    omega = connection_coefficients(j)
    phi = W.tabulate(eq.ref_points)[0]
    local = np.einsum("eq,eqc,eqjc->ej", eq.weights, omega, phi)

    es = EdgeSideQuadrature(m, qd)
    edges, (tp, lp), jump = connection_edge_jumps(g, es)
    nu_e = m.edge_normals()[edges]
    phi_e = _side_tabulate(W, es)[0][tp, lp]  # (n, nq, nloc, 2)
    vn = np.einsum("nqjc,nc->nqj", phi_e, nu_e)
    w_e = es.weights[tp, lp]
    edge_local = CONNECTION_EDGE_SIGN * np.einsum("nq,nq,nqj->nj", w_e, jump, vn)
    F = scatter_vector(W.l2g, local, W.ndof) + scatter_vector(W.l2g[tp], edge_local, W.ndof)
    return Functional(W, F)


def _stream_function_boundary_values(W: FeSpace, values: np.ndarray) -> np.ndarray:
    """Coefficients of a divergence-free field matching the boundary dofs in ``values``.

    Boundary fluxes are integrated along the boundary into stream function
    values.  A divergence-free field carries zero net flux, so the net
    flux of the data is first removed in proportion to edge length.
    """
    m = W.mesh
    L = m.edge_lengths()
    walk = m.boundary_vertex_edges()
    start = min(walk)
    steps = []
    v = start
    while True:
        e = walk[v][1]
        lo, hi = m.edges[e]
        nxt = hi if lo == v else lo
        flux = values[W.edge_dofs([e])[0]] * L[e]
        steps.append((nxt, -flux if lo == v else flux, L[e]))
        v = nxt
        if v == start:
            break
    mismatch = sum(s[1] for s in steps)
    perimeter = sum(s[2] for s in steps)
    psi = np.zeros(m.n_vertices)
    v, acc = start, 0.0
    for nxt, inc, length in steps[:-1]:
        acc += inc - mismatch * length / perimeter
        psi[nxt] = acc
    G = sps.csr_matrix((np.column_stack([1.0 / L, -1.0 / L]).ravel(),
                        (np.repeat(np.arange(m.n_edges), 2), m.edges.ravel())),
                       shape=(m.n_edges, m.n_vertices))
    return G @ psi


def _euclidean_mass(W: FeSpace):
    """Mass matrix of ``W`` and a factorization of its free block, computed once per space."""
    cached = getattr(W, "_mass_cache", None)
    if cached is None:
        M = mass_matrix(W)
        if W.constraint is not None:
            Z = W.constraint
            factor = Factorization((Z.T @ M @ Z).tocsc())
        else:
            free = np.flatnonzero(~W.essential)
            factor = Factorization(M[free][:, free])
        cached = W._mass_cache = (M, factor)
    return cached


def _lift_hdiv(F: Functional, essential_values: Optional[np.ndarray] = None) -> DofVector:
    W = F.space
    M, factor = _euclidean_mass(W)
    values = np.zeros(W.ndof) if essential_values is None else np.asarray(essential_values, dtype=float)
    if W.constraint is not None:
        Z = W.constraint
        xb = np.zeros(W.ndof)
        if W.essential.any() and essential_values is not None:
            xb = _stream_function_boundary_values(W, values)
        return DofVector(W, Z @ factor.solve(Z.T @ (F.values - M @ xb)) + xb)
    return DofVector(W, solve_spd(M, F.values, W.essential, values, factorization=factor))


def lift_connection(g, W: FeSpace, quad_degree: Optional[int] = None,
                    essential_values: Optional[np.ndarray] = None) -> DofVector:
    """Connection 1-form approximation: Euclidean L2 lifting into ``W``.

    ``essential_values`` prescribes the boundary normal-trace dofs on the
    essential edges of ``W`` (zero when omitted).
    """
    return _lift_hdiv(assemble_connection_rhs(g, W, quad_degree), essential_values)


def normal_trace_values(W: FeSpace, fun, quad_degree: Optional[int] = None) -> np.ndarray:
    """Canonical interpolant coefficients of a vector function (used for boundary data)."""
    return interpolate(W, fun, quad_degree).coeffs


# ============================================================== covariant curl

def _curl_form1(g, sigma, m, qd, test_elem, test_side, eq, es) -> np.ndarray:
    """Element-local values of the curl functional (first form)."""
    jg = field_jet(g, m, eq.ref_points, 1)
    jsig = field_jet(sigma, m, eq.ref_points, 1)
    check_spd(jg.g)
    c = curl_g_sigma(jg, jsig)
    local = np.einsum("eq,eqc,eqjc->ej", eq.weights, c, test_elem)

    sg = _side_jet(g, es, 0).g
    check_spd(sg)
    ss = _side_jet(sigma, es, 0).g
    tau = np.broadcast_to(es.tangent[:, :, None, :], sg.shape[:-1])
    nu = np.stack([-tau[..., 1], tau[..., 0]], axis=-1)
    gtt = inner(sg, tau, tau)
    gnt = inner(sg, nu, tau)
    snt = inner(ss, nu, tau)
    stt = inner(ss, tau, tau)
    val = (gtt * snt - gnt * stt) / (gtt * np.sqrt(det2(sg)))
    wn = np.einsum("etqjc,etqc->etqj", test_side, nu)
    local -= np.einsum("etq,etq,etqj->ej", es.weights, val, wn)
    return local


def _curl_form2(g, sigma, m, qd, test_elem, dtest_elem, test_side, eq, es) -> np.ndarray:
    """Element-local values of the curl functional (second form, tt-traces only)."""
    jg = field_jet(g, m, eq.ref_points, 1)
    jsig = field_jet(sigma, m, eq.ref_points, 0)
    check_spd(jg.g)
    G2 = christoffel_second(jg)
    trG = np.einsum("...llj->...j", G2)
    # [rot w]^{mk} = eps^{ki} d_i w^m
    rotw = np.einsum("ki,eqjmi->eqjmk", EPS, dtest_elem)
    corr = (np.einsum("kl,eql,eqjm->eqjmk", EPS, trG, test_elem)
            - np.einsum("kl,eqmli,eqji->eqjmk", EPS, G2, test_elem))
    vol = np.einsum("eqmk,eqjmk->eqj", jsig.g, rotw - corr) / np.sqrt(det2(jg.g))[..., None]
    local = np.einsum("eq,eqj->ej", eq.weights, vol)

    sg = _side_jet(g, es, 0).g
    check_spd(sg)
    ss = _side_jet(sigma, es, 0).g
    tau = np.broadcast_to(es.tangent[:, :, None, :], sg.shape[:-1])
    gtt = inner(sg, tau, tau)
    stt = inner(ss, tau, tau)
    gw = np.einsum("etqab,etqb,etqja->etqj", sg, tau, test_side)
    local += np.einsum("etq,etq,etqj->ej", es.weights, stt / (gtt * np.sqrt(det2(sg))), gw)
    return local


def assemble_curl_rhs(g, sigma, W: FeSpace, quad_degree: Optional[int] = None,
                      form: int = 1) -> Functional:
    """Distributional covariant curl of ``sigma`` tested with an H(div) space.

    ``form`` selects between the two equivalent element-wise expressions.
    """
    m = W.mesh
    qd = default_quad_degree(g, W) if quad_degree is None else quad_degree
    eq = ElementQuadrature(m, qd)
    es = EdgeSideQuadrature(m, qd)
    tab = W.tabulate(eq.ref_points, 1 if form == 2 else 0)
    side = _side_tabulate(W, es)[0]
    if form == 1:
        local = _curl_form1(g, sigma, m, qd, tab[0], side, eq, es)
    elif form == 2:
        local = _curl_form2(g, sigma, m, qd, tab[0], tab[1], side, eq, es)
    else:
        raise ValueError("form must be 1 or 2")
    return Functional(W, scatter_vector(W.l2g, local, W.ndof))


def lift_curl(g, sigma, W: FeSpace, quad_degree: Optional[int] = None) -> DofVector:
    """Covariant curl approximation: Euclidean L2 lifting into ``W``."""
    return _lift_hdiv(assemble_curl_rhs(g, sigma, W, quad_degree))


# ======================================================= covariant incompatibility

def _rot_test(dphi: np.ndarray) -> np.ndarray:
    """rot u = (d_2 u, -d_1 u) of scalar basis gradients ``[..., 1, 2]``."""
    d = dphi[..., 0, :]
    return np.stack([d[..., 1], -d[..., 0]], axis=-1)


def assemble_inc_rhs(g, sigma, V: FeSpace, quad_degree: Optional[int] = None,
                     path: str = "composed") -> Functional:
    """Distributional covariant incompatibility tested with a Lagrange space.

    ``composed`` applies the curl functional to ``rot u``; ``direct`` uses
    element, edge and vertex-jump terms.  Both agree element by element.
    """
    if V.kind != "lagrange":
        raise ValueError("incompatibility test space must be Lagrange")
    m = V.mesh
    qd = default_quad_degree(g, V) if quad_degree is None else quad_degree
    eq = ElementQuadrature(m, qd)
    es = EdgeSideQuadrature(m, qd)
    if path == "composed":
        d_elem = V.tabulate(eq.ref_points, 1)[1]
        d_side = _side_tabulate(V, es, 1)[1]
        local = _curl_form1(g, sigma, m, qd, _rot_test(d_elem), _rot_test(d_side), eq, es)
        return Functional(V, scatter_vector(V.l2g, local, V.ndof))
    if path != "direct":
        raise ValueError("path must be 'composed' or 'direct'")

    jg = field_jet(g, m, eq.ref_points, 2)
    jsig = field_jet(sigma, m, eq.ref_points, 2)
    check_spd(jg.g)
    phi = V.tabulate(eq.ref_points)[0][..., 0]
    dens = inc_g_sigma(jg, jsig) * np.sqrt(det2(jg.g))
    local = np.einsum("eq,eqj->ej", eq.weights * dens, phi)

    sg = _side_jet(g, es, 1)
    check_spd(sg.g)
    ss = _side_jet(sigma, es, 1)
    tau = np.broadcast_to(es.tangent[:, :, None, :], sg.g.shape[:-1])
    edge_val = (np.einsum("...i,...i->...", curl_g_sigma(sg, ss), tau)
                + normal_tangent_component_derivative(sg, ss, tau))
    phi_e = _side_tabulate(V, es)[0][..., 0]
    local -= np.einsum("etq,etq,etqj->ej", es.weights, edge_val, phi_e)
    F = scatter_vector(V.l2g, local, V.ndof)

    # vertex jumps: value on the outgoing edge minus value on the incoming edge
    gv = field_jet(g, m, REF_VERTICES, 0).g
    sv = field_jet(sigma, m, REF_VERTICES, 0).g
    t_in, t_out = _corner_tangents(m)
    jump = normal_tangent_component(gv, sv, t_out) - normal_tangent_component(gv, sv, t_in)
    F[:m.n_vertices] -= np.bincount(m.triangles.ravel(), weights=jump.ravel(), minlength=m.n_vertices)
    return Functional(V, F)


def lift_inc(g, sigma, V: FeSpace, quad_degree: Optional[int] = None,
             path: str = "composed") -> DofVector:
    """Incompatibility approximation: sqrt(det g)-weighted L2 lifting into ``V``."""
    F = assemble_inc_rhs(g, sigma, V, quad_degree, path)
    M = mass_matrix(V, g, quad_degree if quad_degree is not None else default_quad_degree(g, V))
    return DofVector(V, solve_spd(M, F.values, V.essential, np.zeros(V.ndof)))


# ======================================================= integral representation

class NotSPDAlongPathError(ValueError):
    def __init__(self, t: float):
        self.t = t
        super().__init__(f"interpolated metric not positive definite at t = {t}")


def verify_integral_representation(g: DofVector, V: FeSpace, t_points: int = 20,
                                   quad_degree: Optional[int] = None) -> float:
    """Mismatch between the curvature functional and the integrated linearization.

    Along ``G(t) = delta + t (g - delta)`` the curvature functional satisfies
    ``<K_g, u> = 1/2 int_0^1 -<inc_G(t) (g - delta), u> dt`` for ``u``
    vanishing on the boundary.  The t-integral uses Gauss-Legendre with
    ``t_points`` nodes; the maximum mismatch over interior basis functions
    is returned.
    """
    from scipy.special import roots_legendre

    R = g.space
    delta = interpolate(R, lambda xy: np.broadcast_to([1.0, 0.0, 1.0], xy.shape[:-1] + (3,)))
    sigma = DofVector(R, g.coeffs - delta.coeffs)
    interior = ~_boundary_dofs(V)
    bd = BoundaryData(dirichlet={t: 0.0 for t in V.mesh.tag_names() | {""}})
    z, w = roots_legendre(t_points)
    ts, ws = (1 + z) / 2, w / 2
    rhs = np.zeros(V.ndof)
    for t, wt in zip(ts, ws):
        G = DofVector(R, delta.coeffs + t * sigma.coeffs)
        try:
            F = assemble_inc_rhs(G, sigma, V, quad_degree, path="direct").values
        except MetricError as exc:
            raise NotSPDAlongPathError(float(t)) from exc
        rhs += wt * (-0.5) * F
    lhs = assemble_curvature_rhs(g, V, bd, quad_degree).values
    return float(np.max(np.abs(lhs - rhs)[interior])) if np.any(interior) else 0.0


def _boundary_dofs(V: FeSpace) -> np.ndarray:
    mask = np.zeros(V.ndof, dtype=bool)
    edges = V.mesh.boundary_edges()
    mask[V.edge_dofs(edges)] = True
    if V.kind == "lagrange":
        mask[np.flatnonzero(V.mesh.is_boundary_vertex)] = True
    return mask
