"""Finite element spaces on straight triangles.

Every local basis is a polynomial in the reference coordinates ``xi`` of
its triangle (``x = v0 + J xi``), stored as coefficients over monomials.
The coefficients are obtained on each physical triangle as the dual basis
of the degree-of-freedom functionals, by inverting a small Vandermonde
matrix.  Edge functionals are parametrized by the global edge orientation
so both neighbours of an edge evaluate the same functional; sharing the
global dof is then what makes the fields conforming.

Supported spaces

=========  ===========================  ============================
kind       local dimension              continuity
=========  ===========================  ============================
lagrange   (k+1)(k+2)/2                 full
regge      3(k+1)(k+2)/2                tangential-tangential
bdm        (k+1)(k+2)                   normal
rt         (k+1)(k+3)                   normal
=========  ===========================  ============================

``bdm`` of degree 0 is the divergence-free subspace of ``rt`` degree 0; it
is realized through a stream-function basis (see :attr:`FeSpace.constraint`).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Optional

import numpy as np
import scipy.sparse as sps
from numpy.polynomial import legendre

from . import expr as ex
from .geom import MetricError, TensorJet
from .mesh import TriMesh
from .quad import edge_rule, triangle_rule

KINDS = ("lagrange", "regge", "bdm", "rt")
REF_VERTICES = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
NCOMP = {"lagrange": 1, "regge": 3, "bdm": 2, "rt": 2}


class UnsupportedSpaceError(ValueError):
    pass


# ---------------------------------------------------------------- monomials

@lru_cache(maxsize=None)
def monomial_exponents(p: int) -> tuple[tuple[int, int], ...]:
    """Exponents (a, b) of xi1^a xi2^b with a + b <= p, by increasing degree."""
    return tuple((d - b, b) for d in range(p + 1) for b in range(d + 1))


@lru_cache(maxsize=None)
def _derivative_matrices(p: int) -> np.ndarray:
    """``D[d, a, b]``: coefficient of monomial b in d/dxi_d of monomial a."""
    exps = monomial_exponents(p)
    index = {e: i for i, e in enumerate(exps)}
    D = np.zeros((2, len(exps), len(exps)))
    for i, (a, b) in enumerate(exps):
        if a > 0:
            D[0, i, index[(a - 1, b)]] = a
        if b > 0:
            D[1, i, index[(a, b - 1)]] = b
    return D


def tabulate_monomials(pts: np.ndarray, p: int) -> np.ndarray:
    """Monomial values, shape ``pts.shape[:-1] + (n_monomials,)``."""
    exps = np.array(monomial_exponents(p))
    pts = np.asarray(pts, dtype=float)
    return pts[..., 0:1] ** exps[:, 0] * pts[..., 1:2] ** exps[:, 1]


# ----------------------------------------------------- reference geometry

def edge_ref_points(mesh: TriMesh, s: np.ndarray) -> np.ndarray:
    """Reference coordinates of global edge parameters ``s`` on each local edge.

    Returns shape (nt, 3, len(s), 2).  ``s = 0`` is the lower-index vertex of
    the edge, ``s = 1`` the higher one.
    """
    s = np.asarray(s, dtype=float)
    start_loc = REF_VERTICES[[1, 2, 0]]  # local edge i starts at local vertex i+1
    end_loc = REF_VERTICES[[2, 0, 1]]
    sign = mesh.tri_edge_signs[:, :, None, None]
    a = np.where(sign > 0, start_loc[None, :, None, :], end_loc[None, :, None, :])
    b = np.where(sign > 0, end_loc[None, :, None, :], start_loc[None, :, None, :])
    return a + s[None, None, :, None] * (b - a)


def to_physical(mesh: TriMesh, ref_pts: np.ndarray) -> np.ndarray:
    """Map reference points (shared or per element) to physical coordinates."""
    J = mesh.jacobians()
    v0 = mesh.vertices[mesh.triangles[:, 0]]
    ref_pts = np.asarray(ref_pts, dtype=float)
    if ref_pts.ndim == 2:
        return v0[:, None, :] + np.einsum("eij,qj->eqi", J, ref_pts)
    lead = ref_pts.shape[1:-1]
    flat = ref_pts.reshape(len(ref_pts), -1, 2)
    out = v0[:, None, :] + np.einsum("eij,eqj->eqi", J, flat)
    return out.reshape((len(ref_pts),) + lead + (2,))


@dataclass
class ElementQuadrature:
    """Triangle rule mapped onto every element of a mesh."""

    mesh: TriMesh
    degree: int
    ref_points: np.ndarray = field(init=False)
    weights: np.ndarray = field(init=False)  # physical weights, (nt, nq)
    points: np.ndarray = field(init=False)  # physical points, (nt, nq, 2)

    def __post_init__(self):
        rule = triangle_rule(self.degree)
        self.ref_points = rule.points
        detJ = 2.0 * self.mesh.signed_areas()
        self.weights = detJ[:, None] * rule.weights[None, :]
        self.points = to_physical(self.mesh, rule.points)


@dataclass
class EdgeSideQuadrature:
    """Edge rule on every (triangle, local edge) pair.

    Points are placed by the global edge parameter, so the two sides of an
    interior edge see the same physical points in the same order.
    """

    mesh: TriMesh
    degree: int
    s: np.ndarray = field(init=False)
    ref_points: np.ndarray = field(init=False)  # (nt, 3, nq, 2)
    points: np.ndarray = field(init=False)  # (nt, 3, nq, 2)
    weights: np.ndarray = field(init=False)  # (nt, 3, nq) times edge length
    tangent: np.ndarray = field(init=False)  # counterclockwise local unit tangent (nt, 3, 2)
    edge_weights_unit: np.ndarray = field(init=False)  # (nq,) on [0, 1]

    def __post_init__(self):
        m = self.mesh
        rule = edge_rule(self.degree)
        self.s = rule.points[:, 0]
        self.edge_weights_unit = rule.weights
        self.ref_points = edge_ref_points(m, self.s)
        self.points = to_physical(m, self.ref_points)
        lengths = m.edge_lengths()[m.tri_edges]
        self.weights = lengths[:, :, None] * rule.weights[None, None, :]
        self.tangent = m.edge_tangents()[m.tri_edges] * m.tri_edge_signs[:, :, None]


# ------------------------------------------------------------ dof layout

def _lagrange_nodes(k: int) -> np.ndarray:
    """Interior lattice nodes of degree k in reference coordinates."""
    return np.array([[i / k, j / k] for j in range(1, k) for i in range(1, k - j)
                     if i + j < k]).reshape(-1, 2)


def local_dimension(kind: str, k: int) -> int:
    if kind == "lagrange":
        return (k + 1) * (k + 2) // 2
    if kind == "regge":
        return 3 * (k + 1) * (k + 2) // 2
    if kind == "bdm":
        return (k + 1) * (k + 2) if k >= 1 else 3
    if kind == "rt":
        return (k + 1) * (k + 3)
    raise UnsupportedSpaceError(kind)


def _dofs_per_entity(kind: str, k: int) -> tuple[int, int, int]:
    """(per vertex, per edge, per triangle interior)."""
    if kind == "lagrange":
        if k == 0:
            raise UnsupportedSpaceError("lagrange requires degree >= 1")
        return 1, k - 1, (k - 1) * (k - 2) // 2
    if kind == "regge":
        return 0, k + 1, 3 * k * (k + 1) // 2
    if kind == "bdm":
        return 0, k + 1, max(k * k - 1, 0)
    if kind == "rt":
        return 0, k + 1, k * (k + 1)
    raise UnsupportedSpaceError(kind)


def _prime_degree(kind: str, k: int) -> int:
    if kind == "rt" or (kind == "bdm" and k == 0):
        return k + 1
    return k


def _prime_basis(kind: str, k: int, J: np.ndarray) -> np.ndarray:
    """Spanning set of the local polynomial space as coefficient tensors.

    Returns ``C[e, p, a, c]`` over monomials of :func:`_prime_degree`.
    """
    nt = len(J)
    P = _prime_degree(kind, k)
    exps = monomial_exponents(P)
    idx = {e: i for i, e in enumerate(exps)}
    nm = len(exps)
    low = [e for e in exps if sum(e) <= k]
    ncomp = NCOMP[kind]
    primes = []
    for e in low:
        for c in range(ncomp):
            C = np.zeros((nt, nm, ncomp))
            C[:, idx[e], c] = 1.0
            primes.append(C)
    if kind == "rt" or (kind == "bdm" and k == 0):
        top = 0 if kind == "bdm" else k
        for (a, b) in [e for e in exps if sum(e) == top]:
            # (x - v0) m(xi) with x - v0 = J xi
            C = np.zeros((nt, nm, 2))
            C[:, idx[(a + 1, b)], :] += J[:, :, 0]
            C[:, idx[(a, b + 1)], :] += J[:, :, 1]
            primes.append(C)
    return np.stack(primes, axis=1)


# --------------------------------------------------------------- spaces

class FeSpace:
    """Finite element space of one kind and degree on a mesh.

    Attributes
    ----------
    coef : ndarray, shape (nt, nloc, nmono, ncomp)
        Basis functions as polynomials in reference coordinates.
    dcoef : ndarray, shape (nt, nloc, nmono, ncomp, 2)
        Physical first partials, ``[..., i] = d/dx_i``.
    ddcoef : ndarray, shape (nt, nloc, nmono, ncomp, 2, 2)
    l2g : ndarray, shape (nt, nloc)
        Local to global dof map.
    essential : ndarray of bool, shape (ndof,)
    constraint : scipy sparse matrix or None
        Basis ``Z`` of the admissible coefficient subspace (``x = Z y``).
    """

    def __init__(self, mesh: TriMesh, kind: str, degree: int, essential_tags=(),
                 quad_degree: Optional[int] = None):
        kind = kind.lower()
        if kind not in KINDS:
            raise UnsupportedSpaceError(f"unknown space kind {kind!r}")
        if degree < 0 or (kind == "lagrange" and degree < 1) or (kind == "rt" and degree < 0):
            raise UnsupportedSpaceError(f"unsupported ({kind}, {degree})")
        self.mesh = mesh
        self.kind = kind
        self.degree = int(degree)
        self.ncomp = NCOMP[kind]
        self.essential_tags = tuple(essential_tags)
        self.poly_degree = _prime_degree(kind, degree)
        self.nloc = local_dimension(kind, degree)
        self._number_dofs()
        self._build_basis()
        self.essential = self._essential_mask()
        self.constraint = self._build_constraint() if (kind == "bdm" and degree == 0) else None

    # ---------------------------------------------------------- numbering
    def _number_dofs(self):
        m, k = self.mesh, self.degree
        kind = "rt" if (self.kind == "bdm" and k == 0) else self.kind
        nv_d, ne_d, ni_d = _dofs_per_entity(kind, k)
        nv, ned, nt = m.n_vertices, m.n_edges, m.n_triangles
        self.dofs_per_entity = (nv_d, ne_d, ni_d)
        off_e = nv * nv_d
        off_i = off_e + ned * ne_d
        self.ndof = off_i + nt * ni_d
        cols = []
        if nv_d:
            cols.append(m.triangles)
        for i in range(3):
            cols.append(off_e + m.tri_edges[:, i:i + 1] * ne_d + np.arange(ne_d)[None, :])
        cols.append(off_i + np.arange(nt)[:, None] * ni_d + np.arange(ni_d)[None, :])
        self.l2g = np.concatenate(cols, axis=1).astype(np.int64)
        assert self.l2g.shape[1] == self.nloc
        self.edge_dof_offset = off_e
        self.interior_dof_offset = off_i

    def essential_mask_for(self, tags) -> np.ndarray:
        """Mask of the dofs carried by boundary edges with the given tags."""
        saved = self.essential_tags
        try:
            self.essential_tags = tuple(tags)
            return self._essential_mask()
        finally:
            self.essential_tags = saved

    def edge_dofs(self, edges) -> np.ndarray:
        ne_d = self.dofs_per_entity[1]
        edges = np.asarray(edges, dtype=np.int64)
        return (self.edge_dof_offset + edges[:, None] * ne_d + np.arange(ne_d)[None, :]).ravel()

    def _essential_mask(self) -> np.ndarray:
        mask = np.zeros(self.ndof, dtype=bool)
        if not self.essential_tags:
            return mask
        edges = self.mesh.boundary_edges(self.essential_tags)
        mask[self.edge_dofs(edges)] = True
        if self.kind == "lagrange":
            mask[np.unique(self.mesh.edges[edges].ravel())] = True
        return mask

    # ------------------------------------------------------ dof functionals
    def dof_functionals(self, quad_degree: int):
        """Point/weight description of the local dof functionals.

        Returns ``(ref_pts, W)`` with ``ref_pts`` of shape (nt, nq, 2) and
        ``W`` of shape (nt, nloc, nq, ncomp): ``dof_i(f) = sum W[i,q,c] f_c(q)``.
        Regge components are ordered (11, 12, 22).
        """
        m, k, kind = self.mesh, self.degree, self.kind
        nt = m.n_triangles
        if kind == "lagrange":
            pts = [np.broadcast_to(REF_VERTICES, (nt, 3, 2))]
            if k > 1:
                s = np.arange(1, k) / k
                pts.append(edge_ref_points(m, s).reshape(nt, -1, 2))
            inner = _lagrange_nodes(k)
            if len(inner):
                pts.append(np.broadcast_to(inner, (nt, len(inner), 2)))
            P = np.concatenate(pts, axis=1)
            W = np.broadcast_to(np.eye(self.nloc)[:, :, None], (nt, self.nloc, self.nloc, 1))
            return P, np.ascontiguousarray(W)

        erule = edge_rule(quad_degree)
        s, ws = erule.points[:, 0], erule.weights
        neq = len(s)
        trule = triangle_rule(quad_degree)
        nq_t = len(trule)
        P = np.concatenate([edge_ref_points(m, s).reshape(nt, 3 * neq, 2),
                            np.broadcast_to(trule.points, (nt, nq_t, 2))], axis=1)
        ncomp = self.ncomp
        W = np.zeros((nt, self.nloc, 3 * neq + nq_t, ncomp))
        t = m.edge_tangents()[m.tri_edges]  # global unit tangents (nt, 3, 2)
        n_edge = k + 1 if not (kind == "bdm" and k == 0) else 1
        qpoly = np.stack([legendre.legval(2 * s - 1, np.eye(n_edge)[j]) for j in range(n_edge)])
        row = 0
        for le in range(3):
            tt = t[:, le]
            if kind == "regge":
                comp = np.stack([tt[:, 0] ** 2, 2 * tt[:, 0] * tt[:, 1], tt[:, 1] ** 2], axis=1)
            else:
                comp = np.stack([-tt[:, 1], tt[:, 0]], axis=1)  # global normal
            for j in range(n_edge):
                W[:, row, le * neq:(le + 1) * neq, :] = (ws * qpoly[j])[None, :, None] * comp[:, None, :]
                row += 1
        # interior moments, normalized by the element area
        tests = self._interior_tests(trule.points)
        if tests is not None:
            wt = 2.0 * trule.weights  # (1/|T|) int f dx over the reference element
            W[:, row:, 3 * neq:, :] = wt[None, None, :, None] * tests
        return P, W

    def _interior_tests(self, ref_pts: np.ndarray):
        """Interior test functions at ``ref_pts``: (nt, n_int, nq, ncomp)."""
        k, kind, nt = self.degree, self.kind, self.mesh.n_triangles
        nq = len(ref_pts)
        if kind == "regge":
            if k == 0:
                return None
            M = tabulate_monomials(ref_pts, k - 1)  # (nq, nm)
            # rho = m(xi) S with S in {E11, E12 + E21, E22}; sigma : S -> (s11, 2 s12, s22)
            weights = np.array([[1.0, 0, 0], [0, 2.0, 0], [0, 0, 1.0]])
            out = np.einsum("qa,cd->acqd", M, weights).reshape(-1, nq, 3)
            return np.broadcast_to(out, (nt,) + out.shape)
        if kind == "rt":
            if k == 0:
                return None
            M = tabulate_monomials(ref_pts, k - 1)
            out = np.einsum("qa,cd->acqd", M, np.eye(2)).reshape(-1, nq, 2)
            return np.broadcast_to(out, (nt,) + out.shape)
        if kind == "bdm":
            if k <= 1:
                return None
            parts = []
            if k >= 2:
                M = tabulate_monomials(ref_pts, k - 2)
                out = np.einsum("qa,cd->acqd", M, np.eye(2)).reshape(-1, nq, 2)
                parts.append(np.broadcast_to(out, (nt,) + out.shape))
            # R (x - v0) m(xi) with m homogeneous of degree k - 2
            J = self.mesh.jacobians()
            xv = np.einsum("eij,qj->eqi", J, ref_pts)
            rot = np.stack([-xv[..., 1], xv[..., 0]], axis=-1)  # (nt, nq, 2)
            exps = [e for e in monomial_exponents(k - 2) if sum(e) == k - 2]
            for (a, b) in exps:
                mval = ref_pts[:, 0] ** a * ref_pts[:, 1] ** b
                parts.append((rot * mval[None, :, None])[:, None])
            return np.concatenate(parts, axis=1)
        return None

    def apply_dofs(self, values: np.ndarray, W: np.ndarray) -> np.ndarray:
        """Contract sampled function values ``(nt, nq, [nfun,] ncomp)`` with dof weights."""
        if values.ndim == 3:
            return np.einsum("eiqc,eqc->ei", W, values)
        return np.einsum("eiqc,eqfc->eif", W, values)

    # ---------------------------------------------------------- basis
    def _build_basis(self):
        k, kind = self.degree, self.kind
        J = self.mesh.jacobians()
        C = _prime_basis(kind, k, J)  # (nt, np, nm, ncomp)
        if C.shape[1] != self.nloc:
            raise UnsupportedSpaceError(f"prime basis of size {C.shape[1]} for local dimension {self.nloc}")
        P, W = self.dof_functionals(2 * self.poly_degree + 2)
        M = tabulate_monomials(P, self.poly_degree)  # (nt, nq, nm)
        prime_vals = np.einsum("eqa,epac->eqpc", M, C)
        V = self.apply_dofs(prime_vals, W)  # (nt, ndof, nprime)
        cond = np.linalg.cond(V)
        if not np.all(np.isfinite(cond)) or np.any(cond > 1e12):
            raise np.linalg.LinAlgError(f"singular local Vandermonde matrix for {kind}({k})")
        Vinv = np.linalg.inv(V)
        self.vandermonde_condition = cond
        self.coef = np.einsum("epj,epac->ejac", Vinv, C)
        D = _derivative_matrices(self.poly_degree)
        Jinv = np.linalg.inv(J)
        dref = np.einsum("ejbc,dba->ejacd", self.coef, D)  # d/dxi_d
        self.dcoef = np.einsum("ejacd,edi->ejaci", dref, Jinv)
        ddref = np.einsum("ejbci,dba->ejacid", self.dcoef, D)
        self.ddcoef = np.einsum("ejacid,edl->ejacil", ddref, Jinv)

    # ---------------------------------------------------------- evaluation
    def tabulate(self, ref_pts: np.ndarray, nderiv: int = 0):
        """Basis values (and physical derivatives) at reference points.

        ``ref_pts`` is either shared, shape (nq, 2), or per element, shape
        (nt, nq, 2).  Returns a list ``[phi, dphi, ddphi][:nderiv + 1]`` with
        ``phi`` of shape (nt, nq, nloc, ncomp) and derivative axes appended.
        """
        M = tabulate_monomials(ref_pts, self.poly_degree)
        sub = "qa" if M.ndim == 2 else "eqa"
        out = [np.einsum(f"{sub},ejac->eqjc", M, self.coef)]
        if nderiv >= 1:
            out.append(np.einsum(f"{sub},ejaci->eqjci", M, self.dcoef))
        if nderiv >= 2:
            out.append(np.einsum(f"{sub},ejacil->eqjcil", M, self.ddcoef))
        return out

    def element_coefficients(self, coeffs: np.ndarray) -> np.ndarray:
        return np.asarray(coeffs)[self.l2g]

    def describe(self) -> dict:
        return {"kind": self.kind, "degree": self.degree,
                "essential_tags": list(self.essential_tags)}

    # ------------------------------------------------------------ constraint
    def _build_constraint(self):
        """Stream-function basis of the divergence-free lowest-order space.

        A P1 stream function ``psi`` gives the edge flux
        ``-(psi(hi) - psi(lo)) / |E|`` on each edge.
        """
        m = self.mesh
        nv = m.n_vertices
        if self.essential_tags:
            tagged = set(self.mesh.boundary_edges(self.essential_tags).tolist())
            if tagged != set(self.mesh.boundary_edges().tolist()):
                raise UnsupportedSpaceError(
                    "divergence-free lowest-order space supports essential conditions on "
                    "the whole boundary or nowhere")
            free = np.flatnonzero(~m.is_boundary_vertex)
        else:
            free = np.arange(1, nv)  # pin one vertex to remove the constants
        L = m.edge_lengths()
        rows = np.repeat(np.arange(m.n_edges), 2)
        cols = m.edges.ravel()
        vals = np.column_stack([1.0 / L, -1.0 / L]).ravel()
        G = sps.csr_matrix((vals, (rows, cols)), shape=(m.n_edges, nv))
        return G[:, free].tocsr()


def build_space(mesh: TriMesh, kind: str, degree: int, essential_tags=()) -> FeSpace:
    """Construct a :class:`FeSpace`; ``essential_tags`` of ``"all"`` selects every boundary tag."""
    if essential_tags == "all":
        essential_tags = tuple(sorted(mesh.tag_names()))
    return FeSpace(mesh, kind, degree, essential_tags)


# ------------------------------------------------------------ dof vectors

class DofVector:
    """Coefficients of a finite element function."""

    def __init__(self, space: FeSpace, coeffs=None):
        self.space = space
        if coeffs is None:
            coeffs = np.zeros(space.ndof)
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.shape != (space.ndof,):
            raise ValueError(f"expected {space.ndof} coefficients, got {coeffs.shape}")
        self.coeffs = coeffs
        self._poly = None

    def __len__(self):
        return len(self.coeffs)

    def local_polynomials(self):
        """Per-element polynomial coefficients and physical derivative coefficients."""
        if self._poly is None:
            sp = self.space
            c = self.coeffs[sp.l2g]
            self._poly = (np.einsum("ej,ejac->eac", c, sp.coef),
                          np.einsum("ej,ejaci->eaci", c, sp.dcoef),
                          np.einsum("ej,ejacil->eacil", c, sp.ddcoef))
        return self._poly

    def evaluate(self, ref_pts: np.ndarray, nderiv: int = 0):
        """Values ``(nt, nq, ncomp)`` and derivatives at reference points."""
        F, dF, ddF = self.local_polynomials()
        M = tabulate_monomials(ref_pts, self.space.poly_degree)
        sub = "qa" if M.ndim == 2 else "eqa"
        out = [np.einsum(f"{sub},eac->eqc", M, F)]
        if nderiv >= 1:
            out.append(np.einsum(f"{sub},eaci->eqci", M, dF))
        if nderiv >= 2:
            out.append(np.einsum(f"{sub},eacil->eqcil", M, ddF))
        return out

    def jet(self, ref_pts: np.ndarray, nderiv: int = 2) -> TensorJet:
        """Tensor jet of a Regge field at reference points (batch (nt, nq))."""
        if self.space.kind != "regge":
            raise TypeError("jet() is defined for Regge fields")
        vals = self.evaluate(ref_pts, nderiv)
        g = _sym_from_components(vals[0], -1)
        dg = _sym_from_components(vals[1], -2) if nderiv >= 1 else None
        ddg = _sym_from_components(vals[2], -3) if nderiv >= 2 else None
        return TensorJet(g, dg, ddg)

    def to_dict(self) -> dict:
        return {"space": self.space.describe(), "coefficients": self.coeffs.tolist()}

    def save_json(self, path) -> None:
        data = self.to_dict()
        data["mesh"] = self.space.mesh.to_dict()
        Path(path).write_text(json.dumps(data))

    @classmethod
    def load_json(cls, path) -> "DofVector":
        data = json.loads(Path(path).read_text())
        mesh = TriMesh.from_dict(data["mesh"])
        d = data["space"]
        sp = build_space(mesh, d["kind"], d["degree"], tuple(d.get("essential_tags", ())))
        return cls(sp, np.array(data["coefficients"], dtype=float))


def _sym_from_components(a: np.ndarray, axis: int) -> np.ndarray:
    """Turn a (11, 12, 22) component axis into trailing 2x2 symmetric axes.

    The component axis is moved to the end before expansion, so derivative
    axes that followed it now precede the 2x2 block.
    """
    a = np.moveaxis(a, axis, -1)
    out = np.empty(a.shape[:-1] + (2, 2))
    out[..., 0, 0] = a[..., 0]
    out[..., 0, 1] = out[..., 1, 0] = a[..., 1]
    out[..., 1, 1] = a[..., 2]
    return out


# ------------------------------------------------------- analytic fields

class AnalyticTensor:
    """Symmetric 2-tensor field given by expressions for its three entries."""

    def __init__(self, s11, s12, s22):
        self.entries = tuple(ex.simplify(ex.as_expr(e)) for e in (s11, s12, s22))
        self.d = [[ex.differentiate(e, v) for v in "xy"] for e in self.entries]
        self.dd = [[[ex.differentiate(de, v) for v in "xy"] for de in row] for row in self.d]

    def jet_at(self, xy: np.ndarray, nderiv: int = 2) -> TensorJet:
        X, Y = xy[..., 0], xy[..., 1]
        shape = X.shape

        def ev(e):
            return np.broadcast_to(ex.evaluate(e, X, Y), shape)

        comps = np.stack([ev(e) for e in self.entries], axis=-1)
        g = _sym_from_components(comps, -1)
        dg = ddg = None
        if nderiv >= 1:
            d = np.stack([np.stack([ev(self.d[c][k]) for c in range(3)], axis=-1) for k in range(2)], axis=-2)
            dg = _sym_from_components(d, -1)
        if nderiv >= 2:
            dd = np.stack([np.stack([np.stack([ev(self.dd[c][k][l]) for c in range(3)], axis=-1)
                                     for l in range(2)], axis=-2) for k in range(2)], axis=-3)
            ddg = _sym_from_components(dd, -1)
        return TensorJet(g, dg, ddg)

    def values_at(self, xy: np.ndarray) -> np.ndarray:
        """Components (11, 12, 22) at physical points."""
        X, Y = xy[..., 0], xy[..., 1]
        return np.stack([np.broadcast_to(ex.evaluate(e, X, Y), X.shape) for e in self.entries], axis=-1)

    def jet(self, mesh: TriMesh, ref_pts: np.ndarray, nderiv: int = 2) -> TensorJet:
        return self.jet_at(to_physical(mesh, ref_pts), nderiv)


class AnalyticMetric(AnalyticTensor):
    """Analytic metric from entry expressions or from a graph function ``f``.

    The graph variant is ``g = I + grad f grad f^T`` with every partial
    obtained from symbolic derivatives of ``f`` up to third order.
    """

    def __init__(self, g11=None, g12=None, g22=None, graph=None):
        self.graph = None
        if graph is not None:
            f = ex.simplify(ex.as_expr(graph))
            self.graph = f
            d = {"": f}
            for name in ("x", "y", "xx", "xy", "yy", "xxx", "xxy", "xyy", "yyy"):
                d[name] = ex.differentiate(d[name[:-1]], name[-1])
            self._fd = d
            self.entries = None
        else:
            super().__init__(g11, g12, g22)

    @classmethod
    def from_graph(cls, f) -> "AnalyticMetric":
        return cls(graph=f)

    @classmethod
    def identity(cls) -> "AnalyticMetric":
        return cls("1", "0", "1")

    def _graph_derivatives(self, xy):
        X, Y = xy[..., 0], xy[..., 1]
        out = {}
        for name, e in self._fd.items():
            if name:
                out[name] = np.broadcast_to(ex.evaluate(e, X, Y), X.shape)
        return out

    def jet_at(self, xy: np.ndarray, nderiv: int = 2) -> TensorJet:
        if self.graph is None:
            jet = super().jet_at(xy, nderiv)
        else:
            d = self._graph_derivatives(xy)
            grad = np.stack([d["x"], d["y"]], axis=-1)
            hess = np.stack([np.stack([d["xx"], d["xy"]], -1), np.stack([d["xy"], d["yy"]], -1)], -2)
            third = np.empty(grad.shape[:-1] + (2, 2, 2))
            names = {(0, 0, 0): "xxx", (0, 0, 1): "xxy", (0, 1, 1): "xyy", (1, 1, 1): "yyy"}
            for a in range(2):
                for b in range(2):
                    for c in range(2):
                        third[..., a, b, c] = d[names[tuple(sorted((a, b, c)))]]
            g = np.eye(2) + grad[..., :, None] * grad[..., None, :]
            dg = ddg = None
            if nderiv >= 1:
                # d_k g_ij = f_ik f_j + f_i f_jk
                dg = (np.einsum("...ik,...j->...kij", hess, grad)
                      + np.einsum("...i,...jk->...kij", grad, hess))
            if nderiv >= 2:
                ddg = (np.einsum("...ikl,...j->...klij", third, grad)
                       + np.einsum("...ik,...jl->...klij", hess, hess)
                       + np.einsum("...il,...jk->...klij", hess, hess)
                       + np.einsum("...i,...jkl->...klij", grad, third))
            jet = TensorJet(g, dg, ddg)
        return jet

    def values_at(self, xy: np.ndarray) -> np.ndarray:
        if self.graph is None:
            return super().values_at(xy)
        g = self.jet_at(xy, 0).g
        return np.stack([g[..., 0, 0], g[..., 0, 1], g[..., 1, 1]], axis=-1)

    def check_spd_on(self, mesh: TriMesh, quad_degree: int, tol: float = 1e-12) -> None:
        pts = ElementQuadrature(mesh, quad_degree).points
        g = self.jet_at(pts, 0).g
        ev = np.linalg.eigvalsh(g)
        if np.any(ev[..., 0] <= tol):
            e, q = np.argwhere(ev[..., 0] <= tol)[0]
            raise MetricError(f"metric not positive definite at {pts[e, q].tolist()}")


class FieldDifference:
    """Lazy difference ``a - b`` of two tensor fields."""

    def __init__(self, a, b):
        self.a = a
        self.b = b
        self.space = getattr(a, "space", None) or getattr(b, "space", None)

    def jet(self, mesh: TriMesh, ref_pts: np.ndarray, nderiv: int = 2) -> TensorJet:
        return field_jet(self.a, mesh, ref_pts, nderiv) - field_jet(self.b, mesh, ref_pts, nderiv)


def field_jet(f, mesh: TriMesh, ref_pts: np.ndarray, nderiv: int = 2) -> TensorJet:
    """Jet of a Regge field, analytic tensor or difference at reference points."""
    if isinstance(f, DofVector):
        return f.jet(ref_pts, nderiv)
    return f.jet(mesh, ref_pts, nderiv)


# ------------------------------------------------------------ interpolation

def interpolate(space: FeSpace, fun, quad_degree: Optional[int] = None) -> DofVector:
    """Canonical interpolant: apply the dof functionals of ``space`` to ``fun``.

    ``fun`` maps physical points ``(..., 2)`` to component values
    ``(..., ncomp)`` (Regge components ordered 11, 12, 22).
    """
    if quad_degree is None:
        quad_degree = 2 * space.degree + 6
    P, W = space.dof_functionals(quad_degree)
    vals = np.asarray(fun(to_physical(space.mesh, P)), dtype=float)
    if vals.ndim == 2:
        vals = vals[..., None]
    local = space.apply_dofs(vals, W)
    acc = np.zeros(space.ndof)
    cnt = np.zeros(space.ndof)
    np.add.at(acc, space.l2g.ravel(), local.ravel())
    np.add.at(cnt, space.l2g.ravel(), 1.0)
    return DofVector(space, acc / np.maximum(cnt, 1))


def regge_interpolate(gex, space: FeSpace, quad_degree: Optional[int] = None) -> DofVector:
    """Canonical Regge interpolant of an analytic tensor field."""
    if space.kind != "regge":
        raise UnsupportedSpaceError("regge_interpolate needs a Regge space")
    if quad_degree is None:
        quad_degree = 2 * space.degree + 6
    if isinstance(gex, AnalyticMetric):
        gex.check_spd_on(space.mesh, quad_degree)
    return interpolate(space, gex.values_at, quad_degree)


def lagrange_interpolate(space: FeSpace, fun) -> DofVector:
    """Nodal interpolant of a scalar function of physical points."""
    if space.kind != "lagrange":
        raise UnsupportedSpaceError("lagrange_interpolate needs a Lagrange space")
    return interpolate(space, lambda xy: np.asarray(fun(xy))[..., None], 0)


def evaluate(space: FeSpace, coeffs, triangle: int, ref_point) -> dict:
    """Point evaluation on one element.

    Returns a dict with ``value`` and the natural derivative data of the
    kind: ``gradient`` (Lagrange), ``partials`` (Regge, ``[k, i, j]``) or
    ``divergence`` (BDM/RT).
    """
    c = np.asarray(coeffs, dtype=float)[space.l2g[triangle]]
    M = tabulate_monomials(np.asarray(ref_point, dtype=float), space.poly_degree)
    val = np.einsum("a,j,jac->c", M, c, space.coef[triangle])
    dval = np.einsum("a,j,jaci->ci", M, c, space.dcoef[triangle])
    if space.kind == "lagrange":
        return {"value": float(val[0]), "gradient": dval[0]}
    if space.kind == "regge":
        return {"value": _sym_from_components(val, -1),
                "partials": np.stack([_sym_from_components(dval[:, k], -1) for k in range(2)])}
    return {"value": val, "divergence": float(dval[0, 0] + dval[1, 1])}



def evaluate_points(fe: DofVector, points) -> np.ndarray:
    """Component values ``(npoints, ncomp)`` at physical points; NaN outside the mesh."""
    from .mesh import locate_points

    sp = fe.space
    tri, ref = locate_points(sp.mesh, points)
    out = np.full((len(tri), NCOMP[sp.kind]), np.nan)
    ok = tri >= 0
    if ok.any():
        F = fe.local_polynomials()[0]
        M = tabulate_monomials(ref[ok], sp.poly_degree)
        out[ok] = np.einsum("pa,pac->pc", M, F[tri[ok]])
    return out

__all__ = [
    "FeSpace", "DofVector", "AnalyticTensor", "AnalyticMetric", "FieldDifference",
    "build_space", "regge_interpolate", "lagrange_interpolate", "interpolate", "evaluate",
    "evaluate_points",
    "field_jet", "ElementQuadrature", "EdgeSideQuadrature", "edge_ref_points", "to_physical",
    "tabulate_monomials", "monomial_exponents", "local_dimension", "UnsupportedSpaceError",
]
