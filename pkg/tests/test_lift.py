import math

import numpy as np
import pytest
import sympy as sp

from oracles import COORDS, K_EXACT, graph_metric, sym_christoffel, sym_tensor, x, y
from reggecurv.geom import EPS, MetricError, det2, gauss_curvature
from reggecurv.lift import (BoundaryData, BoundaryDataError, Functional, NotSPDAlongPathError,
                            assemble_connection_rhs, assemble_curl_rhs, assemble_curvature_rhs,
                            assemble_inc_rhs, lift_connection, lift_curl, lift_curvature, lift_inc,
                            verify_integral_representation)
from reggecurv.mesh import perturb, structured_unit_square
from reggecurv.norms import l2_error
from reggecurv.spaces import (AnalyticMetric, DofVector, ElementQuadrature, build_space, evaluate_points,
                              field_jet, interpolate, regge_interpolate)

FLAT = AnalyticMetric("1", "0", "1")
WAVY = AnalyticMetric("2 + 0.3*sin(3*x + y)", "0.2*cos(2*y)", "1.5 + 0.2*x*y")


def _lam(f):
    fn = sp.lambdify(COORDS, f, "numpy")
    return lambda p: np.broadcast_to(np.asarray(fn(p[..., 0], p[..., 1]), dtype=float), p.shape[:-1])


def _tensor_field(R, S):
    parts = [_lam(S[0, 0]), _lam(S[0, 1]), _lam(S[1, 1])]
    return interpolate(R, lambda p: np.stack([f(p) for f in parts], axis=-1))


def _exact_integral(f, n=40):
    z, w = np.polynomial.legendre.leggauss(n)
    z, w = (z + 1) / 2, w / 2
    X, Y = np.meshgrid(z, z, indexing="ij")
    return float(np.einsum("i,j,ij->", w, w, f(np.stack([X, Y], axis=-1))))


def _sym_curl(G, S):
    _, second = sym_christoffel(G)
    return [(sum(EPS[a][k] * sp.diff(S[i, k], COORDS[a]) for a in range(2) for k in range(2))
             - sum(EPS[a][k] * second[m][a][i] * S[m, k] for a in range(2) for k in range(2) for m in range(2)))
            / sp.sqrt(G.det()) for i in range(2)]


# ------------------------------------------------------------ curvature

def test_flat_metric_gives_zero_functionals(mesh4):
    g = regge_interpolate(FLAT, build_space(mesh4, "regge", 1))
    V = build_space(mesh4, "lagrange", 2)
    bd = BoundaryData(dirichlet={"bottom": 0.0, "right": 0.0}, neumann={"left": 0.0, "top": 0.0}, metric=FLAT)
    assert np.abs(assemble_curvature_rhs(g, V, bd).values).max() <= 1e-12
    V = build_space(mesh4, "lagrange", 2, ("bottom", "right"))
    assert np.abs(lift_curvature(g, V, bd).coeffs).max() <= 1e-12
    for W in (build_space(mesh4, "bdm", 1, "all"), build_space(mesh4, "rt", 1)):
        assert np.abs(assemble_connection_rhs(g, W).values).max() <= 1e-12
    assert np.abs(lift_connection(g, build_space(mesh4, "bdm", 1, "all")).coeffs).max() <= 1e-12
    s = interpolate(build_space(mesh4, "regge", 1), lambda p: np.broadcast_to([1.0, 2.0, -0.5], p.shape[:-1] + (3,)))
    assert np.abs(lift_curl(g, s, build_space(mesh4, "bdm", 1, "all")).coeffs).max() <= 1e-12
    assert np.abs(lift_inc(g, s, build_space(mesh4, "lagrange", 2, "all")).coeffs).max() <= 1e-11


def test_gauss_bonnet_total_curvature(gex):
    m = perturb(structured_unit_square(8), 0.25, 0)
    g = regge_interpolate(gex, build_space(m, "regge", 1))
    V = build_space(m, "lagrange", 2)
    bd = BoundaryData.from_metric(gex, (), ("bottom", "right", "left", "top"))
    total = assemble_curvature_rhs(g, V, bd).apply(np.ones(V.ndof))
    K, G = _lam(K_EXACT), graph_metric()
    vol = _lam(sp.sqrt(G.det()))
    assert total == pytest.approx(_exact_integral(lambda p: K(p) * vol(p)), abs=2e-3)


def test_exact_metric_recovers_curvature(gex):
    m = perturb(structured_unit_square(4), 0.25, 0)
    g = regge_interpolate(gex, build_space(m, "regge", 4))
    V = build_space(m, "lagrange", 5, ("bottom", "right"))
    Kh = lift_curvature(g, V, BoundaryData.from_metric(gex, ("bottom", "right"), ("left", "top")))
    assert l2_error(Kh, _lam(K_EXACT)) < 1e-4


def test_exact_metric_functional_matches_weighted_curvature(gex):
    m = structured_unit_square(4)
    g = regge_interpolate(gex, build_space(m, "regge", 4))
    V = build_space(m, "lagrange", 2)
    bd = BoundaryData.from_metric(gex, (), ("bottom", "right", "left", "top"))
    F = assemble_curvature_rhs(g, V, bd)
    eq = ElementQuadrature(m, 16)
    dens = _lam(K_EXACT)(eq.points) * _lam(sp.sqrt(graph_metric().det()))(eq.points)
    phi = V.tabulate(eq.ref_points)[0][..., 0]
    oracle = np.bincount(V.l2g.ravel(), np.einsum("eq,eq,eqj->ej", eq.weights, dens, phi).ravel(), V.ndof)
    assert np.abs(F.values - oracle).max() <= 1e-6


def test_interior_edge_jumps_shrink(gex):
    """Edge contributions of the interpolated metric decay with the mesh size."""
    sizes = []
    for n in (4, 8, 16):
        m = structured_unit_square(n)
        g = regge_interpolate(gex, build_space(m, "regge", 1))
        V = build_space(m, "lagrange", 2)
        bd = BoundaryData.from_metric(gex, (), ("bottom", "right", "left", "top"))
        # edge-midpoint dofs only see the element and edge terms; subtract the element term
        F = assemble_curvature_rhs(g, V, bd).values
        eq = ElementQuadrature(m, 12)
        j = field_jet(g, m, eq.ref_points, 2)
        phi = V.tabulate(eq.ref_points)[0][..., 0]
        elem = np.bincount(V.l2g.ravel(), np.einsum("eq,eq,eqj->ej", eq.weights,
                                                    gauss_curvature(j) * np.sqrt(det2(j.g)), phi).ravel(), V.ndof)
        interior_edges = np.flatnonzero(~m.is_boundary_edge)
        sizes.append(np.abs((F - elem)[V.edge_dofs(interior_edges)]).max())
    rates = np.log2(np.array(sizes[:-1]) / sizes[1:])
    assert np.all(rates >= 1.0 - 0.2)


def test_boundary_data_tags_disjoint():
    with pytest.raises(BoundaryDataError):
        BoundaryData(dirichlet={"left": 0.0}, neumann={"left": 0.0})


def test_untagged_boundary_edge_is_an_error(mesh4):
    g = regge_interpolate(FLAT, build_space(mesh4, "regge", 0))
    bd = BoundaryData(dirichlet={"bottom": 0.0}, neumann={"left": 0.0}, metric=FLAT)
    with pytest.raises(BoundaryDataError, match="right|top"):
        assemble_curvature_rhs(g, build_space(mesh4, "lagrange", 1), bd)


def test_curvature_requires_spd_metric(mesh4):
    g = regge_interpolate(FLAT, build_space(mesh4, "regge", 0))
    bd = BoundaryData(dirichlet={t: 0.0 for t in mesh4.tag_names()})
    with pytest.raises(MetricError):
        assemble_curvature_rhs(DofVector(g.space, -g.coeffs), build_space(mesh4, "lagrange", 1), bd)


# ------------------------------------------------------------ connection

def _two_triangles():
    m = structured_unit_square(1)
    beta, d1 = 0.3, 0.5
    R = np.array([[math.cos(beta), -math.sin(beta)], [math.sin(beta), math.cos(beta)]])
    u = R @ (np.array([1.0, 1.0]) / math.sqrt(2))
    d2 = (1 - d1 * u[0] ** 2) / u[1] ** 2
    A = R.T @ np.diag([d1, d2]) @ R  # A(tau, tau) = 1 on the diagonal
    return m, A


def test_piecewise_constant_metrics_give_frame_rotation():
    m, A = _two_triangles()
    upper = np.array([A[0, 0], A[0, 1], A[1, 1]])

    def fun(p):
        above = (p[..., 1] > p[..., 0] + 1e-12)[..., None]
        return np.where(above, upper, [1.0, 0.0, 1.0])

    g = interpolate(build_space(m, "regge", 0), fun)
    W = build_space(m, "rt", 0)
    F = assemble_connection_rhs(g, W)
    # frame of A is A^(-1/2) E_i; the A-angle between e_1 and the A-normal equals the
    # Euclidean angle between E_1 and A^(-1/2) nu
    nu = np.array([-1.0, 1.0]) / math.sqrt(2)
    w, Q = np.linalg.eigh(A)
    a = (Q @ np.diag(w ** -0.5) @ Q.T) @ nu
    alpha = math.atan2(a[1], a[0]) - math.atan2(nu[1], nu[0])
    assert 0.05 < abs(alpha) < math.pi
    diag = int(np.flatnonzero(~m.is_boundary_edge)[0])
    flux = np.zeros(W.ndof)
    zq, wq = np.polynomial.legendre.leggauss(4)
    pts = np.column_stack([(zq + 1) / 2] * 2)
    for a_ in range(W.ndof):
        c = np.zeros(W.ndof)
        c[a_] = 1.0
        vals = evaluate_points(DofVector(W, c), pts)
        flux[a_] = math.sqrt(2) * np.dot(wq / 2, vals @ nu)
    assert abs(flux[diag]) > 0.1
    assert np.allclose(np.abs(F.values), np.abs(alpha * flux), atol=1e-10)
    sign = np.sign(F.values[diag] / (alpha * flux[diag]))
    assert np.allclose(F.values, sign * alpha * flux, atol=1e-10)


def test_connection_boundary_values_are_imposed(gex, mesh4):
    from reggecurv.geom import connection_coefficients
    g = regge_interpolate(gex, build_space(mesh4, "regge", 1))
    W = build_space(mesh4, "bdm", 1, "all")
    exact = interpolate(W, lambda p: connection_coefficients(gex.jet_at(p, 1))).coeffs
    w_h = lift_connection(g, W, essential_values=exact)
    assert np.array_equal(w_h.coeffs[W.essential], exact[W.essential])


# ------------------------------------------------------------ covariant curl

def _random_pair(mesh, k, seed):
    """Regge interpolant of a random smooth SPD metric and a random Regge tensor."""
    rng = np.random.default_rng(seed)
    a, b, c, d = rng.uniform(0, 0.3, 4)
    metric = AnalyticMetric(f"2 + {a}*sin({1 + 3 * b}*x + y)", f"{c}*cos(2*y + {d})", f"1.5 + {d}*x*y")
    g = regge_interpolate(metric, build_space(mesh, "regge", k))
    s = DofVector(g.space, rng.normal(size=g.space.ndof))
    return g, s


@pytest.mark.parametrize("k", [0, 1, 2])
def test_curl_forms_agree(mesh4, k):
    g, s = _random_pair(mesh4, k, 10 + k)
    for ess in ((), "all"):
        W = build_space(mesh4, "bdm", k, ess) if k > 0 else build_space(mesh4, "rt", 0, ess)
        # the forms differ by an integration by parts, exact only under exact quadrature
        F1 = assemble_curl_rhs(g, s, W, 25, form=1).values
        F2 = assemble_curl_rhs(g, s, W, 25, form=2).values
        assert np.abs(F1 - F2).max() <= 1e-9 * max(1.0, np.abs(F1).max())


def test_curl_of_globally_smooth_tensor_has_no_jump_terms(mesh4):
    S = sym_tensor(x * y, 1 + x ** 2 - y, y ** 2 + x)
    R = build_space(mesh4, "regge", 2)
    s = _tensor_field(R, S)
    g = regge_interpolate(FLAT, R)
    W = build_space(mesh4, "bdm", 2, "all")
    F = assemble_curl_rhs(g, s, W)
    curl = [_lam(c) for c in _sym_curl(sp.eye(2), S)]
    eq = ElementQuadrature(mesh4, 10)
    cv = np.stack([c(eq.points) for c in curl], axis=-1)
    phi = W.tabulate(eq.ref_points)[0]
    oracle = np.bincount(W.l2g.ravel(), np.einsum("eq,eqc,eqjc->ej", eq.weights, cv, phi).ravel(), W.ndof)
    free = ~W.essential
    assert np.abs(F.values[free] - oracle[free]).max() <= 1e-11


def test_curl_rejects_indefinite_metric(mesh4):
    g, s = _random_pair(mesh4, 1, 0)
    with pytest.raises(MetricError):
        assemble_curl_rhs(DofVector(g.space, -g.coeffs), s, build_space(mesh4, "bdm", 1), form=2)
    with pytest.raises(MetricError):
        assemble_inc_rhs(DofVector(g.space, -g.coeffs), s, build_space(mesh4, "lagrange", 2), path="direct")


def test_curl_requires_two_forms_only():
    m = structured_unit_square(1)
    g = regge_interpolate(FLAT, build_space(m, "regge", 0))
    with pytest.raises(ValueError):
        assemble_curl_rhs(g, g, build_space(m, "rt", 0), form=3)


# ------------------------------------------------------------ incompatibility

@pytest.mark.parametrize("k", [0, 1, 2])
def test_inc_paths_agree(mesh4, k):
    g, s = _random_pair(mesh4, k, 20 + k)
    V = build_space(mesh4, "lagrange", k + 1, "all")
    Fc = assemble_inc_rhs(g, s, V, 25, path="composed").values
    Fd = assemble_inc_rhs(g, s, V, 25, path="direct").values
    free = ~V.essential
    assert np.abs(Fc - Fd)[free].max() <= 1e-8 * np.abs(Fc[free]).max()


def test_inc_of_smooth_tensor_in_smooth_metric(mesh4):
    G = sym_tensor(2 + x, y / 10, 2 + y)
    S = sym_tensor(x * y, 1 + x ** 2 - y, y ** 2 + x)
    R = build_space(mesh4, "regge", 2)
    g, s = _tensor_field(R, G), _tensor_field(R, S)
    c = _sym_curl(G, S)
    inc_vol = sum(EPS[i][j] * sp.diff(c[j], COORDS[i]) for i in range(2) for j in range(2))
    V = build_space(mesh4, "lagrange", 3, "all")
    eq = ElementQuadrature(mesh4, 16)
    phi = V.tabulate(eq.ref_points)[0][..., 0]
    oracle = np.bincount(V.l2g.ravel(),
                         np.einsum("eq,eq,eqj->ej", eq.weights, _lam(inc_vol)(eq.points), phi).ravel(), V.ndof)
    free = ~V.essential
    for path in ("composed", "direct"):
        F = assemble_inc_rhs(g, s, V, quad_degree=16, path=path).values
        assert np.abs(F[free] - oracle[free]).max() <= 1e-9


def test_inc_unknown_path_rejected(mesh4):
    g, s = _random_pair(mesh4, 0, 0)
    with pytest.raises(ValueError):
        assemble_inc_rhs(g, s, build_space(mesh4, "lagrange", 1), path="sideways")


# ------------------------------------------------------------ integral representation

def test_integral_representation_flat():
    m = structured_unit_square(2)
    g = regge_interpolate(FLAT, build_space(m, "regge", 1))
    assert verify_integral_representation(g, build_space(m, "lagrange", 2)) <= 1e-14


def test_integral_representation_converges_in_t(gex, mesh4):
    g = regge_interpolate(gex, build_space(mesh4, "regge", 1))
    V = build_space(mesh4, "lagrange", 2)
    assert verify_integral_representation(g, V, 20) <= 1e-6
    early = [verify_integral_representation(g, V, n) for n in range(1, 8)]
    assert all(b < a for a, b in zip(early, early[1:]))
    late = [verify_integral_representation(g, V, n) for n in (10, 20, 30, 40)]
    assert all(b <= max(a, 1e-13) for a, b in zip(late, late[1:]))


def test_integral_representation_reports_indefinite_path(mesh4):
    R = build_space(mesh4, "regge", 0)
    g = interpolate(R, lambda p: np.broadcast_to([-1.0, 0.0, 1.0], p.shape[:-1] + (3,)))
    with pytest.raises(NotSPDAlongPathError) as info:
        verify_integral_representation(g, build_space(mesh4, "lagrange", 1), 4)
    assert 0 < info.value.t < 1


# ------------------------------------------------------------ functionals

def test_functional_arithmetic_and_json(mesh4):
    V = build_space(mesh4, "lagrange", 1, "all")
    F = Functional(V, np.arange(V.ndof, dtype=float))
    assert np.array_equal((2 * F - F).values, F.values)
    assert F.apply(np.ones(V.ndof)) == pytest.approx(F.values.sum())
    assert len(F.free_values()) == int((~V.essential).sum())
    d = F.to_dict()
    assert d["values"] == F.values.tolist()
    W = build_space(mesh4, "bdm", 0, "all")
    G = Functional(W, np.ones(W.ndof))
    assert np.allclose(G.free_values(), W.constraint.T @ np.ones(W.ndof))
