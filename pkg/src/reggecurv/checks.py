"""Property checks of the geometric kernels and the assembled functionals.

Each check returns a :class:`CheckResult`; :func:`run_all` drives the
``ops-check`` command.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .geom import (TensorJet, curl_g_sigma, det2, div_g_tensor_jet, div_g_vector, gauss_curvature,
                   geodesic_curvature_weight, hodge_flat, inc_g_sigma, interior_angle,
                   normal_tangent_component, normal_tangent_component_derivative, trace_reverse)
from .lift import (_corner_tangents, _side_jet, assemble_curl_rhs, assemble_inc_rhs,
                   verify_integral_representation)
from .mesh import TriMesh
from .spaces import (REF_VERTICES, AnalyticMetric, AnalyticTensor, DofVector, EdgeSideQuadrature,
                     ElementQuadrature, FieldDifference, build_space, field_jet, interpolate,
                     regge_interpolate)


@dataclass
class CheckResult:
    name: str
    value: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.value) and self.value <= self.tolerance)

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status} {self.name}: {self.value:.3e} (tolerance {self.tolerance:.1e})"


def identity_metric_field(R) -> DofVector:
    return interpolate(R, lambda xy: np.broadcast_to([1.0, 0.0, 1.0], xy.shape[:-1] + (3,)))


# ------------------------------------------------------------- pointwise

def random_jets(rng: np.random.Generator, n: int, spd: bool = True) -> TensorJet:
    """Jets with the symmetries of smooth fields (tensor and derivative indices)."""
    a = rng.normal(size=(n, 2, 2)) * 0.4
    g = np.eye(2) + a @ np.swapaxes(a, -1, -2) if spd else 0.5 * (a + np.swapaxes(a, -1, -2)) / 0.4

    def sym(x):
        return 0.5 * (x + np.swapaxes(x, -1, -2))

    dg = sym(rng.normal(size=(n, 2, 2, 2)))
    ddg = sym(rng.normal(size=(n, 2, 2, 2, 2)))
    ddg = 0.5 * (ddg + np.swapaxes(ddg, 1, 2))
    return TensorJet(g, dg, ddg)


def div_curl_identities(rng: np.random.Generator, n: int = 100) -> tuple[float, float]:
    """Relative residuals of star(div_g S_g s)^flat = -curl_g s and div_g div_g S_g s = -inc_g s."""
    j = random_jets(rng, n)
    s = random_jets(rng, n, spd=False)
    X, dX = div_g_tensor_jet(j, trace_reverse(j, s))
    c = curl_g_sigma(j, s)
    r1 = np.abs(hodge_flat(j.g, X) + c).max() / max(1.0, np.abs(c).max())
    inc = inc_g_sigma(j, s)
    r2 = np.abs(div_g_vector(j, X, dX) + inc).max() / max(1.0, np.abs(inc).max())
    return float(r1), float(r2)


def variation_mismatch(rng: np.random.Generator, t: float, n: int = 20) -> dict:
    """Central-difference mismatch of the three curvature-term variations.

    Returns relative mismatches for the element density ``K sqrt(det g)``,
    the edge weight ``kappa sqrt(g_tt)`` and the corner angle.
    """
    j = random_jets(rng, n)
    s = random_jets(rng, n, spd=False)
    tau = rng.normal(size=(n, 2))
    tau /= np.linalg.norm(tau, axis=1, keepdims=True)

    def dens(h):
        jt = j + s.scaled(h)
        return gauss_curvature(jt) * np.sqrt(det2(jt.g))

    def weight(h):
        return geodesic_curvature_weight(j + s.scaled(h), tau)

    ref_a = -0.5 * np.sqrt(det2(j.g)) * inc_g_sigma(j, s)
    ref_b = 0.5 * (np.einsum("...i,...i->...", curl_g_sigma(j, s), tau)
                   + normal_tangent_component_derivative(j, s, tau))
    # counterclockwise corners: rotate the incoming direction by an angle in (0, pi)
    turn = rng.uniform(0.2, np.pi - 0.2, size=n)
    c, sn = np.cos(turn), np.sin(turn)
    t_out = np.stack([c * tau[:, 0] - sn * tau[:, 1], sn * tau[:, 0] + c * tau[:, 1]], axis=-1)

    def angle(h):
        return interior_angle(j.g + h * s.g, tau, t_out)

    ref_c = -0.5 * (normal_tangent_component(j.g, s.g, t_out) - normal_tangent_component(j.g, s.g, tau))
    out = {}
    for name, fun, ref in (("density", dens, ref_a), ("edge", weight, ref_b), ("angle", angle, ref_c)):
        fd = (fun(t) - fun(-t)) / (2 * t)
        out[name] = float(np.abs(fd - ref).max() / max(np.abs(ref).max(), 1e-300))
    return out


# -------------------------------------------------------------- assembled

def element_gauss_bonnet_defect(g, mesh: TriMesh, quad_degree: int) -> np.ndarray:
    """Per element: int K dA + int kappa ds + sum(pi - angle) - 2 pi, all in the metric ``g``."""
    eq = ElementQuadrature(mesh, quad_degree)
    j = field_jet(g, mesh, eq.ref_points, 2)
    area = np.einsum("eq,eq->e", eq.weights, gauss_curvature(j) * np.sqrt(det2(j.g)))
    es = EdgeSideQuadrature(mesh, quad_degree)
    js = _side_jet(g, es, 1)
    tau = np.broadcast_to(es.tangent[:, :, None, :], js.g.shape[:-1])
    edge = np.einsum("etq,etq->e", es.weights, geodesic_curvature_weight(js, tau))
    gv = field_jet(g, mesh, REF_VERTICES, 0).g
    t_in, t_out = _corner_tangents(mesh)
    corners = np.sum(np.pi - interior_angle(gv, t_in, t_out), axis=1)
    return area + edge + corners - 2 * np.pi


def feec_orthogonality(mesh: TriMesh, sigma: AnalyticTensor, k: int,
                       quad_degree: Optional[int] = None) -> tuple[float, float]:
    """Flat-metric curl and inc functionals of the Regge interpolation error.

    Tested with BDM(k) and Lagrange(k+1) functions vanishing on the
    boundary; both vanish identically.  Returns values relative to the
    size of the interpolant.
    """
    qd = 2 * k + 8 if quad_degree is None else quad_degree
    R = build_space(mesh, "regge", k)
    delta = identity_metric_field(R)
    s_h = interpolate(R, sigma.values_at, qd)
    diff = FieldDifference(sigma, s_h)
    scale = max(1.0, float(np.abs(s_h.coeffs).max()))
    W = build_space(mesh, "bdm", k, "all")
    c = assemble_curl_rhs(delta, diff, W, qd).free_values()
    V = build_space(mesh, "lagrange", k + 1, "all")
    i = assemble_inc_rhs(delta, diff, V, qd).free_values()
    return float(np.abs(c).max() / scale), float(np.abs(i).max() / scale)


def inc_path_mismatch(g, sigma, V, quad_degree: int = 25) -> float:
    """Relative difference of the composed and direct incompatibility assemblies."""
    a = assemble_inc_rhs(g, sigma, V, quad_degree, "composed").values
    b = assemble_inc_rhs(g, sigma, V, quad_degree, "direct").values
    return float(np.abs(a - b).max() / max(np.abs(a).max(), 1e-300))


def run_all(metric: AnalyticMetric, sigma: AnalyticTensor, mesh: TriMesh, degrees=(0, 1, 2),
            seed: int = 0) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    out = []
    r1, r2 = div_curl_identities(rng)
    out.append(CheckResult("div-curl identity", r1, 1e-8))
    out.append(CheckResult("div-div identity", r2, 1e-8))
    coarse = variation_mismatch(np.random.default_rng(seed), 1e-3)
    fine = variation_mismatch(np.random.default_rng(seed), 1e-4)
    for name in fine:
        out.append(CheckResult(f"variation {name} at t=1e-4", fine[name], 1e-6))
        ratio = coarse[name] / max(fine[name], 1e-300)
        out.append(CheckResult(f"variation {name} second-order reduction", abs(np.log10(ratio) - 2.0), 0.3))
    for k in degrees:
        R = build_space(mesh, "regge", k)
        g = regge_interpolate(metric, R)
        gb = element_gauss_bonnet_defect(g, mesh, 2 * k + 8)
        out.append(CheckResult(f"element Gauss-Bonnet k={k}", float(np.abs(gb).max()), 1e-8))
        c, i = feec_orthogonality(mesh, sigma, k)
        out.append(CheckResult(f"flat curl orthogonality k={k}", c, 1e-10))
        out.append(CheckResult(f"flat inc orthogonality k={k}", i, 1e-10))
        s_h = interpolate(R, sigma.values_at)
        V = build_space(mesh, "lagrange", k + 1)
        out.append(CheckResult(f"inc direct vs composed k={k}", inc_path_mismatch(g, s_h, V), 1e-8))
    if 1 in degrees:
        R = build_space(mesh, "regge", 1)
        g = regge_interpolate(metric, R)
        V = build_space(mesh, "lagrange", 2)
        out.append(CheckResult("integral representation k=1", verify_integral_representation(g, V, 20), 1e-6))
    return out
