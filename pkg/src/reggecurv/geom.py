"""Pointwise differential geometry of a planar metric.

Every kernel works on jets (values plus partial derivatives) and is
vectorized over arbitrary leading batch axes.  Index layout:

* ``g[..., i, j]``
* ``dg[..., k, i, j] = d_k g_ij``
* ``ddg[..., k, l, i, j] = d_k d_l g_ij``
* Christoffel symbols of the first kind ``G1[..., i, j, l] = Gamma_ijl``
* of the second kind ``G2[..., k, i, j] = Gamma^k_ij``

The Levi-Civita symbol has ``eps[0, 1] = 1``.  Edge tangents ``tau`` are
Euclidean unit vectors and ``nu = (-tau_2, tau_1)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

EPS = np.array([[0.0, 1.0], [-1.0, 0.0]])


class MetricError(ValueError):
    """A metric value that is not symmetric positive definite."""


@dataclass
class TensorJet:
    """Values and derivatives of a symmetric 2-tensor field at a batch of points."""

    g: np.ndarray
    dg: Optional[np.ndarray] = None
    ddg: Optional[np.ndarray] = None

    def __add__(self, other: "TensorJet") -> "TensorJet":
        return TensorJet(*(None if a is None or b is None else a + b
                           for a, b in ((self.g, other.g), (self.dg, other.dg), (self.ddg, other.ddg))))

    def __sub__(self, other: "TensorJet") -> "TensorJet":
        return self + other.scaled(-1.0)

    def scaled(self, c: float) -> "TensorJet":
        return TensorJet(*(None if a is None else c * a for a in (self.g, self.dg, self.ddg)))

    def take(self, index) -> "TensorJet":
        return TensorJet(*(None if a is None else a[index] for a in (self.g, self.dg, self.ddg)))

    def reshape_batch(self, shape) -> "TensorJet":
        nb = len(self.shape)
        return TensorJet(*(None if a is None else a.reshape(tuple(shape) + a.shape[nb:])
                           for a in (self.g, self.dg, self.ddg)))

    @property
    def shape(self):
        return self.g.shape[:-2]


MetricJet = TensorJet
SigmaJet = TensorJet


# ---------------------------------------------------------------- algebra

def det2(a: np.ndarray) -> np.ndarray:
    return a[..., 0, 0] * a[..., 1, 1] - a[..., 0, 1] * a[..., 1, 0]


def adj2(a: np.ndarray) -> np.ndarray:
    """Adjugate, so that ``a @ adj2(a) = det2(a) I``."""
    out = np.empty_like(a)
    out[..., 0, 0] = a[..., 1, 1]
    out[..., 1, 1] = a[..., 0, 0]
    out[..., 0, 1] = -a[..., 0, 1]
    out[..., 1, 0] = -a[..., 1, 0]
    return out


def inv2(a: np.ndarray) -> np.ndarray:
    return adj2(a) / det2(a)[..., None, None]


def check_spd(g: np.ndarray, what: str = "metric", tol: float = 0.0) -> None:
    d = det2(g)
    tr = g[..., 0, 0] + g[..., 1, 1]
    bad = ~((d > tol) & (tr > 0))
    if np.any(bad):
        idx = np.argwhere(bad)[0]
        raise MetricError(f"{what} is not positive definite at batch index {tuple(int(i) for i in idx)}")


def inner(g, a, b):
    """g(a, b) for batched vectors."""
    return np.einsum("...i,...ij,...j->...", a, g, b)


def _inv_derivative(ginv, dg):
    # d_k g^{-1} = -g^{-1} d_k g g^{-1}
    return -np.einsum("...ab,...kbc,...cd->...kad", ginv, dg, ginv)


def _inv_second_derivative(ginv, dg, ddg):
    a_dk = np.einsum("...ab,...kbc->...kac", ginv, dg)  # A d_k g
    first = np.einsum("...kab,...lbc,...cd->...klad", a_dk, a_dk, ginv)
    return first + np.swapaxes(first, -4, -3) - np.einsum(
        "...ab,...klbc,...cd->...klad", ginv, ddg, ginv)


# ------------------------------------------------------------ Christoffel

def christoffel_first(j: TensorJet) -> np.ndarray:
    """Gamma_ijl = 1/2 (d_i g_jl + d_j g_li - d_l g_ij)."""
    dg = j.dg
    return 0.5 * (dg + np.einsum("...jli->...ijl", dg) - np.einsum("...lij->...ijl", dg))


def christoffel_second(j: TensorJet) -> np.ndarray:
    """Gamma^k_ij = g^{kl} Gamma_ijl, stored as ``[..., k, i, j]``."""
    return np.einsum("...kl,...ijl->...kij", inv2(j.g), christoffel_first(j))


def christoffel_first_derivative(j: TensorJet) -> np.ndarray:
    """d_m Gamma_ijl stored as ``[..., m, i, j, l]``."""
    ddg = j.ddg
    # ddg[..., m, k, a, b] = d_m d_k g_ab
    t1 = ddg  # m, i, (j, l)
    t2 = np.einsum("...mjli->...mijl", ddg)  # d_m d_j g_li
    t3 = np.einsum("...mlij->...mijl", ddg)  # d_m d_l g_ij
    return 0.5 * (t1 + t2 - t3)


def christoffel_second_derivative(j: TensorJet) -> np.ndarray:
    """d_m Gamma^k_ij stored as ``[..., m, k, i, j]``."""
    ginv = inv2(j.g)
    dginv = _inv_derivative(ginv, j.dg)
    return (np.einsum("...mkl,...ijl->...mkij", dginv, christoffel_first(j))
            + np.einsum("...kl,...mijl->...mkij", ginv, christoffel_first_derivative(j)))


def riemann_1221(j: TensorJet) -> np.ndarray:
    G1 = christoffel_first(j)
    G2 = christoffel_second(j)
    dG1 = christoffel_first_derivative(j)
    # R_ijkl = d_i G_jkl - d_j G_ikl - G_ilp G^p_jk + G_jlp G^p_ik with (i,j,k,l) = (1,2,2,1)
    return (dG1[..., 0, 1, 1, 0] - dG1[..., 1, 0, 1, 0]
            - np.einsum("...p,...p->...", G1[..., 0, 0, :], G2[..., :, 1, 1])
            + np.einsum("...p,...p->...", G1[..., 1, 0, :], G2[..., :, 0, 1]))


def gauss_curvature(j: TensorJet) -> np.ndarray:
    """K = R_1221 / det g."""
    return riemann_1221(j) / det2(j.g)


# ------------------------------------------------------------------ edges

@dataclass
class EdgeFrame:
    tau: np.ndarray
    nu: np.ndarray
    nu_g: np.ndarray
    gt: np.ndarray
    gn: np.ndarray


def edge_frame(g: np.ndarray, tau: np.ndarray) -> EdgeFrame:
    """Euclidean and metric tangent/normal pairs along a straight edge."""
    tau = np.broadcast_to(tau, g.shape[:-1])
    nu = np.stack([-tau[..., 1], tau[..., 0]], axis=-1)
    nu_g = np.einsum("...ij,...j->...i", inv2(g), nu)
    gtt = inner(g, tau, tau)
    gt = tau / np.sqrt(gtt)[..., None]
    gn = nu_g / np.sqrt(inner(g, nu_g, nu_g))[..., None]
    return EdgeFrame(tau, nu, nu_g, gt, gn)


def christoffel_nu_tau_tau(j: TensorJet, tau: np.ndarray) -> np.ndarray:
    """Gamma^nu_tautau = tau^i tau^j Gamma^k_ij nu_k with the Euclidean normal."""
    tau = np.broadcast_to(tau, j.g.shape[:-1])
    nu = np.stack([-tau[..., 1], tau[..., 0]], axis=-1)
    return np.einsum("...kij,...i,...j,...k->...", christoffel_second(j), tau, tau, nu)


def geodesic_curvature_weight(j: TensorJet, tau: np.ndarray) -> np.ndarray:
    """kappa(g) sqrt(g_tautau) = sqrt(det g) / g_tautau * Gamma^nu_tautau on a straight edge."""
    tau = np.broadcast_to(tau, j.g.shape[:-1])
    return np.sqrt(det2(j.g)) / inner(j.g, tau, tau) * christoffel_nu_tau_tau(j, tau)


def geodesic_curvature(j: TensorJet, tau: np.ndarray) -> np.ndarray:
    tau = np.broadcast_to(tau, j.g.shape[:-1])
    return geodesic_curvature_weight(j, tau) / np.sqrt(inner(j.g, tau, tau))


def _norm_g(g, a):
    n = np.sqrt(inner(g, a, a))
    if np.any(n == 0):
        raise ValueError("zero vector")
    return n


def signed_angle(g, a, b) -> np.ndarray:
    """Counterclockwise g-angle from ``b`` to ``a`` in (-pi, pi]."""
    g = np.asarray(g, dtype=float)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    na = _norm_g(g, a)
    nb = _norm_g(g, b)
    cos = inner(g, a, b) / (na * nb)
    sin = np.sqrt(det2(g)) * (b[..., 0] * a[..., 1] - b[..., 1] * a[..., 0]) / (na * nb)
    theta = np.arctan2(sin, cos)
    return np.where(theta <= -np.pi, theta + 2 * np.pi, theta)


def principal_value(theta) -> np.ndarray:
    """Reduce angles to (-pi, pi]."""
    r = np.mod(np.asarray(theta) + np.pi, 2 * np.pi) - np.pi
    return np.where(r <= -np.pi, r + 2 * np.pi, r)


def interior_angle(g, tau_in, tau_out) -> np.ndarray:
    """Angle at a corner entered along ``tau_in`` and left along ``tau_out``."""
    g = np.asarray(g, dtype=float)
    a = -np.asarray(tau_in, dtype=float)
    b = np.asarray(tau_out, dtype=float)
    c = inner(g, a, b) / (_norm_g(g, a) * _norm_g(g, b))
    return np.arccos(np.clip(c, -1.0, 1.0))


def normal_tangent_component(g, s, tau) -> np.ndarray:
    """sigma(gn, gt) = nu^T adj(g) sigma tau / (sqrt(det g) g_tautau)."""
    tau = np.broadcast_to(tau, g.shape[:-1])
    nu = np.stack([-tau[..., 1], tau[..., 0]], axis=-1)
    num = np.einsum("...i,...ij,...jk,...k->...", nu, adj2(g), s, tau)
    return num / (np.sqrt(det2(g)) * inner(g, tau, tau))


def normal_tangent_component_derivative(j: TensorJet, s: TensorJet, tau) -> np.ndarray:
    """Directional derivative of sigma(gn, gt) along ``tau`` (frozen Euclidean tau)."""
    g = j.g
    tau = np.broadcast_to(tau, g.shape[:-1])
    nu = np.stack([-tau[..., 1], tau[..., 0]], axis=-1)
    dg_t = np.einsum("...k,...kij->...ij", tau, j.dg)
    ds_t = np.einsum("...k,...kij->...ij", tau, s.dg)
    adj = adj2(g)
    num = np.einsum("...i,...ij,...jk,...k->...", nu, adj, s.g, tau)
    dnum = (np.einsum("...i,...ij,...jk,...k->...", nu, adj2(dg_t), s.g, tau)
            + np.einsum("...i,...ij,...jk,...k->...", nu, adj, ds_t, tau))
    sq = np.sqrt(det2(g))
    dsq = 0.5 * sq * np.einsum("...ij,...ji->...", inv2(g), dg_t)
    gtt = inner(g, tau, tau)
    dgtt = inner(dg_t, tau, tau)
    den = sq * gtt
    return dnum / den - num * (dsq * gtt + sq * dgtt) / den ** 2


# ----------------------------------------------------------------- frames

def spd_sqrt(g: np.ndarray) -> np.ndarray:
    """Principal square root of a 2x2 SPD matrix in closed form."""
    s = np.sqrt(det2(g))
    t = np.sqrt(g[..., 0, 0] + g[..., 1, 1] + 2 * s)
    return (g + s[..., None, None] * np.eye(2)) / t[..., None, None]


def spd_sqrt_derivative(j: TensorJet) -> np.ndarray:
    """d_k B for B = g^{1/2}, stored as ``[..., k, 2, 2]``."""
    g, dg = j.g, j.dg
    s = np.sqrt(det2(g))
    ds = 0.5 * s[..., None] * np.einsum("...ij,...kji->...k", inv2(g), dg)
    t = g[..., 0, 0] + g[..., 1, 1] + 2 * s
    dt = dg[..., 0, 0] + dg[..., 1, 1] + 2 * ds
    rt = np.sqrt(t)
    num = g + s[..., None, None] * np.eye(2)
    dnum = dg + ds[..., None, None] * np.eye(2)
    return (dnum / rt[..., None, None, None]
            - 0.5 * num[..., None, :, :] * (dt / (t * rt)[..., None])[..., None, None])


def frame(j: TensorJet) -> tuple[np.ndarray, np.ndarray]:
    """g-orthonormal frame e_i = g^{-1/2} E_i and its derivatives.

    Returns ``e[..., i, a]`` (component ``a`` of ``e_i``) and
    ``de[..., k, i, a] = d_k e_i^a``.
    """
    B = spd_sqrt(j.g)
    Binv = inv2(B)
    e = np.swapaxes(Binv, -1, -2)
    de = None
    if j.dg is not None:
        dB = spd_sqrt_derivative(j)
        dBinv = -np.einsum("...ab,...kbc,...cd->...kad", Binv, dB, Binv)
        de = np.swapaxes(dBinv, -1, -2)
    return e, de


def connection_coefficients(j: TensorJet) -> np.ndarray:
    """omega_i = g(e_1, nabla_i e_2) in the frame of :func:`frame`."""
    e, de = frame(j)
    G2 = christoffel_second(j)
    e1, e2 = e[..., 0, :], e[..., 1, :]
    de1, de2 = de[..., :, 0, :], de[..., :, 1, :]
    cov2 = de2 + np.einsum("...jli,...l->...ij", G2, e2)
    cov1 = de1 + np.einsum("...jli,...l->...ij", G2, e1)
    return 0.5 * (np.einsum("...jk,...ij,...k->...i", j.g, cov2, e1)
                  - np.einsum("...jk,...ij,...k->...i", j.g, cov1, e2))


# ------------------------------------------------------ covariant operators

def curl_sigma(s: TensorJet) -> np.ndarray:
    """Row-wise Euclidean curl [curl sigma]_i = eps^{jk} d_j sigma_ik."""
    return np.einsum("jk,...jik->...i", EPS, s.dg)


def curl_g_sigma(j: TensorJet, s: TensorJet) -> np.ndarray:
    """Covariant curl of a symmetric tensor as the coefficients of a 1-form."""
    G2 = christoffel_second(j)
    corr = np.einsum("jk,...mji,...mk->...i", EPS, G2, s.g)
    return (curl_sigma(s) - corr) / np.sqrt(det2(j.g))[..., None]


def inc_g_sigma(j: TensorJet, s: TensorJet) -> np.ndarray:
    """Covariant incompatibility of ``s`` (needs second derivatives)."""
    G2 = christoffel_second(j)
    dG2 = christoffel_second_derivative(j)
    detg = det2(j.g)
    # Euclidean part eps^{qi} eps^{jk} d_j d_q sigma_ik
    euclid = np.einsum("qi,jk,...jqik->...", EPS, EPS, s.ddg)
    # eps^{qi} eps^{jk} d_q(Gamma^m_ji sigma_mk)
    d_gs = (np.einsum("...qmji,...mk->...qjik", dG2, s.g)
            + np.einsum("...mji,...qmk->...qjik", G2, s.dg))
    middle = np.einsum("qi,jk,...qjik->...", EPS, EPS, d_gs)
    # Gamma^l_lq = d_q det g / (2 det g)
    ddet = (j.dg[..., :, 0, 0] * j.g[..., None, 1, 1] + j.g[..., None, 0, 0] * j.dg[..., :, 1, 1]
            - 2 * j.g[..., None, 0, 1] * j.dg[..., :, 0, 1])
    trace_gamma = ddet / (2 * detg[..., None])
    inner_term = s.dg - np.einsum("...mji,...mk->...jik", G2, s.g)  # [j, i, k]
    last = np.einsum("...q,qi,jk,...jik->...", trace_gamma, EPS, EPS, inner_term)
    return (euclid - middle - last) / detg


def rot_scalar(du: np.ndarray) -> np.ndarray:
    """Euclidean rot u = (d_2 u, -d_1 u)."""
    return np.einsum("kp,...p->...k", EPS, du)


def rot_g_scalar(j: TensorJet, du: np.ndarray) -> np.ndarray:
    """(rot_g u)^k = eps^{kp} d_p u / sqrt(det g)."""
    return rot_scalar(du) / np.sqrt(det2(j.g))[..., None]


def rot_g_vector(j: TensorJet, X: np.ndarray, dX: np.ndarray) -> np.ndarray:
    """Tensor ``T[..., m, p] = eps^{pi} (d_i X^m + Gamma^m_ik X^k) / sqrt(det g)``.

    ``dX[..., i, m] = d_i X^m``.
    """
    G2 = christoffel_second(j)
    cov = np.swapaxes(dX, -1, -2) + np.einsum("...mik,...k->...mi", G2, X)
    return np.einsum("pi,...mi->...mp", EPS, cov) / np.sqrt(det2(j.g))[..., None, None]


def raise_both(g: np.ndarray, s: np.ndarray) -> np.ndarray:
    ginv = inv2(g)
    return ginv @ s @ ginv


def div_g_tensor(j: TensorJet, s: TensorJet) -> np.ndarray:
    """(div_g sigma)^i = d_j sigma^{ij} + Gamma^i_lj sigma^{lj} + Gamma^j_jl sigma^{il}."""
    X, _ = div_g_tensor_jet(j, s, with_derivative=False)
    return X


def div_g_tensor_jet(j: TensorJet, s: TensorJet, with_derivative: bool = True):
    """Divergence of a symmetric tensor and, optionally, its first partials.

    Returns ``X[..., i]`` and ``dX[..., m, i] = d_m X^i``.
    """
    A = inv2(j.g)
    dA = _inv_derivative(A, j.dg)
    up = A @ s.g @ A
    # d_m sigma^{ij}
    dup = (np.einsum("...mab,...bc,...cd->...mad", dA, s.g, A)
           + np.einsum("...ab,...mbc,...cd->...mad", A, s.dg, A)
           + np.einsum("...ab,...bc,...mcd->...mad", A, s.g, dA))
    G2 = christoffel_second(j)
    trG = np.einsum("...jjl->...l", G2)
    X = (np.einsum("...jij->...i", dup)
         + np.einsum("...ilj,...lj->...i", G2, up)
         + np.einsum("...l,...il->...i", trG, up))
    if not with_derivative:
        return X, None
    ddA = _inv_second_derivative(A, j.dg, j.ddg)
    ddup = (np.einsum("...mnab,...bc,...cd->...mnad", ddA, s.g, A)
            + np.einsum("...ab,...mnbc,...cd->...mnad", A, s.ddg, A)
            + np.einsum("...ab,...bc,...mncd->...mnad", A, s.g, ddA)
            + np.einsum("...mab,...nbc,...cd->...mnad", dA, s.dg, A)
            + np.einsum("...nab,...mbc,...cd->...mnad", dA, s.dg, A)
            + np.einsum("...mab,...bc,...ncd->...mnad", dA, s.g, dA)
            + np.einsum("...nab,...bc,...mcd->...mnad", dA, s.g, dA)
            + np.einsum("...ab,...mbc,...ncd->...mnad", A, s.dg, dA)
            + np.einsum("...ab,...nbc,...mcd->...mnad", A, s.dg, dA))
    dG2 = christoffel_second_derivative(j)
    dtrG = np.einsum("...mjjl->...ml", dG2)
    dX = (np.einsum("...mjij->...mi", ddup)
          + np.einsum("...milj,...lj->...mi", dG2, up)
          + np.einsum("...ilj,...mlj->...mi", G2, dup)
          + np.einsum("...ml,...il->...mi", dtrG, up)
          + np.einsum("...l,...mil->...mi", trG, dup))
    return X, dX


def div_g_vector(j: TensorJet, X: np.ndarray, dX: np.ndarray) -> np.ndarray:
    """div_g X = d_i X^i + Gamma^l_li X^i; ``dX[..., m, i] = d_m X^i``."""
    G2 = christoffel_second(j)
    return np.einsum("...ii->...", dX) + np.einsum("...lli,...i->...", G2, X)


def trace_reverse(j: TensorJet, s: TensorJet) -> TensorJet:
    """Jet of S_g sigma = sigma - tr_g(sigma) g."""
    A = inv2(j.g)
    tr = np.einsum("...ij,...ij->...", A, s.g)
    out_g = s.g - tr[..., None, None] * j.g
    out_dg = out_ddg = None
    if s.dg is not None:
        dA = _inv_derivative(A, j.dg)
        dtr = (np.einsum("...mij,...ij->...m", dA, s.g)
               + np.einsum("...ij,...mij->...m", A, s.dg))
        out_dg = s.dg - dtr[..., :, None, None] * j.g[..., None, :, :] - tr[..., None, None, None] * j.dg
        if s.ddg is not None:
            ddA = _inv_second_derivative(A, j.dg, j.ddg)
            ddtr = (np.einsum("...mnij,...ij->...mn", ddA, s.g)
                    + np.einsum("...mij,...nij->...mn", dA, s.dg)
                    + np.einsum("...nij,...mij->...mn", dA, s.dg)
                    + np.einsum("...ij,...mnij->...mn", A, s.ddg))
            out_ddg = (s.ddg - ddtr[..., None, None] * j.g[..., None, None, :, :]
                       - dtr[..., :, None, None, None] * j.dg[..., None, :, :, :]
                       - dtr[..., None, :, None, None] * j.dg[..., :, None, :, :]
                       - tr[..., None, None, None, None] * j.ddg)
    return TensorJet(out_g, out_dg, out_ddg)


def hodge_flat(g: np.ndarray, X: np.ndarray) -> np.ndarray:
    """Coefficients of the 1-form star(X^flat): sqrt(det g) X^j eps_jk."""
    return np.sqrt(det2(g))[..., None] * np.einsum("...j,jk->...k", X, EPS)
