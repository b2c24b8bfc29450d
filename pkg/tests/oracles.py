"""Independent reference computations used by the tests.

Everything here is computed with sympy or finite differences so that it
shares no code path with the package kernels.
"""

from __future__ import annotations

import numpy as np
import sympy as sp

from reggecurv.geom import TensorJet

x, y = sp.symbols("x y", real=True)
COORDS = (x, y)


def sym_tensor(a11, a12, a22):
    return sp.Matrix([[a11, a12], [a12, a22]])


def sym_jet(M: sp.Matrix, pts: np.ndarray) -> TensorJet:
    """Exact jet of a sympy 2x2 tensor field at ``pts`` (shape (n, 2))."""
    pts = np.atleast_2d(pts)
    n = len(pts)
    g = np.zeros((n, 2, 2))
    dg = np.zeros((n, 2, 2, 2))
    ddg = np.zeros((n, 2, 2, 2, 2))
    for i in range(2):
        for j in range(2):
            f = M[i, j]
            g[:, i, j] = _lam(f)(pts)
            for k in range(2):
                fk = sp.diff(f, COORDS[k])
                dg[:, k, i, j] = _lam(fk)(pts)
                for m in range(2):
                    ddg[:, k, m, i, j] = _lam(sp.diff(fk, COORDS[m]))(pts)
    return TensorJet(g, dg, ddg)


def _lam(f):
    fn = sp.lambdify((x, y), f, "numpy")
    return lambda p: np.broadcast_to(np.asarray(fn(p[:, 0], p[:, 1]), dtype=float), (len(p),)).copy()


def sym_christoffel(G: sp.Matrix):
    Ginv = G.inv()
    first = [[[sp.Rational(1, 2) * (sp.diff(G[j, l], COORDS[i]) + sp.diff(G[l, i], COORDS[j])
                                     - sp.diff(G[i, j], COORDS[l]))
               for l in range(2)] for j in range(2)] for i in range(2)]
    second = [[[sum(Ginv[k, l] * first[i][j][l] for l in range(2)) for j in range(2)]
               for i in range(2)] for k in range(2)]
    return first, second


def sym_gauss_curvature_brioschi(G: sp.Matrix):
    """Gauss curvature from the Brioschi formula (independent of Christoffel code)."""
    E, F, Gg = G[0, 0], G[0, 1], G[1, 1]
    Eu, Ev = sp.diff(E, x), sp.diff(E, y)
    Fu, Fv = sp.diff(F, x), sp.diff(F, y)
    Gu, Gv = sp.diff(Gg, x), sp.diff(Gg, y)
    Evv, Guu, Fuv = sp.diff(E, y, 2), sp.diff(Gg, x, 2), sp.diff(F, x, y)
    m1 = sp.Matrix([[-Evv / 2 + Fuv - Guu / 2, Eu / 2, Fu - Ev / 2],
                    [Fv - Gu / 2, E, F],
                    [Gv / 2, F, Gg]])
    m2 = sp.Matrix([[0, Ev / 2, Gu / 2], [Ev / 2, E, F], [Gu / 2, F, Gg]])
    return (m1.det() - m2.det()) / (E * Gg - F ** 2) ** 2


def fd_derivative(fun, t: float, h: float):
    """Central difference of ``fun`` at ``t``."""
    return (fun(t + h) - fun(t - h)) / (2 * h)


def random_spd(rng, n, scale=1.0):
    A = rng.normal(size=(n, 2, 2)) * 0.4
    return scale * (np.eye(2) + A @ np.swapaxes(A, -1, -2))


def random_sym(rng, shape):
    a = rng.normal(size=shape + (2, 2))
    return 0.5 * (a + np.swapaxes(a, -1, -2))


def random_jet(rng, n, spd=True) -> TensorJet:
    """Random consistent jet: symmetric in tensor and in derivative indices."""
    g = random_spd(rng, n) if spd else random_sym(rng, (n,))
    dg = random_sym(rng, (n, 2))
    ddg = random_sym(rng, (n, 2, 2))
    ddg = 0.5 * (ddg + np.swapaxes(ddg, 1, 2))
    return TensorJet(g, dg, ddg)


# the test metric used in the experiments
F_GRAPH = sp.Rational(1, 2) * (x ** 2 + y ** 2) - sp.Rational(1, 12) * (x ** 4 + y ** 4)


def graph_metric(f=F_GRAPH) -> sp.Matrix:
    fx, fy = sp.diff(f, x), sp.diff(f, y)
    return sp.Matrix([[1 + fx ** 2, fx * fy], [fx * fy, 1 + fy ** 2]])


K_EXACT = 81 * (1 - x ** 2) * (1 - y ** 2) / (9 + x ** 2 * (x ** 2 - 3) ** 2 + y ** 2 * (y ** 2 - 3) ** 2) ** 2
KAPPA_TOP = (-27 * (x ** 2 - 1) * y * (y ** 2 - 3)
             / ((x ** 2 * (x ** 2 - 3) ** 2 + 9) ** sp.Rational(3, 2)
                * sp.sqrt(x ** 2 * (x ** 2 - 3) ** 2 + y ** 2 * (y ** 2 - 3) ** 2 + 9)))
