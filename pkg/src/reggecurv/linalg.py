"""Sparse symmetric linear algebra for mass and stiffness systems."""

from __future__ import annotations

from typing import Optional

import numpy as np
import scipy.sparse as sps
import scipy.sparse.linalg as spla

DIRECT_LIMIT = 200_000


class SolverError(RuntimeError):
    pass


class NotSPDError(SolverError):
    def __init__(self, pivot: int):
        self.pivot = pivot
        super().__init__(f"matrix is not symmetric positive definite (pivot {pivot})")


def assemble(triplets, shape=None) -> sps.csr_matrix:
    """Sum ``(rows, cols, vals)`` triplets into a CSR matrix.

    Duplicates are summed in input order, so the result is reproducible.
    """
    rows, cols, vals = (np.asarray(a).ravel() for a in triplets)
    if shape is None:
        n = int(max(rows.max(), cols.max())) + 1 if len(rows) else 0
        shape = (n, n)
    A = sps.coo_matrix((vals.astype(float), (rows, cols)), shape=shape).tocsr()
    A.sum_duplicates()
    return A


def assemble_local(l2g_rows: np.ndarray, local: np.ndarray, n_rows: int,
                   l2g_cols: Optional[np.ndarray] = None, n_cols: Optional[int] = None) -> sps.csr_matrix:
    """Scatter element matrices ``local[e, a, b]`` with dof maps ``l2g[e, a]``."""
    if l2g_cols is None:
        l2g_cols, n_cols = l2g_rows, n_rows
    nr, nc = l2g_rows.shape[1], l2g_cols.shape[1]
    rows = np.broadcast_to(l2g_rows[:, :, None], (len(local), nr, nc))
    cols = np.broadcast_to(l2g_cols[:, None, :], (len(local), nr, nc))
    return assemble((rows, cols, local), shape=(n_rows, n_cols))


def scatter_vector(l2g: np.ndarray, local: np.ndarray, n: int) -> np.ndarray:
    """Sum element vectors ``local[e, a]`` into a global vector."""
    return np.bincount(l2g.ravel(), weights=np.asarray(local, dtype=float).ravel(), minlength=n)


class Factorization:
    """Sparse LU factorization of an SPD matrix with a positivity check.

    The factorization runs in symmetric mode without pivoting, so the
    diagonal of ``U`` carries the pivots of an LDL^T decomposition and a
    non-positive entry certifies that the matrix is not SPD.
    """

    def __init__(self, A):
        A = sps.csc_matrix(A)
        n = A.shape[0]
        self.shape = A.shape
        if n == 0:
            self._lu = None
            return
        try:
            lu = spla.splu(A, permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0,
                           options={"SymmetricMode": True})
        except RuntimeError as exc:  # exactly singular
            raise NotSPDError(-1) from exc
        d = lu.U.diagonal()
        bad = np.flatnonzero(~(d > 0))
        if len(bad):
            raise NotSPDError(int(lu.perm_c[bad[0]]))
        self._lu = lu

    def solve(self, b: np.ndarray) -> np.ndarray:
        if self._lu is None:
            return np.zeros_like(b, dtype=float)
        return self._lu.solve(np.asarray(b, dtype=float))


def cholesky_solve(A, b) -> np.ndarray:
    """Direct solve of an SPD system."""
    return Factorization(A).solve(b)


def cg_solve(A, b, tol: float = 1e-12, maxit: Optional[int] = None) -> np.ndarray:
    """Jacobi-preconditioned conjugate gradients; raises on non-convergence."""
    A = sps.csr_matrix(A)
    d = A.diagonal()
    if np.any(d <= 0):
        raise NotSPDError(int(np.flatnonzero(d <= 0)[0]))
    M = sps.diags(1.0 / d)
    if maxit is None:
        maxit = 10 * A.shape[0]
    x, info = spla.cg(A, b, rtol=tol, atol=0.0, maxiter=maxit, M=M)
    if info != 0:
        raise SolverError(f"CG did not converge (info={info})")
    return x


def constrain(A, b, essential: np.ndarray, values: np.ndarray):
    """Symmetric elimination of prescribed dofs.

    Returns ``(A_ff, b_f, free)`` where ``free`` indexes the remaining dofs
    and ``b_f = b[free] - A[free, ess] @ values[ess]``.
    """
    A = sps.csr_matrix(A)
    essential = np.asarray(essential, dtype=bool)
    free = np.flatnonzero(~essential)
    ess = np.flatnonzero(essential)
    b_f = np.asarray(b, dtype=float)[free] - A[free][:, ess] @ np.asarray(values, dtype=float)[ess]
    return A[free][:, free].tocsr(), b_f, free


def solve_spd(A, b, essential=None, values=None, factorization: Optional[Factorization] = None,
              method: str = "auto") -> np.ndarray:
    """Solve ``A x = b`` with optional prescribed entries of ``x``."""
    n = A.shape[0]
    if essential is None:
        essential = np.zeros(n, dtype=bool)
    if values is None:
        values = np.zeros(n)
    A_ff, b_f, free = constrain(A, b, essential, values)
    x = np.array(values, dtype=float, copy=True)
    x[~essential] = 0.0
    if method == "auto":
        method = "direct" if len(free) <= DIRECT_LIMIT else "cg"
    if factorization is not None:
        x[free] = factorization.solve(b_f)
    elif method == "direct":
        x[free] = cholesky_solve(A_ff, b_f)
    else:
        x[free] = cg_solve(A_ff, b_f)
    return x
