"""Sparse storage, products and the residual-checked linear solve."""
from __future__ import annotations

import numpy as np
import scipy.io
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import _kernels

__all__ = [
    "SolveError",
    "SingularMatrixError",
    "ResidualContractError",
    "csr_from_coo",
    "spmv",
    "Factorization",
    "SaddleSolver",
    "solve",
    "relative_residual",
    "write_matrix_market",
    "RESIDUAL_TOL",
]

RESIDUAL_TOL = 1e-10


class SolveError(RuntimeError):
    pass


class SingularMatrixError(SolveError):
    pass


class ResidualContractError(SolveError):
    pass


def csr_from_coo(rows, cols, vals, shape) -> sp.csr_matrix:
    """Merge triplets into CSR with sorted column indices and no duplicates."""
    A = sp.csr_matrix((vals, (rows, cols)), shape=shape)
    A.sum_duplicates()
    A.sort_indices()
    return A


def spmv(A, x) -> np.ndarray:
    """``A @ x`` with each row summed left to right."""
    A = sp.csr_matrix(A)
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or A.shape[1] != len(x):
        raise ValueError(f"dimension mismatch: matrix {A.shape} times vector {x.shape}")
    A.sort_indices()
    return _kernels.csr_spmv(A.indptr, A.indices, A.data, x)


def relative_residual(A, x, b) -> float:
    r = b - A @ x
    return float(np.linalg.norm(r) / max(np.linalg.norm(b), 1.0))


class Factorization:
    """Sparse LU (partial pivoting, COLAMD ordering) with a checked solve.

    Every solve verifies ``||Ax - b|| / max(||b||, 1) <= tol``, applying up
    to `refine` steps of iterative refinement before giving up.
    """

    def __init__(self, A, tol: float = RESIDUAL_TOL, refine: int = 3):
        A = sp.csc_matrix(A)
        if A.shape[0] != A.shape[1]:
            raise ValueError(f"matrix must be square, got {A.shape}")
        if not np.all(np.isfinite(A.data)):
            raise ValueError("matrix has non-finite entries")
        self.A = A.tocsr()
        self.tol = tol
        self.refine = refine
        try:
            self._lu = spla.splu(A, permc_spec="COLAMD", diag_pivot_thresh=1.0)
        except RuntimeError as exc:
            # SuperLU reports "Factor is exactly singular" with the pivot index
            raise SingularMatrixError(f"LU factorization failed: {exc}") from exc
        diag = np.abs(self._lu.U.diagonal())
        if diag.size and diag.min() <= np.finfo(float).eps * diag.max():
            k = int(np.argmin(diag))
            raise SingularMatrixError(
                f"matrix singular to working precision (pivot {k}, |u_kk| = {diag[k]:.3e})"
            )
        self.last_residual = np.nan

    @property
    def shape(self):
        return self.A.shape

    def solve(self, b) -> np.ndarray:
        b = np.asarray(b, dtype=float)
        if b.shape != (self.A.shape[0],):
            raise ValueError(f"rhs has shape {b.shape}, expected ({self.A.shape[0]},)")
        if not np.all(np.isfinite(b)):
            raise ValueError("right-hand side has non-finite entries")
        scale = max(np.linalg.norm(b), 1.0)
        x = self._lu.solve(b)
        res = np.linalg.norm(b - self.A @ x) / scale
        it = 0
        while res > self.tol and it < self.refine:
            x = x + self._lu.solve(b - self.A @ x)
            res = np.linalg.norm(b - self.A @ x) / scale
            it += 1
        self.last_residual = float(res)
        if not np.isfinite(res) or res > self.tol:
            raise ResidualContractError(
                f"relative residual {res:.3e} exceeds {self.tol:.1e} after {it} refinement steps"
            )
        return x


def _splu(A):
    try:
        lu = spla.splu(sp.csc_matrix(A), permc_spec="COLAMD", diag_pivot_thresh=1.0)
    except RuntimeError as exc:
        raise SingularMatrixError(f"LU factorization failed: {exc}") from exc
    diag = np.abs(lu.U.diagonal())
    if diag.size and diag.min() <= np.finfo(float).eps * diag.max():
        k = int(np.argmin(diag))
        raise SingularMatrixError(
            f"matrix singular to working precision (pivot {k}, |u_kk| = {diag[k]:.3e})"
        )
    return lu


class SaddleSolver:
    """Direct solver for the bordered mixed system with element bubbles.

    Expects the layout ``[velocity | pressure | mean]`` where the last
    row/column is the pressure-mean border and the rows in `pressure` sum to
    zero over all velocity columns (constant pressures are in the kernel of
    the divergence block). Internally:

    * the bubble unknowns, coupled only within their own element, are
      eliminated through their 2x2 diagonal blocks;
    * the border is removed by fixing one pressure value, then restored by
      computing the mean multiplier from the summed pressure rows and
      shifting the pressure by a constant;
    * the remaining matrix is factorised by sparse LU.

    Every solve is checked against the full matrix like `Factorization`.
    After `update`, the previous factors are first tried as a preconditioner
    for iterative refinement and only rebuilt when that stalls.
    """

    def __init__(self, A, bubble_pairs, pressure: slice, tol: float = RESIDUAL_TOL,
                 refine: int = 3, reuse_steps: int = 4):
        self.bubbles = np.asarray(bubble_pairs, dtype=np.int64).reshape(-1, 2)
        self.pressure = pressure
        self.tol = tol
        self.refine = refine
        self.reuse_steps = reuse_steps
        self.n_factorizations = 0
        self.last_residual = np.nan
        self.last_refinements = 0
        self._set_matrix(A)
        self._factor()

    def _set_matrix(self, A):
        A = sp.csr_matrix(A)
        if A.shape[0] != A.shape[1]:
            raise ValueError(f"matrix must be square, got {A.shape}")
        if not np.all(np.isfinite(A.data)):
            raise ValueError("matrix has non-finite entries")
        A.sort_indices()
        self.A = A

    @property
    def shape(self):
        return self.A.shape

    def update(self, A) -> None:
        """Swap in a new matrix with the same structure; factors kept for reuse."""
        A = sp.csr_matrix(A)
        if A.shape != self.A.shape:
            raise ValueError(f"matrix shape changed from {self.A.shape} to {A.shape}")
        self._set_matrix(A)
        self._stale = True

    def _factor(self):
        A = self.A
        N = A.shape[0]
        b = self.bubbles.ravel()
        mask = np.ones(N, dtype=bool)
        mask[b] = False
        mask[N - 1] = False
        rest = np.flatnonzero(mask)
        nb = len(self.bubbles)

        Abb = A[b][:, b].tocsr()
        blk = np.zeros((nb, 2, 2))
        e = 2 * np.arange(nb)
        for i in range(2):
            for j in range(2):
                blk[:, i, j] = np.asarray(Abb[e + i, e + j]).ravel()
        if abs(Abb.sum() - blk.sum()) > 1e-12 * max(abs(Abb).sum(), 1.0) or Abb.nnz > 4 * nb:
            raise ValueError("bubble unknowns are coupled across elements")
        det = blk[:, 0, 0] * blk[:, 1, 1] - blk[:, 0, 1] * blk[:, 1, 0]
        scale = np.abs(blk).reshape(nb, 4).max(axis=1)
        if nb and np.any(np.abs(det) <= np.finfo(float).eps * scale**2):
            k = int(np.argmin(np.abs(det) / np.maximum(scale**2, 1e-300)))
            raise SingularMatrixError(f"singular bubble block in element {k}")
        inv = np.empty_like(blk)
        inv[:, 0, 0] = blk[:, 1, 1] / det
        inv[:, 1, 1] = blk[:, 0, 0] / det
        inv[:, 0, 1] = -blk[:, 0, 1] / det
        inv[:, 1, 0] = -blk[:, 1, 0] / det
        Binv = sp.bsr_matrix((inv, np.arange(nb), np.arange(nb + 1)), shape=(2 * nb, 2 * nb))
        Binv = Binv.tocsr()

        Ar = A[rest]
        Arr = Ar[:, rest]
        Arb = Ar[:, b]
        Abr = A[b][:, rest]
        S = (Arr - Arb @ (Binv @ Abr)).tocsr()

        p0, p1 = self.pressure.start, self.pressure.stop
        border = np.asarray(A[p0:p1, N - 1].todense()).ravel()
        if np.any(np.asarray(A[N - 1, :p0].todense()) != 0):
            raise ValueError("mean border must only touch pressure unknowns")
        col_sums = np.asarray(A[p0:p1, : N - 1].sum(axis=0)).ravel()
        if np.abs(col_sums).max(initial=0.0) > 1e-10 * max(abs(A).max(), 1.0):
            raise ValueError("pressure rows do not annihilate constants")
        # pin the first pressure unknown
        pos = np.searchsorted(rest, p0)
        keep = np.ones(len(rest))
        keep[pos] = 0.0
        Dk = sp.diags(keep)
        S = (Dk @ S @ Dk + sp.csr_matrix(([1.0], ([pos], [pos])), shape=S.shape)).tocsc()

        self._lu = _splu(S)
        self._rest, self._b, self._pin = rest, b, pos
        self._Binv, self._Arb, self._Abr = Binv, Arb, Abr
        self._border = border
        self._border_sum = float(border.sum())
        self._border_row = np.asarray(A[N - 1, p0:p1].todense()).ravel()
        self.n_factorizations += 1
        self._stale = False

    def _apply_inverse(self, r):
        """Exact solve with the matrix the current factors were built from."""
        N = len(r)
        p0, p1 = self.pressure.start, self.pressure.stop
        zeta = r[p0:p1].sum() / self._border_sum
        r = r.copy()
        r[p0:p1] -= self._border * zeta
        rb = r[self._b]
        tb = self._Binv @ rb
        rr = r[self._rest] - self._Arb @ tb
        rr[self._pin] = 0.0
        xr = self._lu.solve(rr)
        xb = tb - self._Binv @ (self._Abr @ xr)
        x = np.empty(N)
        x[self._rest] = xr
        x[self._b] = xb
        # the border row fixes the constant; r[-1] is its target value
        p = x[p0:p1]
        x[p0:p1] = p + (r[-1] - self._border_row @ p) / (self._border_row.sum())
        x[-1] = zeta
        return x

    def _refined(self, b, steps):
        scale = max(np.linalg.norm(b), 1.0)
        x = self._apply_inverse(b)
        res = np.linalg.norm(b - self.A @ x) / scale
        it = 0
        while res > self.tol and it < steps:
            x = x + self._apply_inverse(b - self.A @ x)
            res = np.linalg.norm(b - self.A @ x) / scale
            it += 1
        return x, float(res), it

    def solve(self, b) -> np.ndarray:
        b = np.asarray(b, dtype=float)
        if b.shape != (self.A.shape[0],):
            raise ValueError(f"rhs has shape {b.shape}, expected ({self.A.shape[0]},)")
        if not np.all(np.isfinite(b)):
            raise ValueError("right-hand side has non-finite entries")
        if self._stale:
            x, res, it = self._refined(b, self.reuse_steps)
            if np.isfinite(res) and res <= self.tol and it <= 2:
                self.last_residual, self.last_refinements = res, it
                return x
            self._factor()
        x, res, it = self._refined(b, self.refine)
        self.last_residual, self.last_refinements = res, it
        if not np.isfinite(res) or res > self.tol:
            raise ResidualContractError(
                f"relative residual {res:.3e} exceeds {self.tol:.1e} after {it} refinement steps"
            )
        return x


def solve(A, b, tol: float = RESIDUAL_TOL) -> np.ndarray:
    """Solve ``A x = b``; raises `SolveError` subclasses on failure."""
    return Factorization(A, tol=tol).solve(b)


def write_matrix_market(A, path, comment: str = "") -> None:
    scipy.io.mmwrite(str(path), sp.coo_matrix(A), comment=comment, field="real", symmetry="general")
