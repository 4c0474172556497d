"""Sparse assembly buffer and linear solve with residual verification."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla


class SolverError(RuntimeError):
    """Base class for linear-solve failures."""


class SingularSystemError(SolverError):
    pass


class StagnationError(SolverError):
    pass


class SparseSystem:
    """Triplet accumulator for a square system ``A x = b``.

    Entries added for the same (row, col) are summed on :meth:`finalize`.
    """

    def __init__(self, n: int):
        self.n = int(n)
        self._rows: list[np.ndarray] = []
        self._cols: list[np.ndarray] = []
        self._vals: list[np.ndarray] = []
        self.rhs = np.zeros(self.n)
        self._matrix: sp.csr_matrix | None = None

    def add(self, rows, cols, vals) -> None:
        if self._matrix is not None:
            raise RuntimeError("system already finalised")
        rows, cols, vals = np.broadcast_arrays(
            np.asarray(rows, dtype=np.int64), np.asarray(cols, dtype=np.int64), np.asarray(vals, dtype=float)
        )
        self._rows.append(rows.ravel())
        self._cols.append(cols.ravel())
        self._vals.append(vals.ravel())

    def add_rhs(self, rows, vals) -> None:
        np.add.at(self.rhs, np.asarray(rows, dtype=np.int64), vals)

    def triplets(self):
        if not self._rows:
            e = np.zeros(0, dtype=np.int64)
            return e, e, np.zeros(0)
        return np.concatenate(self._rows), np.concatenate(self._cols), np.concatenate(self._vals)

    def finalize(self) -> sp.csr_matrix:
        if self._matrix is None:
            r, c, v = self.triplets()
            if r.size and (r.min() < 0 or r.max() >= self.n or c.min() < 0 or c.max() >= self.n):
                raise IndexError("entry outside the system dimension")
            A = sp.coo_matrix((v, (r, c)), shape=(self.n, self.n)).tocsr()
            A.sum_duplicates()
            empty = np.flatnonzero(np.diff(A.indptr) == 0)
            if empty.size:
                raise SingularSystemError(f"{empty.size} empty equation rows (first: {empty[0]})")
            self._matrix = A
        return self._matrix

    @property
    def matrix(self) -> sp.csr_matrix:
        return self.finalize()


@dataclass(frozen=True)
class SolveReport:
    residual: float
    kind: str
    iterations: int

    def __post_init__(self):
        if not self.residual >= 0:
            raise ValueError("residual must be non-negative")


def relative_residual(A, x, b) -> float:
    bn = np.linalg.norm(b)
    r = np.linalg.norm(A @ x - b)
    return float(r / bn) if bn > 0 else float(r)


def factorize(A: sp.spmatrix):
    """Sparse LU of ``A``; raises :class:`SingularSystemError` on breakdown."""
    try:
        return spla.splu(sp.csc_matrix(A))
    except RuntimeError as exc:
        raise SingularSystemError(str(exc)) from exc


def solve_factored(lu, A, b, tol: float = 1e-10, max_refine: int = 3):
    """Solve with a precomputed factorisation plus iterative refinement."""
    x = lu.solve(b)
    if not np.all(np.isfinite(x)):
        raise SingularSystemError("non-finite solution (numerically singular matrix)")
    res = relative_residual(A, x, b)
    it = 0
    while res > tol and it < max_refine:
        x = x + lu.solve(b - A @ x)
        res = relative_residual(A, x, b)
        it += 1
    if res > tol:
        raise StagnationError(f"relative residual {res:.3e} above tolerance {tol:.1e}")
    return x, SolveReport(residual=res, kind="direct", iterations=it)


def _solve_iterative(A, b, tol):
    ilu = spla.spilu(sp.csc_matrix(A), drop_tol=1e-6, fill_factor=20)
    M = spla.LinearOperator(A.shape, ilu.solve)
    count = [0]

    def cb(_):
        count[0] += 1

    x, info = spla.gmres(A, b, M=M, rtol=tol, atol=0.0, restart=200, maxiter=50, callback=cb,
                         callback_type="pr_norm")
    res = relative_residual(A, x, b)
    if res > tol:
        raise StagnationError(f"GMRES stagnated at relative residual {res:.3e} (info={info})")
    return x, SolveReport(residual=res, kind="iterative", iterations=count[0])


def solve(system, tol: float = 1e-10, method: str = "direct"):
    """Solve ``system`` (a :class:`SparseSystem` or ``(A, b)``) to relative residual ``tol``.

    ``method="direct"`` uses SuperLU with up to three refinement sweeps;
    ``"iterative"`` uses ILU-preconditioned GMRES. Returns ``(x, SolveReport)``.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if isinstance(system, SparseSystem):
        A, b = system.finalize(), system.rhs
    else:
        A, b = system
        A = sp.csr_matrix(A)
        b = np.asarray(b, dtype=float)
    if A.shape[0] != A.shape[1] or A.shape[0] != b.shape[0]:
        raise ValueError("dimension mismatch")
    if method == "direct":
        return solve_factored(factorize(A), A, b, tol)
    if method == "iterative":
        return _solve_iterative(A, b, tol)
    raise ValueError(f"unknown solver method {method!r}")


def dump_matrix(A, path) -> None:
    """Coordinate-format text dump (``row col value`` per nonzero)."""
    from .io import atomic_write_text

    coo = sp.coo_matrix(A)
    order = np.lexsort((coo.col, coo.row))
    lines = [f"{coo.row[k]} {coo.col[k]} {coo.data[k]:.17e}" for k in order]
    atomic_write_text(path, "\n".join(lines) + "\n")
