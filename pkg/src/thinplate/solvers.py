"""Linear solvers for the constrained SPD stiffness systems."""

import logging
import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

log = logging.getLogger(__name__)


class SolverError(RuntimeError):
    """Raised when a linear solve fails or does not converge."""


@dataclass(frozen=True)
class SolverOptions:
    method: str = "direct"       # "direct" | "pcg"
    tol: float = 1e-12
    max_iter_factor: float = 50.0
    dense_below: int = 2000      # pcg falls back to a dense solve below this size
    refine_steps: int = 2

    def __post_init__(self):
        if self.method not in ("direct", "pcg"):
            raise ValueError(f"unknown solver method {self.method!r}")


def pcg(A, b, tol=1e-12, max_iter=None, M_inv=None):
    """Preconditioned conjugate gradient; returns (x, iterations).

    ``M_inv`` is the inverse of a diagonal preconditioner given as a vector
    (defaults to Jacobi). Stops when ||b - Ax|| <= tol * ||b||.
    """
    n = b.shape[0]
    if max_iter is None:
        max_iter = 10 * n
    if M_inv is None:
        diag = A.diagonal()
        if np.any(diag <= 0):
            raise SolverError("matrix has a nonpositive diagonal entry")
        M_inv = 1.0 / diag
    x = np.zeros_like(b)
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return x, 0
    r = b.copy()
    z = M_inv * r
    p = z.copy()
    rz = r @ z
    for it in range(1, max_iter + 1):
        Ap = A @ p
        pAp = p @ Ap
        if pAp <= 0:
            raise SolverError("matrix is not positive definite (p.Ap <= 0)")
        alpha = rz / pAp
        x += alpha * p
        r -= alpha * Ap
        if np.linalg.norm(r) <= tol * bnorm:
            return x, it
        z = M_inv * r
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise SolverError(f"PCG did not converge in {max_iter} iterations "
                      f"(relative residual {np.linalg.norm(r) / bnorm:.3e})")


def solve_spd(A, b, options=SolverOptions()):
    """Solve A x = b for a sparse SPD matrix according to ``options``."""
    n = b.shape[0]
    if n == 0:
        return np.zeros(0)
    if options.method == "pcg" and n >= options.dense_below:
        cap = int(math.ceil(options.max_iter_factor * math.sqrt(n)))
        x, it = pcg(A, b, tol=options.tol, max_iter=cap)
        log.debug("pcg converged in %d iterations (n=%d)", it, n)
        return x
    if options.method == "pcg":
        try:
            return np.linalg.solve(A.toarray(), b)
        except np.linalg.LinAlgError as exc:
            raise SolverError(f"singular system: {exc}") from exc
    # symmetric Jacobi equilibration: thin plates mix O(1) and O(t^-2) scales
    d = A.diagonal()
    if np.any(d <= 0):
        raise SolverError("matrix has a nonpositive diagonal entry")
    s = 1.0 / np.sqrt(d)
    S = sp.diags(s)
    As = sp.csc_matrix(S @ A @ S)
    try:
        lu = spla.splu(As)
    except RuntimeError as exc:
        raise SolverError(f"singular system: {exc}") from exc
    y = lu.solve(s * b)
    for _ in range(options.refine_steps):
        y += lu.solve(s * (b - A @ (s * y)))
    x = s * y
    if not np.all(np.isfinite(x)):
        raise SolverError("direct solve produced non-finite values")
    return x
