"""Direct solvers for the saddle-point system and for SPD Gram matrices.

The saddle system is symmetric indefinite; it is factorized sparsely with
pivoting, bordered by the single Lagrange multiplier row that pins the
pressure mean on the interior submesh.  A dense Bunch-Kaufman path doubles as
a cross-check at small sizes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla


class SolverError(Exception):
    pass


@dataclass
class Solution:
    u: np.ndarray
    p: np.ndarray
    mu: float
    residual: float
    n_velocity: int
    n_pressure: int

    def as_vector(self):
        return np.concatenate([self.u, self.p, [self.mu]])


def solve(system, rtol=1e-10, dense=False):
    """Solve the bordered saddle system; the relative algebraic residual must
    meet rtol or a SolverError is raised.

    dense=True routes through a dense symmetric-indefinite (Bunch-Kaufman)
    factorization, used as an independent small-scale cross-check.
    """
    K = system.constrained_matrix()
    rhs = system.rhs()
    if dense:
        Kd = K.toarray()
        lu, d, perm = sla.ldl(Kd)
        # solve L D L^T x = b with the permuted unit-lower factor
        Lp = lu[perm]
        z = sla.solve_triangular(Lp, rhs[perm], lower=True, unit_diagonal=True)
        # d is block diagonal with 1x1/2x2 blocks
        w = np.linalg.solve(d, z)
        x = np.empty_like(rhs)
        x[perm] = sla.solve_triangular(Lp.T, w, lower=False, unit_diagonal=True)
    else:
        try:
            lu = spla.splu(K.tocsc())
        except RuntimeError as exc:
            raise SolverError(f"singular saddle factorization: {exc}") from exc
        x = lu.solve(rhs)

    rnorm = np.linalg.norm(K @ x - rhs)
    scale = np.linalg.norm(rhs)
    residual = rnorm / scale if scale > 0 else rnorm
    if not np.isfinite(residual) or residual > rtol:
        raise SolverError(f"saddle solve residual {residual:.3e} exceeds {rtol:.1e}")

    nu, npp = system.n_velocity, system.n_pressure
    return Solution(
        u=x[:nu], p=x[nu:nu + npp], mu=float(x[-1]),
        residual=float(residual), n_velocity=nu, n_pressure=npp,
    )


class SPDFactor:
    """Reusable factorization of a symmetric positive definite matrix.

    Small matrices get a definitive dense Cholesky (which certifies
    definiteness); larger ones a sparse LU with a probabilistic definiteness
    spot check.
    """

    def __init__(self, G, dense_cutoff=1500, check=True):
        G = sp.csc_matrix(G)
        self.shape = G.shape
        n = G.shape[0]
        self._dense = n <= dense_cutoff
        if self._dense:
            try:
                self._chol = sla.cho_factor(G.toarray())
            except np.linalg.LinAlgError as exc:
                raise SolverError(f"matrix is not positive definite: {exc}") from exc
        else:
            try:
                self._lu = spla.splu(G)
            except RuntimeError as exc:
                raise SolverError(f"singular factorization: {exc}") from exc
            if check:
                rng = np.random.default_rng(0)
                for _ in range(3):
                    v = rng.standard_normal(n)
                    if v @ (G @ v) <= 0.0:
                        raise SolverError("matrix is not positive definite")

    def solve(self, rhs):
        rhs = np.asarray(rhs, dtype=float)
        if self._dense:
            return sla.cho_solve(self._chol, rhs)
        return self._lu.solve(rhs)


def solve_spd(G, rhs, **kw):
    """Direct solve of an SPD system; factorization is reusable via SPDFactor."""
    return SPDFactor(G, **kw).solve(rhs)
