"""Shared solver for (-Delta + w) s = f with w >= 0 on the sampling grid.

This operator appears twice downstream with the same weight w = |psi|^2
(plus the Newton shift): once per Newton step of the vortex solver and
once per projection in the moduli pairing.  It is symmetric positive
definite whenever w has positive mean, so conjugate gradients apply, and
the constant-coefficient part diagonalizes in Fourier space, so
(-Delta + mean(w))^{-1} is a natural spectral preconditioner: the
preconditioned spectrum is pinched between min(w)/mean(w)-ish bounds and
iteration counts stay flat in grid size.
"""

from __future__ import annotations

import numpy as np
from scipy.sparse.linalg import LinearOperator, cg

from .surface import TorusGeometry, _laplacian_arr, _spectral

__all__ = ["EllipticSolveError", "shifted_laplacian_solve"]


class EllipticSolveError(RuntimeError):
    """Conjugate gradients failed to reach the requested residual."""

    def __init__(self, message, achieved_rtol):
        super().__init__(message)
        self.achieved_rtol = achieved_rtol


def shifted_laplacian_solve(
    geom: TorusGeometry,
    weight: np.ndarray,
    rhs: np.ndarray,
    rtol: float = 1e-10,
    maxiter: int = 500,
):
    """Solve (-Delta + weight) s = rhs; returns (s, iterations, achieved_rtol).

    weight must be real, nonnegative apart from roundoff, with positive
    mean; rhs must be real.  The reported achieved_rtol is the true
    relative residual |rhs - A s| / |rhs|, recomputed after the solve.
    """
    weight = np.asarray(weight, dtype=np.float64)
    rhs = np.asarray(rhs, dtype=np.float64)
    if weight.shape != geom.grid_dims or rhs.shape != geom.grid_dims:
        raise ValueError("weight and rhs must be sampled on the geometry grid")
    wmin = float(weight.min())
    if wmin < -1e-12 * max(1.0, float(weight.max())):
        raise ValueError(f"weight must be nonnegative, min {wmin:.3e}")
    shift = float(weight.mean())
    if not shift > 0.0:
        raise ValueError("weight must have positive mean")

    shape = geom.grid_dims
    size = shape[0] * shape[1]
    inv_spec = 1.0 / (_spectral(geom).half.k2 + shift)

    def matvec(x):
        arr = x.reshape(shape)
        return (-_laplacian_arr(geom, arr) + weight * arr).ravel()

    def precond(x):
        hat = np.fft.rfft2(x.reshape(shape))
        return np.fft.irfft2(hat * inv_spec, s=shape).ravel()

    op = LinearOperator((size, size), matvec=matvec, dtype=np.float64)
    pre = LinearOperator((size, size), matvec=precond, dtype=np.float64)
    iters = 0

    def count(_):
        nonlocal iters
        iters += 1

    b = rhs.ravel()
    bnorm = float(np.linalg.norm(b))
    if bnorm == 0.0:
        return np.zeros(shape), 0, 0.0
    sol, info = cg(op, b, rtol=rtol, atol=0.0, maxiter=maxiter, M=pre, callback=count)
    achieved = float(np.linalg.norm(b - matvec(sol)) / bnorm)
    if info != 0:
        raise EllipticSolveError(
            f"conjugate gradients stalled at relative residual {achieved:.3e} "
            f"after {iters} iterations (target {rtol:.1e})",
            achieved_rtol=achieved,
        )
    return sol.reshape(shape), iters, achieved
