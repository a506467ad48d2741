"""
Dense linear algebra used by the learner.

Eigendecomposition of real symmetric matrices (cyclic Jacobi, with a LAPACK
backend for the hot path), the diagonalization-based propagator
``exp(-i t H)``, a scaled Taylor-series exponential used as an independent
oracle, the induced 2-norm, and the bra-ket inner product.

All functions accept a single matrix of shape ``(n, n)`` or, where noted, a
stack of shape ``(..., n, n)``.  Nothing here mutates its inputs.
"""

from math import factorial
from typing import NamedTuple

import numpy as np

__all__ = [
    "ContractError",
    "NumericalError",
    "EigenDecomposition",
    "jacobi_eigh",
    "symmetric_eigendecompose",
    "expm_unitary",
    "expm_taylor",
    "expm_taylor_raw",
    "max_norm",
    "inner_product",
    "is_unitary",
]

JACOBI_MAX_SWEEPS = 100
JACOBI_TOL = 1e-15


class ContractError(ValueError):
    """An argument violates a documented precondition (shape, length, sign)."""


class NumericalError(ArithmeticError):
    """A numerical procedure failed: non-convergence, overflow, broken unitary."""

    def __init__(self, message, residual=None, index=None):
        super().__init__(message)
        self.residual = residual
        self.index = index


class EigenDecomposition(NamedTuple):
    """Ascending eigenvalues and the matching orthonormal eigenvectors (columns)."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self):
        U = self.eigenvectors
        return (U * self.eigenvalues[..., None, :]) @ np.swapaxes(U, -1, -2)


def _as_symmetric_stack(H):
    H = np.asarray(H, dtype=float)
    if H.ndim < 2 or H.shape[-1] != H.shape[-2]:
        raise ContractError(f"expected square matrix (or stack), got shape {H.shape}")
    if not np.all(np.isfinite(H)):
        raise ContractError("matrix has non-finite entries")
    return H


def jacobi_eigh(H, tol=JACOBI_TOL, max_sweeps=JACOBI_MAX_SWEEPS):
    """
    Cyclic Jacobi eigensolver for real symmetric matrices.

    Rotations are applied in the fixed row-major order ``(p, q), p < q`` on
    every sweep, vectorized over any leading stack dimensions, so the result
    is a deterministic function of the input.  Only the upper triangle of
    ``H`` is read.

    Parameters
    ----------
    H : array_like, shape (..., n, n)
        Symmetric matrix or stack of them.
    tol : float
        Converged once the off-diagonal Frobenius norm of every matrix in the
        stack is ``<= tol * (1 + ||H||_F)``.
    max_sweeps : int
        Sweep cap; exceeding it raises :class:`NumericalError`.

    Returns
    -------
    EigenDecomposition
        Eigenvalues sorted ascending, eigenvectors as columns.
    """
    H = _as_symmetric_stack(H)
    n = H.shape[-1]
    A = np.triu(H) + np.swapaxes(np.triu(H, 1), -1, -2)
    V = np.broadcast_to(np.eye(n), A.shape).copy()
    threshold = tol * (1.0 + np.sqrt(np.sum(A * A, axis=(-1, -2))))
    offdiag_mask = ~np.eye(n, dtype=bool)

    def off_norm(M):
        return np.sqrt(np.sum(np.where(offdiag_mask, M * M, 0.0), axis=(-1, -2)))

    off = off_norm(A)
    sweeps = 0
    while np.any(off > threshold):
        if sweeps >= max_sweeps:
            raise NumericalError(
                f"Jacobi did not converge in {max_sweeps} sweeps "
                f"(off-diagonal norm {float(np.max(off)):.3e})",
                residual=float(np.max(off)),
            )
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[..., p, q]
                active = apq != 0.0
                if not np.any(active):
                    continue
                app = A[..., p, p]
                aqq = A[..., q, q]
                safe_apq = np.where(active, apq, 1.0)
                theta = (aqq - app) / (2.0 * safe_apq)
                # smaller root of t^2 + 2 theta t - 1 = 0
                t = np.sign(theta) / (np.abs(theta) + np.sqrt(theta * theta + 1.0))
                t = np.where(theta == 0.0, 1.0, t)
                t = np.where(active, t, 0.0)
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                c_ = c[..., None]
                s_ = s[..., None]
                # A <- J^T A J with J the (p, q) plane rotation
                col_p = A[..., :, p].copy()
                col_q = A[..., :, q]
                A[..., :, p] = c_ * col_p - s_ * col_q
                A[..., :, q] = s_ * col_p + c_ * col_q
                row_p = A[..., p, :].copy()
                row_q = A[..., q, :]
                A[..., p, :] = c_ * row_p - s_ * row_q
                A[..., q, :] = s_ * row_p + c_ * row_q
                A[..., p, q] = 0.0
                A[..., q, p] = 0.0
                vp = V[..., :, p].copy()
                vq = V[..., :, q]
                V[..., :, p] = c_ * vp - s_ * vq
                V[..., :, q] = s_ * vp + c_ * vq
        sweeps += 1
        off = off_norm(A)

    lam = np.diagonal(A, axis1=-2, axis2=-1)
    order = np.argsort(lam, axis=-1, kind="stable")
    lam = np.take_along_axis(lam, order, axis=-1)
    V = np.take_along_axis(V, order[..., None, :], axis=-1)
    return EigenDecomposition(lam, V)


def symmetric_eigendecompose(H, method="jacobi"):
    """
    Eigendecomposition ``H = U diag(lam) U^T`` of a real symmetric matrix.

    ``method="jacobi"`` uses :func:`jacobi_eigh`; ``method="lapack"`` uses
    :func:`numpy.linalg.eigh` (reads the lower triangle).  Both return
    ascending eigenvalues.
    """
    if method == "jacobi":
        return jacobi_eigh(H)
    if method == "lapack":
        H = _as_symmetric_stack(H)
        lam, U = np.linalg.eigh(H)
        return EigenDecomposition(lam, U)
    raise ContractError(f"unknown eigensolver {method!r}")


def expm_unitary(H, t, method="jacobi"):
    """
    Propagator ``exp(-i t H)`` for real symmetric ``H`` (hbar = 1).

    Computed as ``U diag(exp(-i t lam)) U^T`` from the eigendecomposition.
    ``H`` may be a stack ``(..., n, n)``; ``t`` is a scalar or broadcasts
    against the leading dimensions.
    """
    eig = symmetric_eigendecompose(H, method=method)
    t = np.asarray(t, dtype=float)[..., None]
    U = eig.eigenvectors
    phases = np.exp(-1j * t * eig.eigenvalues)
    return (U * phases[..., None, :]) @ np.swapaxes(U, -1, -2)


def expm_taylor_raw(H, t, terms=30):
    """Truncated series ``sum_{k<terms} (-i t H)^k / k!`` with no scaling."""
    if terms < 1:
        raise ContractError("terms must be a positive integer")
    H = _as_symmetric_stack(H)
    A = -1j * float(t) * H
    n = H.shape[-1]
    result = np.broadcast_to(np.eye(n, dtype=complex), A.shape).copy()
    power = result.copy()
    for k in range(1, terms):
        power = power @ A / k
        result = result + power
    if not np.all(np.isfinite(result)):
        raise NumericalError("Taylor series overflowed")
    return result


def expm_taylor(H, t, terms=30):
    """
    Scaling-and-squaring Taylor exponential ``exp(-i t H)``.

    ``t H`` is scaled by ``2**-k`` until its largest absolute row sum is at
    most 0.5, the truncated series is summed with ``terms`` terms, and the
    result is squared ``k`` times.  Intended as a reference for
    :func:`expm_unitary`, not for speed.
    """
    H = _as_symmetric_stack(H)
    if H.ndim != 2:
        raise ContractError("expm_taylor takes a single matrix")
    norm = abs(float(t)) * float(np.max(np.sum(np.abs(H), axis=1), initial=0.0))
    k = 0
    while norm / 2.0**k > 0.5:
        k += 1
    E = expm_taylor_raw(H, float(t) / 2.0**k, terms=terms)
    for _ in range(k):
        E = E @ E
    return E


def _power_squaring_norm(A, squarings=64):
    # Power method on M = A^H A, accelerated by repeated squaring of M: after
    # k squarings the iterate is M^(2^k), whose columns lie in the dominant
    # singular subspace.
    M = A.conj().T @ A
    scale = np.max(np.abs(M))
    if scale == 0.0:
        return 0.0
    M = M / scale
    P = M
    for _ in range(squarings):
        nxt = P @ P
        peak = np.max(np.abs(nxt))
        if peak == 0.0 or not np.isfinite(peak):
            break
        nxt = nxt / peak
        if np.allclose(nxt, P, rtol=0.0, atol=1e-15):
            P = nxt
            break
        P = nxt
    col = P[:, int(np.argmax(np.sum(np.abs(P) ** 2, axis=0)))]
    x = col / np.linalg.norm(col)
    for _ in range(3):
        y = M @ x
        ny = np.linalg.norm(y)
        if ny == 0.0:
            break
        x = y / ny
    rayleigh = float(np.real(np.vdot(x, M @ x)))
    return float(np.sqrt(max(rayleigh, 0.0) * scale))


def max_norm(A, cap=256):
    """
    Induced 2-norm ``sup |A x|`` over unit ``x`` (largest singular value).

    Uses a power method on ``A^H A`` for matrices up to ``cap`` rows/cols
    and an SVD above that.
    """
    A = np.asarray(A)
    if A.ndim != 2:
        raise ContractError(f"expected a matrix, got shape {A.shape}")
    if A.size == 0:
        return 0.0
    if max(A.shape) > cap:
        return float(np.linalg.svd(A, compute_uv=False)[0])
    return _power_squaring_norm(A.astype(complex if np.iscomplexobj(A) else float))


def inner_product(bra, ket):
    """``<bra|ket>``, conjugate-linear in ``bra``."""
    bra = np.asarray(bra)
    ket = np.asarray(ket)
    if bra.shape != ket.shape or bra.ndim != 1:
        raise ContractError(f"dimension mismatch: {bra.shape} vs {ket.shape}")
    return complex(np.vdot(bra, ket))


def is_unitary(U, tol=1e-9):
    U = np.asarray(U)
    return max_norm(U @ U.conj().T - np.eye(U.shape[0])) <= tol
