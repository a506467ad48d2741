"""
Weight-vector parameterization of real symmetric Hamiltonians.

A Hamiltonian on ``n`` basis states is stored as the ``n(n+1)/2`` weights
``w_ij, i <= j`` in row-major upper-triangular order::

    w_11, w_12, ..., w_1n, w_22, w_23, ..., w_nn

Because ``C(H) = C(H + f I)`` for every real ``f``, learned matrices are
compared with :func:`shift_aligned_error`, which removes the best diagonal
shift before taking the 2-norm.
"""

import json
from dataclasses import dataclass, field
from math import isqrt, pi
from typing import Optional

import numpy as np

from .linalg import ContractError, max_norm, symmetric_eigendecompose

__all__ = [
    "n_weights",
    "dim_from_n_weights",
    "weights_to_matrix",
    "matrix_to_weights",
    "StructureMask",
    "apply_mask",
    "random_hamiltonian",
    "shift_aligned_error",
    "raw_error",
    "principal_hamiltonian",
    "FitReport",
    "HYPERFINE_H",
    "hamiltonian_to_json",
    "hamiltonian_from_json",
    "save_hamiltonian",
    "load_hamiltonian",
]

HYPERFINE_H = np.array(
    [
        [1.0, 0.0, 0.0, 0.0],
        [0.0, -1.0, 2.0, 0.0],
        [0.0, 2.0, -1.0, 0.0],
        [0.0, 0.0, 0.0, 1.0],
    ]
)


def n_weights(n):
    return n * (n + 1) // 2


def dim_from_n_weights(k):
    n = (isqrt(8 * k + 1) - 1) // 2
    if n * (n + 1) // 2 != k or n < 1:
        raise ContractError(f"{k} is not a triangular number n(n+1)/2")
    return n


def weights_to_matrix(weights, n=None):
    """
    Symmetric matrix with ``M[i, j] = M[j, i] = w_ij``.

    ``weights`` may carry leading batch dimensions; the last axis holds the
    packed weights.
    """
    w = np.asarray(weights, dtype=float)
    k = w.shape[-1]
    if n is None:
        n = dim_from_n_weights(k)
    elif k != n_weights(n):
        raise ContractError(f"expected {n_weights(n)} weights for n={n}, got {k}")
    iu, ju = np.triu_indices(n)
    M = np.zeros(w.shape[:-1] + (n, n))
    M[..., iu, ju] = w
    M[..., ju, iu] = w
    return M


def matrix_to_weights(M):
    """Packed upper triangle of ``M`` (exact inverse of :func:`weights_to_matrix`)."""
    M = np.asarray(M, dtype=float)
    if M.ndim < 2 or M.shape[-1] != M.shape[-2]:
        raise ContractError(f"expected square matrix, got shape {M.shape}")
    n = M.shape[-1]
    iu, ju = np.triu_indices(n)
    return M[..., iu, ju].copy()


@dataclass(frozen=True)
class StructureMask:
    """
    Sparsity pattern on the weights: pairs ``(i, j), i <= j`` (0-based) that
    may be nonzero.  Everything else is held at exactly zero.
    """

    dim: int
    allowed: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        pairs = frozenset((int(min(i, j)), int(max(i, j))) for i, j in self.allowed)
        for i, j in pairs:
            if not (0 <= i < self.dim and 0 <= j < self.dim):
                raise ContractError(f"mask pair {(i, j)} outside dim {self.dim}")
        object.__setattr__(self, "allowed", pairs)

    @classmethod
    def full(cls, n):
        return cls(n, frozenset(zip(*np.triu_indices(n))))

    @classmethod
    def from_one_based(cls, n, pairs):
        return cls(n, frozenset((int(i) - 1, int(j) - 1) for i, j in pairs))

    @classmethod
    def hyperfine(cls):
        """Spin-conserving form: diagonal plus the (2, 3) coupling."""
        return cls.from_one_based(4, [(1, 1), (2, 2), (2, 3), (3, 3), (4, 4)])

    def vector(self):
        """Boolean array over the packed weights, True where allowed."""
        iu, ju = np.triu_indices(self.dim)
        return np.array([(i, j) in self.allowed for i, j in zip(iu, ju)], dtype=bool)

    def to_one_based(self):
        return sorted([i + 1, j + 1] for i, j in self.allowed)


def apply_mask(weights, mask):
    """Zero every weight outside ``mask.allowed``; the rest pass through."""
    w = np.asarray(weights, dtype=float)
    if w.shape[-1] != n_weights(mask.dim):
        raise ContractError(
            f"mask is for n={mask.dim} ({n_weights(mask.dim)} weights), got {w.shape[-1]}"
        )
    return np.where(mask.vector(), w, 0.0)


def random_hamiltonian(n, scale=1.0, seed=None):
    """Weights drawn i.i.d. uniform on ``[-scale, scale]``."""
    if n < 1 or scale <= 0:
        raise ContractError("need n >= 1 and scale > 0")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return rng.uniform(-scale, scale, n_weights(n))


def raw_error(A, B):
    """Plain 2-norm of ``A - B``."""
    A, B = np.asarray(A, dtype=float), np.asarray(B, dtype=float)
    if A.shape != B.shape:
        raise ContractError(f"dimension mismatch: {A.shape} vs {B.shape}")
    return max_norm(A - B)


def shift_aligned_error(A, B, tol=1e-12, return_shift=False):
    """
    ``min_f ||A - B - f I||`` over real ``f``.

    The objective is convex in ``f``; it is minimized by golden-section
    search on ``[-(d + 1), d + 1]`` with ``d = max |diag(A - B)|``.

    Returns the error, or ``(error, f)`` when ``return_shift`` is set.
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if A.shape != B.shape or A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ContractError(f"dimension mismatch or non-square: {A.shape} vs {B.shape}")
    D = A - B
    n = D.shape[0]
    eye = np.eye(n)

    def objective(f):
        return max_norm(D - f * eye)

    bound = float(np.max(np.abs(np.diag(D)), initial=0.0)) + 1.0
    lo, hi = -bound, bound
    invphi = (np.sqrt(5.0) - 1.0) / 2.0
    x1 = hi - invphi * (hi - lo)
    x2 = lo + invphi * (hi - lo)
    f1, f2 = objective(x1), objective(x2)
    while hi - lo > tol * (1.0 + bound):
        if f1 <= f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - invphi * (hi - lo)
            f1 = objective(x1)
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + invphi * (hi - lo)
            f2 = objective(x2)
    best_f = float(0.5 * (lo + hi))
    err = objective(best_f)
    return (err, best_f) if return_shift else err


def principal_hamiltonian(H, t, method="lapack"):
    """
    Minimal-bandwidth Hamiltonian with the same propagator ``exp(-i t H)``.

    Eigenvalues are only determined modulo ``2 pi / t`` by data taken at a
    single time ``t``.  Each eigenvalue is moved by a multiple of that period
    so the spectrum occupies the shortest possible window; the window starts
    at the eigenvalue following the widest circular gap, which keeps its
    original value.
    """
    H = np.asarray(H, dtype=float)
    if t == 0:
        return H.copy()
    period = 2.0 * pi / abs(float(t))
    lam, U = symmetric_eigendecompose(H, method=method)
    if lam.size < 2:
        return H.copy()
    phase = np.mod(lam, period)
    order = np.argsort(phase, kind="stable")
    sorted_phase = phase[order]
    gaps = np.diff(np.concatenate([sorted_phase, [sorted_phase[0] + period]]))
    start = order[(int(np.argmax(gaps)) + 1) % lam.size]
    anchor = lam[start]
    shifts = np.floor((lam - anchor) / period)
    # an eigenvalue numerically equal to the anchor must not move
    shifts[np.isclose(lam, anchor, rtol=0.0, atol=1e-12 * period)] = 0.0
    if not np.any(shifts):
        return H.copy()
    wrapped = lam - shifts * period
    out = (U * wrapped) @ U.T
    return 0.5 * (out + out.T)


@dataclass
class FitReport:
    """Outcome of :func:`hamlearn.optimizer.fit`."""

    final_cost: float
    iterations: int
    learned: np.ndarray
    converged: bool
    reason: str
    wall_time: float = 0.0
    reference_error: Optional[float] = None
    reference_raw_error: Optional[float] = None
    reference_shift: Optional[float] = None
    best_run: int = 0
    runs: list = field(default_factory=list)
    unwrapped: bool = False

    def __post_init__(self):
        if self.final_cost < 0:
            raise ContractError("final_cost must be non-negative")

    @property
    def weights(self):
        return matrix_to_weights(self.learned)

    def to_dict(self):
        return {
            "final_cost": float(self.final_cost),
            "iterations": int(self.iterations),
            "converged": bool(self.converged),
            "reason": self.reason,
            "best_run": int(self.best_run),
            "unwrapped": bool(self.unwrapped),
            "reference_error": self.reference_error,
            "reference_raw_error": self.reference_raw_error,
            "reference_shift": self.reference_shift,
            "wall_time": float(self.wall_time),
            "learned": hamiltonian_to_json(self.learned),
            "runs": self.runs,
        }


def hamiltonian_to_json(H, mask=None):
    """``{"dim": n, "weights": [...]}`` plus an optional 1-based ``"mask"``."""
    H = np.asarray(H, dtype=float)
    obj = {"dim": int(H.shape[0]), "weights": [float(x) for x in matrix_to_weights(H)]}
    if mask is not None:
        obj["mask"] = mask.to_one_based()
    return obj


def hamiltonian_from_json(obj):
    """Inverse of :func:`hamiltonian_to_json`; returns ``(H, mask or None)``."""
    try:
        n = int(obj["dim"])
        weights = [float(x) for x in obj["weights"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise ContractError(f"bad Hamiltonian object: {exc}") from exc
    if n < 1:
        raise ContractError("field 'dim' must be positive")
    if len(weights) != n_weights(n):
        raise ContractError(
            f"field 'weights': expected {n_weights(n)} values for dim {n}, got {len(weights)}"
        )
    mask = None
    if obj.get("mask") is not None:
        mask = StructureMask.from_one_based(n, obj["mask"])
    return weights_to_matrix(weights, n), mask


def save_hamiltonian(path, H, mask=None):
    with open(path, "w") as fh:
        json.dump(hamiltonian_to_json(H, mask), fh, indent=2)
        fh.write("\n")


def load_hamiltonian(path):
    with open(path) as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ContractError(f"{path}: line {exc.lineno}: {exc.msg}") from exc
    return hamiltonian_from_json(obj)
