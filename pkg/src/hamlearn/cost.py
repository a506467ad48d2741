"""
Infidelity cost over a set of data pairs and its finite-difference gradient.

For weights ``w`` and pairs ``(psi_i, phi_i, t_i), i = 1..m``::

    c_i(w) = 1 - |<phi_i| exp(-i t_i H(w)) |psi_i>|^2
    C(w)   = (1/m) sum_i c_i(w)

``C`` lies in ``[0, 1]`` and vanishes at the true Hamiltonian for exact
data.  It is invariant under ``H -> H + f I``.
"""

from dataclasses import dataclass

import numpy as np

from .hamiltonian import n_weights, weights_to_matrix
from .linalg import ContractError, NumericalError, expm_unitary

__all__ = ["CostValue", "Gradient", "PreparedData", "prepare", "cost", "cost_batch", "gradient_fd"]

DEFAULT_FD_STEP = 1e-5
CLAMP_TOL = 1e-12


@dataclass(frozen=True)
class CostValue:
    """
    ``total`` is the mean infidelity over the pairs (in ``[0, 1]``);
    ``sum`` is the unnormalized sum (in ``[0, m]``).
    """

    total: float
    sum: float
    per_pair: np.ndarray


@dataclass(frozen=True)
class Gradient:
    partials: np.ndarray
    step: float


class PreparedData:
    """
    Data pairs stacked into arrays and grouped by evolution time, so that
    one propagator per distinct ``t`` serves every pair recorded at that time.
    """

    def __init__(self, data):
        data = list(data)
        if not data:
            raise ContractError("need at least one data pair")
        n = data[0].dim
        for k, pair in enumerate(data):
            if pair.dim != n:
                raise ContractError(f"pair {k + 1} has dim {pair.dim}, expected {n}")
        self.dim = n
        self.m = len(data)
        times = np.array([p.t for p in data])
        self.groups = []
        for t in sorted(set(times.tolist())):
            idx = np.flatnonzero(times == t)
            bras = np.array([data[i].phi for i in idx]).conj()
            kets = np.array([data[i].psi for i in idx])
            self.groups.append((t, idx, bras, kets))

    @property
    def times(self):
        return [g[0] for g in self.groups]


def prepare(data):
    return data if isinstance(data, PreparedData) else PreparedData(data)


def _per_pair(W, prepared, method):
    # W: (B, K) weights -> (B, m) infidelities
    H = weights_to_matrix(W, prepared.dim)
    out = np.empty((W.shape[0], prepared.m))
    for t, idx, bras, kets in prepared.groups:
        U = expm_unitary(H, t, method=method)
        amp = np.einsum("mk,bkl,ml->bm", bras, U, kets)
        out[:, idx] = 1.0 - (amp.real**2 + amp.imag**2)
    worst = np.min(out) if out.size else 0.0
    if worst < -CLAMP_TOL:
        raise NumericalError(f"fidelity exceeds 1 by {-worst:.3e}; propagator is not unitary")
    return np.clip(out, 0.0, 1.0)


def _check_weights(weights, prepared):
    W = np.asarray(weights, dtype=float)
    if W.shape[-1] != n_weights(prepared.dim):
        raise ContractError(
            f"data has dim {prepared.dim} ({n_weights(prepared.dim)} weights), "
            f"got {W.shape[-1]} weights"
        )
    return W


def cost_batch(weights, data, method="lapack"):
    """Mean cost for each row of a ``(B, K)`` weight stack."""
    prepared = prepare(data)
    W = np.atleast_2d(_check_weights(weights, prepared))
    return np.sum(_per_pair(W, prepared, method), axis=1) / prepared.m


def cost(weights, data, method="lapack"):
    """
    Infidelity of the Hamiltonian with packed ``weights`` against ``data``.

    Parameters
    ----------
    weights : array_like, shape (n(n+1)/2,)
    data : sequence of DataPair or PreparedData
    method : {"lapack", "jacobi"}
        Eigensolver behind the propagator.

    Returns
    -------
    CostValue
    """
    prepared = prepare(data)
    w = _check_weights(weights, prepared)
    if w.ndim != 1:
        raise ContractError("cost takes a single weight vector; see cost_batch")
    per_pair = _per_pair(w[None, :], prepared, method)[0]
    s = float(np.sum(per_pair))
    return CostValue(s / prepared.m, s, per_pair)


def gradient_fd(weights, data, h=DEFAULT_FD_STEP, mask=None, method="lapack", return_cost=False):
    """
    Central-difference gradient of the mean cost.

    ``partials[k] = (C(w + h e_k) - C(w - h e_k)) / (2 h)``.  With a
    :class:`~hamlearn.hamiltonian.StructureMask`, masked-out weights are not
    perturbed and their partials are exactly zero.  All ``2K`` perturbed
    Hamiltonians are diagonalized in one batch.

    With ``return_cost=True`` returns ``(Gradient, C(w))``, reusing the batch.
    """
    if not h > 0:
        raise ContractError("finite-difference step must be positive")
    prepared = prepare(data)
    w = _check_weights(weights, prepared)
    K = w.size
    active = np.arange(K) if mask is None else np.flatnonzero(mask.vector())
    E = np.zeros((active.size, K))
    E[np.arange(active.size), active] = h
    W = np.concatenate([w + E, w - E, w[None, :]])
    c = np.sum(_per_pair(W, prepared, method), axis=1) / prepared.m
    partials = np.zeros(K)
    a = active.size
    partials[active] = (c[:a] - c[a : 2 * a]) / (2.0 * h)
    grad = Gradient(partials, float(h))
    return (grad, float(c[-1])) if return_cost else grad
