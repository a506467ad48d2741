"""
Momentum gradient descent over the Hamiltonian weights.

Each step::

    V_t = beta * V_{t-1} + alpha * grad C(W_{t-1})
    W_t = W_{t-1} - V_t

with ``beta = 0`` giving plain gradient descent.  :func:`fit` runs several
seeded restarts and keeps the best one.
"""

import time
from dataclasses import dataclass, field, fields, replace
from typing import Optional

import numpy as np

from .cost import DEFAULT_FD_STEP, cost, gradient_fd, prepare
from .hamiltonian import (
    FitReport,
    StructureMask,
    apply_mask,
    matrix_to_weights,
    n_weights,
    principal_hamiltonian,
    raw_error,
    shift_aligned_error,
    weights_to_matrix,
)
from .linalg import ContractError, NumericalError

__all__ = ["OptimizerConfig", "OptimizerState", "FitFailure", "init_state", "step", "fit"]


@dataclass(frozen=True)
class OptimizerConfig:
    alpha: float = 0.05
    beta: float = 0.9
    max_iters: int = 20000
    cost_tol: float = 1e-10
    grad_tol: float = 1e-8
    fd_step: float = DEFAULT_FD_STEP
    init_scale: float = 1.0
    restarts: int = 4
    seed: int = 0
    mask: Optional[StructureMask] = None
    warm_start: Optional[np.ndarray] = None
    # abort a run once its cost exceeds this multiple of the starting cost
    divergence_factor: float = 10.0
    unwrap: bool = True
    eig_method: str = "lapack"
    trace_every: int = 100

    def __post_init__(self):
        if not self.alpha > 0:
            raise ContractError("alpha must be positive")
        if not 0.0 <= self.beta < 1.0:
            raise ContractError("beta must lie in [0, 1)")
        if self.max_iters < 1 or self.restarts < 0:
            raise ContractError("max_iters must be >= 1 and restarts >= 0")
        if self.cost_tol < 0 or self.grad_tol < 0:
            raise ContractError("tolerances must be non-negative")
        if not self.fd_step > 0 or not self.init_scale > 0:
            raise ContractError("fd_step and init_scale must be positive")

    def to_dict(self):
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d["mask"] = None if self.mask is None else self.mask.to_one_based()
        d["warm_start"] = None if self.warm_start is None else [float(x) for x in self.warm_start]
        return d

    @classmethod
    def from_dict(cls, d, dim=None):
        """Build from a JSON-style dict; ``mask`` is a 1-based pair list."""
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ContractError(f"unknown config field(s): {', '.join(sorted(unknown))}")
        d = dict(d)
        if d.get("mask") is not None and not isinstance(d["mask"], StructureMask):
            if dim is None:
                raise ContractError("a mask in the config needs the data dimension")
            d["mask"] = StructureMask.from_one_based(dim, d["mask"])
        if d.get("warm_start") is not None:
            d["warm_start"] = np.asarray(d["warm_start"], dtype=float)
        return cls(**d)

    def updated(self, **changes):
        return replace(self, **{k: v for k, v in changes.items() if v is not None})


@dataclass
class OptimizerState:
    weights: np.ndarray
    velocity: np.ndarray
    iter: int = 0
    best_cost: float = np.inf
    best_weights: Optional[np.ndarray] = None
    last_cost: float = np.inf
    last_grad_norm: float = np.inf
    trace: list = field(default_factory=list)


class FitFailure(RuntimeError):
    """Every restart diverged; ``runs`` holds the per-run summaries."""

    def __init__(self, runs):
        lines = ", ".join(f"run {r['run']}: {r['reason']}" for r in runs)
        super().__init__(f"all runs diverged ({lines})")
        self.runs = runs


def init_state(weights, mask=None):
    w = np.array(weights, dtype=float)
    if mask is not None:
        w = apply_mask(w, mask)
    return OptimizerState(weights=w, velocity=np.zeros_like(w), best_weights=w.copy())


def _descent_update(state, grad, cfg):
    v = cfg.beta * state.velocity + cfg.alpha * grad
    w = state.weights - v
    if cfg.mask is not None:
        w = apply_mask(w, cfg.mask)
    bad = np.flatnonzero(~np.isfinite(w))
    if bad.size:
        raise NumericalError(f"weight {int(bad[0])} became non-finite", index=int(bad[0]))
    return w, v


def step(state, data, cfg, grad=None, current_cost=None):
    """
    One momentum update from ``state``; returns a new :class:`OptimizerState`.

    The gradient (and the cost at the current weights, which updates
    ``best_cost``) is computed unless supplied.
    """
    if state.velocity.shape != state.weights.shape:
        raise ContractError("velocity and weights differ in length")
    if grad is None:
        g, current_cost = gradient_fd(
            state.weights, data, cfg.fd_step, cfg.mask, cfg.eig_method, return_cost=True
        )
        grad = g.partials
    w, v = _descent_update(state, np.asarray(grad, dtype=float), cfg)
    best_cost, best_weights = state.best_cost, state.best_weights
    if current_cost is not None and current_cost < best_cost:
        best_cost, best_weights = current_cost, state.weights.copy()
    return OptimizerState(
        weights=w,
        velocity=v,
        iter=state.iter + 1,
        best_cost=best_cost,
        best_weights=best_weights,
        last_cost=state.last_cost if current_cost is None else current_cost,
        last_grad_norm=float(np.max(np.abs(grad), initial=0.0)),
        trace=state.trace,
    )


def _initial_weights(k, K, cfg):
    if k == 0 and cfg.warm_start is not None:
        w = np.asarray(cfg.warm_start, dtype=float)
        if w.shape != (K,):
            raise ContractError(f"warm_start has {w.size} weights, expected {K}")
        return w.copy()
    rng = np.random.default_rng([int(cfg.seed), k])
    return rng.uniform(-cfg.init_scale, cfg.init_scale, K)


def _run(prepared, w0, cfg):
    state = init_state(w0, cfg.mask)
    initial_cost = None
    reason = "max_iters"
    while True:
        try:
            g, c = gradient_fd(
                state.weights, prepared, cfg.fd_step, cfg.mask, cfg.eig_method, return_cost=True
            )
        except NumericalError:
            reason = "diverged"
            break
        if initial_cost is None:
            initial_cost = c
        if c < state.best_cost:
            state.best_cost, state.best_weights = c, state.weights.copy()
        state.last_cost = c
        gnorm = float(np.max(np.abs(g.partials), initial=0.0))
        state.last_grad_norm = gnorm
        if cfg.trace_every and state.iter % cfg.trace_every == 0:
            state.trace.append((state.iter, c))
        if not np.isfinite(c) or c > cfg.divergence_factor * max(initial_cost, 1e-300):
            reason = "diverged"
            break
        if c <= cfg.cost_tol:
            reason = "cost_tol"
            break
        if gnorm <= cfg.grad_tol:
            reason = "grad_tol"
            break
        if state.iter >= cfg.max_iters:
            break
        try:
            state = step(state, prepared, cfg, grad=g.partials, current_cost=c)
        except NumericalError:
            reason = "diverged"
            break
    if not state.trace or state.trace[-1][0] != state.iter:
        state.trace.append((state.iter, state.last_cost))
    return state, reason


def fit(data, n, cfg=None, reference=None):
    """
    Learn a Hamiltonian from data pairs.

    Parameters
    ----------
    data : sequence of DataPair
    n : int
        Number of basis states.
    cfg : OptimizerConfig, optional
    reference : array_like, shape (n, n), optional
        Known true Hamiltonian; when given the report carries the
        shift-aligned and raw errors against it.

    Returns
    -------
    FitReport
        The best run.  Restarts stop early once a run reaches ``cost_tol``.
        When every pair shares one evolution time the learned matrix is
        replaced by :func:`~hamlearn.hamiltonian.principal_hamiltonian` if
        that does not raise the cost.

    Raises
    ------
    FitFailure
        If every run diverged.
    """
    cfg = cfg or OptimizerConfig()
    t0 = time.perf_counter()
    prepared = prepare(data)
    if prepared.dim != n:
        raise ContractError(f"data has dim {prepared.dim}, expected {n}")
    if cfg.mask is not None and cfg.mask.dim != n:
        raise ContractError(f"mask has dim {cfg.mask.dim}, expected {n}")
    K = n_weights(n)

    runs = []
    best = None
    for k in range(cfg.restarts + 1):
        state, reason = _run(prepared, _initial_weights(k, K, cfg), cfg)
        runs.append(
            {
                "run": k,
                "final_cost": float(state.best_cost),
                "iterations": int(state.iter),
                "reason": reason,
            }
        )
        if reason != "diverged" and (best is None or state.best_cost < best[0].best_cost):
            best = (state, reason, k)
        if reason == "cost_tol":
            break
    if best is None:
        raise FitFailure(runs)

    state, reason, k = best
    weights = state.best_weights
    final_cost = float(state.best_cost)
    unwrapped = False
    if cfg.unwrap and len(prepared.times) == 1:
        H2 = principal_hamiltonian(weights_to_matrix(weights, n), prepared.times[0])
        w2 = matrix_to_weights(H2)
        if cfg.mask is not None:
            w2 = apply_mask(w2, cfg.mask)
        if not np.array_equal(w2, weights):
            c2 = cost(w2, prepared, method=cfg.eig_method).total
            if c2 <= final_cost + 1e-12:
                weights, final_cost, unwrapped = w2, c2, True

    learned = weights_to_matrix(weights, n)
    report = FitReport(
        final_cost=max(final_cost, 0.0),
        iterations=int(state.iter),
        learned=learned,
        converged=reason in ("cost_tol", "grad_tol"),
        reason=reason,
        best_run=k,
        runs=runs,
        unwrapped=unwrapped,
    )
    if reference is not None:
        reference = np.asarray(reference, dtype=float)
        err, f = shift_aligned_error(learned, reference, return_shift=True)
        report.reference_error = float(err)
        report.reference_shift = float(f)
        report.reference_raw_error = float(raw_error(learned, reference))
    report.wall_time = time.perf_counter() - t0
    return report
