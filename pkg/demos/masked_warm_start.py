"""
Structure masks and warm starts
===============================

Known zeros shrink the search space; a good initial guess shortens it.
"""

import numpy as np

from hamlearn import (
    OptimizerConfig,
    StructureMask,
    exact_pairs,
    fit,
    matrix_to_weights,
    standard_input_states,
)

# A tridiagonal chain: only neighbours couple.
n = 6
truth = np.diag(np.linspace(-1, 1, n)) + np.diag(np.full(n - 1, 0.4), 1)
truth = truth + np.triu(truth, 1).T
data = exact_pairs(truth, standard_input_states(n), 0.785)

chain = StructureMask(n, [(i, i) for i in range(n)] + [(i, i + 1) for i in range(n - 1)])
print(f"free weights: {chain.vector().sum()} of {chain.vector().size}")

masked = fit(data, n, OptimizerConfig(mask=chain, seed=1), reference=truth)
dense = fit(data, n, OptimizerConfig(seed=1), reference=truth)
print(f"masked: {masked.iterations} iterations, error {masked.reference_error:.1e}")
print(f"dense:  {dense.iterations} iterations, error {dense.reference_error:.1e}")

# Start near the answer, shifted by a multiple of the identity: the cost is
# blind to the shift, so the fit stops immediately.
guess = matrix_to_weights(truth + 2.5 * np.eye(n))
warm = fit(data, n, OptimizerConfig(warm_start=guess), reference=truth)
print(f"warm start: {warm.iterations} iterations, shift removed {warm.reference_shift:.3f}")
