"""Learn real symmetric Hamiltonians from measurement-count data."""

from .cost import CostValue, Gradient, cost, gradient_fd
from .dataset import (
    CountTable,
    DataPair,
    counts_to_amplitudes,
    exact_output,
    exact_pairs,
    pairs_from_table,
    simulate_counts,
    standard_input_states,
    table1,
)
from .hamiltonian import (
    HYPERFINE_H,
    FitReport,
    StructureMask,
    apply_mask,
    matrix_to_weights,
    random_hamiltonian,
    shift_aligned_error,
    weights_to_matrix,
)
from .linalg import (
    ContractError,
    NumericalError,
    expm_taylor,
    expm_unitary,
    inner_product,
    max_norm,
    symmetric_eigendecompose,
)
from .optimizer import FitFailure, OptimizerConfig, fit, step

__version__ = "0.1.0"
