"""
Two routes to exp(-itH)
=======================

Diagonalizing once and exponentiating the eigenvalues is compared with a
scaled-and-squared Taylor series, for accuracy and speed.  The
diagonalization runs through either LAPACK or the built-in Jacobi solver;
Jacobi is fully deterministic but written in Python, so it is slow on
single large matrices.
"""

import time

import numpy as np

from hamlearn import expm_taylor, expm_unitary, max_norm, random_hamiltonian, weights_to_matrix

t = 0.785
reps = 20
rng = np.random.default_rng(0)


def mean_us(fn):
    start = time.perf_counter()
    for _ in range(reps):
        out = fn()
    return out, (time.perf_counter() - start) / reps * 1e6


print(f"{'n':>4} {'lapack (us)':>12} {'jacobi (us)':>12} {'taylor (us)':>12} {'max diff':>10}")
for n in (2, 4, 8, 16, 32):
    H = weights_to_matrix(random_hamiltonian(n, seed=rng))
    U_lapack, lapack_us = mean_us(lambda: expm_unitary(H, t, method="lapack"))
    U_jacobi, jacobi_us = mean_us(lambda: expm_unitary(H, t, method="jacobi"))
    U_taylor, taylor_us = mean_us(lambda: expm_taylor(H, t))
    diff = max(max_norm(U_lapack - U_taylor), max_norm(U_jacobi - U_taylor))
    print(f"{n:>4} {lapack_us:>12.1f} {jacobi_us:>12.1f} {taylor_us:>12.1f} {diff:>10.1e}")

# The same comparison with CSV output: hamlearn bench-expm --out bench.csv
