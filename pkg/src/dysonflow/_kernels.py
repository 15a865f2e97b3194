"""Compiled O(N^2) pair sums shared by the particle and mean-field solvers.

Every per-particle sum runs in ascending j, so results do not depend on how
callers distribute work across threads.
"""
import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def pair_interaction(x, R):
    """(1/N) sum_{j != i} phi_R(x_i - x_j); R = inf gives the bare 1/x kernel."""
    n = x.shape[0]
    out = np.zeros(n)
    inv_r = 1.0 / R
    r2 = R * R
    for i in range(n):
        xi = x[i]
        for j in range(i + 1, n):
            d = xi - x[j]
            if abs(d) >= inv_r:
                f = 1.0 / d
            else:
                f = r2 * d
            out[i] += f
            out[j] -= f
    for i in range(n):
        out[i] /= n
    return out


@njit(cache=True, nogil=True)
def log_pair_sum(x):
    """sum_{i<j} log|x_i - x_j|."""
    n = x.shape[0]
    s = 0.0
    for i in range(n):
        for j in range(i + 1, n):
            s += np.log(abs(x[j] - x[i]))
    return s


@njit(cache=True, nogil=True)
def divided_difference_sum(x, fp, fpp):
    """sum_{i,j} (f'(x_i) - f'(x_j)) / (x_i - x_j) with f''(x_i) on the diagonal."""
    n = x.shape[0]
    s = 0.0
    for i in range(n):
        s += fpp[i]
        for j in range(i + 1, n):
            s += 2.0 * (fp[i] - fp[j]) / (x[i] - x[j])
    return s
