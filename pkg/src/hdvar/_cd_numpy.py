"""Pure-NumPy coordinate-descent sweep, selected when the compiled kernel is absent.

Mirrors the semantics of _cd_kernel.sweep exactly (same update order, same
pinning rules); only the arithmetic backend differs.
"""

import numpy as np


def sweep(X, r, beta, col_nsq, lam_w):
    """One full cyclic sweep; updates ``beta`` and the residual ``r`` in place."""
    T, m = X.shape
    max_delta = 0.0
    for j in range(m):
        nj = col_nsq[j]
        gamma = lam_w[j]
        bj = beta[j]
        xj = X[:, j]
        if nj == 0.0 or gamma == np.inf:
            if bj != 0.0:
                r += xj * bj
                beta[j] = 0.0
                max_delta = max(max_delta, abs(bj))
            continue
        z = (xj @ r) / T + nj * bj
        if z > gamma:
            new = (z - gamma) / nj
        elif z < -gamma:
            new = (z + gamma) / nj
        else:
            new = 0.0
        if new != bj:
            r -= xj * (new - bj)
            beta[j] = new
            max_delta = max(max_delta, abs(new - bj))
    return max_delta
