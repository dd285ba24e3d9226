"""Independent oracles shared by the unit and acceptance tests.

These deliberately avoid the library's own optimization routines: the
restricted-eigenvalue oracle decomposes the cone program into an exhaustive
angle grid over the on-support block and an exact convex inner minimization
(FISTA with l1-ball projection), which is a different route than the
estimator's joint projected-gradient search.
"""

import itertools

import numpy as np


def project_l1_ball_rows(U, radius=1.0):
    """Euclidean projection of each row of U onto the l1 ball (Duchi et al. 2008)."""
    if U.shape[1] == 0:
        return U
    V = np.abs(U)
    inside = V.sum(axis=1) <= radius
    W = np.sort(V, axis=1)[:, ::-1]
    cssv = np.cumsum(W, axis=1) - radius
    ks = np.arange(1, U.shape[1] + 1)
    rho = (W - cssv / ks > 0).cumsum(axis=1).argmax(axis=1)
    theta = np.maximum(cssv[np.arange(len(U)), rho] / (rho + 1), 0.0)
    out = np.sign(U) * np.maximum(V - theta[:, None], 0.0)
    out[inside] = U[inside]
    return out


def _inner_min(psi, R, Rc, dirs, iters=2000, rtol=1e-13):
    """min over the cone slice of d'Psi d for every direction d (rows of dirs)."""
    quad_r = np.einsum("ni,ij,nj->n", dirs, psi[np.ix_(R, R)], dirs)
    if len(Rc) == 0:
        return quad_r
    A = psi[np.ix_(Rc, Rc)]
    budgets = 3.0 * np.abs(dirs).sum(axis=1)
    Bd = dirs @ psi[np.ix_(R, Rc)]  # n x |Rc|
    L = max(2.0 * np.linalg.eigvalsh(A).max(), 1e-12)
    U = np.zeros((len(dirs), len(Rc)))
    Z = U.copy()
    t_prev = 1.0
    prev_val = None
    for it in range(iters):
        G = 2.0 * (Z @ A) + 2.0 * Bd
        U_new = Z - G / L
        U_new = project_l1_ball_rows(U_new / budgets[:, None], 1.0) * budgets[:, None]
        t_new = (1.0 + np.sqrt(1.0 + 4.0 * t_prev**2)) / 2.0
        Z = U_new + (t_prev - 1.0) / t_new * (U_new - U)
        U, t_prev = U_new, t_new
        if it % 50 == 49:
            val = (quad_r + 2.0 * np.einsum("ni,ni->n", U, Bd) + np.einsum("ni,ij,nj->n", U, A, U)).min()
            if prev_val is not None and abs(prev_val - val) <= rtol * max(abs(val), 1e-12):
                break
            prev_val = val
    return quad_r + 2.0 * np.einsum("ni,ni->n", U, Bd) + np.einsum("ni,ij,nj->n", U, A, U)


def restricted_eigenvalue_bruteforce(psi, r, angle_step=1e-3, refine=True):
    """Fine-grid minimizer of the restricted-eigenvalue program for |R| <= 2.

    For each subset the on-support direction runs over a grid of the unit
    sphere (a two-point set for |R| = 1, an angle grid for |R| = 2); the
    off-support block is an exact convex problem solved by FISTA.
    """
    psi = np.asarray(psi, dtype=np.float64)
    m = psi.shape[0]
    best = np.inf
    for size in range(1, r + 1):
        if size > 2:
            raise ValueError("brute-force oracle only supports r <= 2")
        for subset in itertools.combinations(range(m), size):
            R = np.asarray(subset, dtype=np.intp)
            mask = np.zeros(m, dtype=bool)
            mask[R] = True
            Rc = np.flatnonzero(~mask)
            if size == 1:
                dirs = np.array([[1.0]])  # -d gives the same ratio
                vals = _inner_min(psi, R, Rc, dirs)
                best = min(best, float(vals.min()))
                continue
            thetas = np.arange(0.0, np.pi, angle_step * 2.0)
            dirs = np.column_stack([np.cos(thetas), np.sin(thetas)])
            vals = _inner_min(psi, R, Rc, dirs)
            best_idx = int(np.argmin(vals))
            best = min(best, float(vals[best_idx]))
            if refine:
                # parabolic refinement around the best angle
                center = thetas[best_idx]
                span = angle_step * 2.0
                for _ in range(12):
                    local = center + np.linspace(-span, span, 9)
                    dirs = np.column_stack([np.cos(local), np.sin(local)])
                    vals = _inner_min(psi, R, Rc, dirs)
                    j = int(np.argmin(vals))
                    center = local[j]
                    best = min(best, float(vals[j]))
                    span /= 4.0
    return best


def random_spd(rng, m, extra=2):
    G = rng.standard_normal((m, m + extra))
    return G @ G.T / (m + extra)
