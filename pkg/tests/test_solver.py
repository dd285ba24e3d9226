import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hdvar.errors import AllWeightsInfinite
from hdvar.linalg import cholesky_solve, least_squares
from hdvar.solver import (
    PenaltySpec,
    kkt_check,
    lambda_max,
    lasso_cd,
    lasso_path,
    objective,
    ridge,
    soft_threshold,
)


def rng_for(seed):
    return np.random.Generator(np.random.Philox(seed))


def random_instance(seed, T=20, m=2, snr=1.0):
    rng = rng_for(seed)
    X = rng.standard_normal((T, m))
    beta = rng.standard_normal(m)
    y = X @ beta + snr * rng.standard_normal(T)
    return X, y


def grid_search_2d(X, y, pen, lo=-2.0, hi=2.0, step=1e-3):
    """Brute-force minimizer of the objective over a 2-d grid."""
    T = X.shape[0]
    lam_w = pen.lam_w(2)
    b1 = np.arange(lo, hi + step / 2, step)
    b2 = b1
    G = X.T @ X / T
    c = X.T @ y / T
    const = float(y @ y) / T
    # f(b) = b'Gb - 2c'b + const + 2*sum lam_w|b|
    f1 = G[0, 0] * b1**2 - 2 * c[0] * b1 + 2 * lam_w[0] * np.abs(b1)
    f2 = G[1, 1] * b2**2 - 2 * c[1] * b2 + 2 * lam_w[1] * np.abs(b2)
    total = f1[:, None] + f2[None, :] + 2 * G[0, 1] * np.outer(b1, b2) + const
    idx = np.unravel_index(np.argmin(total), total.shape)
    return np.array([b1[idx[0]], b2[idx[1]]]), float(total[idx])


class TestSoftThreshold:
    def test_inside(self):
        assert soft_threshold(0.5, 1.0) == 0.0

    def test_positive(self):
        assert soft_threshold(2.0, 1.0) == 1.0

    def test_negative(self):
        assert soft_threshold(-3.0, 0.5) == -2.5

    def test_exact_tie_is_zero(self):
        assert soft_threshold(1.0, 1.0) == 0.0
        assert soft_threshold(-1.0, 1.0) == 0.0

    @given(st.floats(-1e6, 1e6), st.floats(0, 1e6))
    def test_shrinks_toward_zero(self, z, gamma):
        out = soft_threshold(z, gamma)
        assert abs(out) == max(abs(z) - gamma, 0.0)
        assert out * z >= 0.0


class TestLassoCd:
    def test_zero_solution_at_large_lambda(self):
        X, y = random_instance(0, T=30, m=5)
        lam = 1.001 * lambda_max(X, y)
        res = lasso_cd(X, y, PenaltySpec(lam))
        assert np.all(res.beta == 0.0)
        assert res.converged

    def test_lambda_zero_matches_ols(self):
        X, y = random_instance(1, T=50, m=5)
        res = lasso_cd(X, y, PenaltySpec(0.0))
        assert res.converged
        assert np.abs(res.beta - least_squares(X, y)).max() <= 1e-6

    def test_grid_search_oracle(self):
        for seed in range(5):
            X, y = random_instance(seed, T=20, m=2)
            lam = 0.3 * lambda_max(X, y)
            pen = PenaltySpec(lam)
            res = lasso_cd(X, y, pen, tol=1e-10)
            _, f_grid = grid_search_2d(X, y, pen)
            f_cd = objective(X, y, res.beta, pen)
            assert f_cd <= f_grid + 1e-5

    def test_objective_descent(self):
        X, y = random_instance(2, T=40, m=8)
        pen = PenaltySpec(0.05 * lambda_max(X, y))
        res = lasso_cd(X, y, pen, track_objective=True)
        hist = np.array(res.objective_history)
        assert np.all(np.diff(hist) <= 1e-12)

    def test_solution_scaling(self):
        X, y = random_instance(3, T=30, m=4)
        lam0 = 0.2 * lambda_max(X, y)
        base = lasso_cd(X, y, PenaltySpec(lam0), tol=1e-12)
        for c in (2.0, 7.5):
            scaled = lasso_cd(X, c * y, PenaltySpec(c * lam0), tol=1e-12)
            denom = max(np.abs(c * base.beta).max(), 1e-12)
            assert np.abs(scaled.beta - c * base.beta).max() <= 1e-8 * denom

    def test_infinite_weight_exclusion(self):
        X, y = random_instance(4, T=30, m=6)
        w = np.ones(6)
        w[[1, 4]] = np.inf
        lam = 0.1 * lambda_max(X, y)
        full = lasso_cd(X, y, PenaltySpec(lam, weights=w), tol=1e-12)
        assert np.all(full.beta[[1, 4]] == 0.0)
        keep = [0, 2, 3, 5]
        reduced = lasso_cd(X[:, keep], y, PenaltySpec(lam, weights=np.ones(4)), tol=1e-12)
        assert np.abs(full.beta[keep] - reduced.beta).max() <= 1e-8

    def test_zero_column_pinned(self):
        rng = rng_for(5)
        X = rng.standard_normal((20, 3))
        X[:, 1] = 0.0
        y = rng.standard_normal(20)
        res = lasso_cd(X, y, PenaltySpec(0.0))
        assert res.beta[1] == 0.0
        assert res.converged

    def test_warm_start_converges_immediately(self):
        X, y = random_instance(6, T=30, m=4)
        pen = PenaltySpec(0.1 * lambda_max(X, y))
        first = lasso_cd(X, y, pen, tol=1e-10)
        again = lasso_cd(X, y, pen, tol=1e-10, warm_start=first.beta)
        assert again.iterations <= 2

    def test_max_iter_reported(self):
        X, y = random_instance(7, T=40, m=10)
        res = lasso_cd(X, y, PenaltySpec(1e-9 * lambda_max(X, y)), tol=1e-14, max_iter=1)
        assert not res.converged


class TestKktCheck:
    def test_ols_at_lambda_zero(self):
        X, y = random_instance(8, T=40, m=5)
        beta = least_squares(X, y)
        assert kkt_check(X, y, beta, PenaltySpec(0.0)) <= 1e-8

    def test_zero_beta_large_lambda(self):
        X, y = random_instance(9, T=25, m=4)
        lam = lambda_max(X, y)
        assert kkt_check(X, y, np.zeros(4), PenaltySpec(lam)) <= 1e-12

    def test_solver_output_passes(self):
        X, y = random_instance(10, T=30, m=6)
        pen = PenaltySpec(0.05 * lambda_max(X, y))
        res = lasso_cd(X, y, pen, tol=1e-9)
        assert kkt_check(X, y, res.beta, pen) <= 1e-9 + 1e-12


class TestLambdaMax:
    def test_orthogonal_response(self):
        X = np.eye(4)
        y = np.zeros(4)
        assert lambda_max(X, y) == 0.0

    def test_identity_design(self):
        T = 6
        X = np.eye(T)
        y = np.zeros(T)
        y[0] = 1.0
        assert lambda_max(X, y) == pytest.approx(1.0 / T)

    def test_definition(self):
        X, y = random_instance(11, T=30, m=5)
        lam = lambda_max(X, y)
        res = lasso_cd(X, y, PenaltySpec(1.01 * lam))
        assert np.all(res.beta == 0.0)

    def test_all_weights_infinite(self):
        X, y = random_instance(12, T=10, m=3)
        with pytest.raises(AllWeightsInfinite):
            lambda_max(X, y, np.full(3, np.inf))


class TestLassoPath:
    def test_first_point_zero(self):
        X, y = random_instance(13, T=40, m=6)
        path = lasso_path(X, y, n_lambda=30)
        assert np.all(path[0][1].beta == 0.0)
        lams = [lam for lam, _ in path]
        assert all(a > b for a, b in zip(lams, lams[1:]))

    def test_two_point_path_matches_cold_fits(self):
        X, y = random_instance(14, T=50, m=4)
        path = lasso_path(X, y, n_lambda=2, ratio=0.01, tol=1e-12)
        for lam, res in path:
            cold = lasso_cd(X, y, PenaltySpec(lam), tol=1e-12)
            assert np.abs(res.beta - cold.beta).max() <= 1e-8

    def test_active_set_mostly_monotone_on_experiment_a(self):
        from hdvar import mc, var

        model, _ = mc.make_dgp("A", 10)
        data = var.simulate(model, 200, seed=3)
        prob = var.stack(data)
        path = lasso_path(prob.X, prob.ys[0], n_lambda=100)
        sizes = [int(np.count_nonzero(res.beta)) for _, res in path]
        pairs = list(zip(sizes, sizes[1:]))
        frac = np.mean([b >= a for a, b in pairs])
        assert frac >= 0.95


class TestRidge:
    def test_penalty_dominated_limit(self):
        X, y = random_instance(15, T=30, m=5)
        beta, df = ridge(X, y, 1e8)
        assert np.linalg.norm(beta) < 1e-6
        assert df < 1e-5 * 5

    def test_identity_closed_form(self):
        T = 7
        X = np.eye(T)
        y = np.arange(1.0, T + 1)
        lam = 2.5
        beta, df = ridge(X, y, lam)
        assert np.abs(beta - y / (1 + lam)).max() <= 1e-12
        assert df == pytest.approx(T / (1 + lam), abs=1e-10)

    def test_normal_equations_oracle(self):
        rng = rng_for(16)
        X = rng.standard_normal((20, 5))
        y = rng.standard_normal(20)
        lam = 0.7
        beta, _ = ridge(X, y, lam)
        direct = cholesky_solve(X.T @ X + lam * np.eye(5), X.T @ y)
        assert np.abs(beta - direct).max() <= 1e-8

    def test_df_approaches_rank_at_tiny_lambda(self):
        rng = rng_for(17)
        X = rng.standard_normal((40, 6))
        _, df = ridge(X, rng.standard_normal(40), 1e-10)
        assert abs(df - 6) < 1e-4


class TestObjective:
    @settings(max_examples=25)
    @given(st.integers(0, 10_000))
    def test_matches_direct_evaluation(self, seed):
        X, y = random_instance(seed, T=15, m=3)
        rng = rng_for(seed + 1)
        beta = rng.standard_normal(3)
        lam = 0.3
        pen = PenaltySpec(lam)
        direct = float(np.sum((y - X @ beta) ** 2) / 15 + 2 * lam * np.abs(beta).sum())
        assert objective(X, y, beta, pen) == pytest.approx(direct, rel=1e-12)
