import math

import numpy as np
import pytest

from pdeforest.grid import FeatureMatrix, FieldColumn
from pdeforest.regress import (
    CandidateScore,
    RegressionError,
    RegressionParams,
    ridge_solve,
    score,
    stridge,
)


def as_features(a):
    cols = tuple(
        FieldColumn(values=a[:, i], finite_fraction=float(np.isfinite(a[:, i]).mean()))
        for i in range(a.shape[1])
    )
    labels = tuple(f"c{i}" for i in range(a.shape[1]))
    return FeatureMatrix(columns=cols, n_rows=a.shape[0], term_labels=labels)


def as_target(y):
    return FieldColumn(values=y, finite_fraction=float(np.isfinite(y).mean()))


def best_subset_support_by_bic(a, y):
    """Exhaustive best-subset oracle: BIC-score all 2**k supports."""
    n, k = a.shape
    best_bic, best_support = None, frozenset()
    for mask in range(2**k):
        idx = [i for i in range(k) if (mask >> i) & 1]
        if idx:
            coef, *_ = np.linalg.lstsq(a[:, idx], y, rcond=None)
            r = a[:, idx] @ coef - y
        else:
            r = y
        rss = max(float(r @ r), 1e-300)
        bic = len(idx) * math.log(n) + n * math.log(rss / n)
        if best_bic is None or bic < best_bic:
            best_bic, best_support = bic, frozenset(idx)
    return best_support


class TestRidgeSolve:
    def test_single_column_equal_to_target(self):
        y = np.linspace(1.0, 2.0, 50)
        xi = ridge_solve(y[:, None], y, lam=0.0)
        assert abs(xi[0] - 1.0) < 1e-12

    def test_orthonormal_columns_give_projections(self):
        rng = np.random.default_rng(1)
        q, _ = np.linalg.qr(rng.standard_normal((60, 4)))
        y = rng.standard_normal(60)
        xi = ridge_solve(q, y, lam=0.0)
        assert np.abs(xi - q.T @ y).max() < 1e-12

    def test_recovers_known_coefficients_with_small_ridge(self):
        rng = np.random.default_rng(7)
        a = rng.standard_normal((200, 4))
        xi_true = np.array([1.0, -2.0, 0.5, 3.0])
        y = a @ xi_true
        xi = ridge_solve(a, y, lam=1e-5)
        assert np.abs(xi - xi_true).max() < 1e-3

    def test_singular_system_with_zero_lambda_is_reported(self):
        a = np.ones((20, 2))  # duplicated column, rank 1
        y = np.arange(20.0)
        with pytest.raises(RegressionError):
            ridge_solve(a, y, lam=0.0)

    def test_normalized_solve_matches_raw_solution(self):
        rng = np.random.default_rng(8)
        a = rng.standard_normal((100, 3)) * np.array([1.0, 100.0, 1e-3])
        y = a @ np.array([2.0, -0.5, 4.0])
        raw = ridge_solve(a, y, lam=0.0)
        scaled = ridge_solve(a, y, lam=0.0, normalize_columns=True)
        assert np.abs(raw - scaled).max() < 1e-8

    def test_shrinkage_is_monotone_in_lambda(self):
        rng = np.random.default_rng(9)
        a = rng.standard_normal((80, 5))
        y = rng.standard_normal(80)
        norms = [
            float(np.linalg.norm(ridge_solve(a, y, lam)))
            for lam in (0.0, 1e-3, 1.0, 10.0, 1e3)
        ]
        assert all(n1 >= n2 - 1e-12 for n1, n2 in zip(norms, norms[1:]))

    def test_underdetermined_rejected(self):
        with pytest.raises(ValueError):
            ridge_solve(np.ones((3, 5)), np.ones(3), lam=1.0)


class TestStridge:
    def test_exact_term_survives_orthogonal_decoys_vanish(self):
        rng = np.random.default_rng(11)
        n = 64
        col1 = rng.standard_normal(n)
        y = 2.0 * col1
        decoys = rng.standard_normal((n, 3))
        # project decoys orthogonal to y so their coefficients are exactly 0
        decoys -= np.outer(y, y @ decoys) / (y @ y)
        a = np.column_stack([col1, decoys])
        params = RegressionParams(lam=0.0, tol=0.1)
        xi = stridge(a, y, params)
        assert abs(xi[0] - 2.0) < 1e-10
        assert np.abs(xi[1:]).max() == 0.0

    def test_support_matches_best_subset_oracle_on_noisy_system(self):
        rng = np.random.default_rng(0)
        a = rng.standard_normal((200, 5))
        xi_true = np.array([1.5, 0.0, -0.7, 0.0, 0.0])
        y = a @ xi_true + 1e-3 * rng.standard_normal(200)
        params = RegressionParams(lam=1e-5, tol=0.05, normalize_columns=True)
        xi = stridge(a, y, params)
        support = frozenset(np.flatnonzero(xi).tolist())
        assert support == best_subset_support_by_bic(a, y) == frozenset({0, 2})

    def test_all_coefficients_thresholded_gives_zero_vector(self):
        rng = np.random.default_rng(13)
        a = rng.standard_normal((50, 3))
        y = 1e-9 * rng.standard_normal(50)
        xi = stridge(a, y, RegressionParams(tol=1.0))
        assert np.array_equal(xi, np.zeros(3))

    def test_fixed_point_on_own_active_set(self):
        rng = np.random.default_rng(14)
        a = rng.standard_normal((150, 5))
        y = a @ np.array([3.0, 0.0, -2.0, 0.0, 1.5]) + 1e-3 * rng.standard_normal(150)
        params = RegressionParams(tol=0.5)
        xi = stridge(a, y, params)
        active = np.flatnonzero(xi)
        xi_again = stridge(a[:, active], y, params)
        assert np.flatnonzero(xi_again).size == active.size
        assert np.abs(xi_again - xi[active]).max() < 1e-10

    def test_support_is_scale_invariant_with_normalization(self):
        rng = np.random.default_rng(15)
        a = rng.standard_normal((120, 4))
        y = a @ np.array([2.0, 0.0, -1.0, 0.0]) + 1e-3 * rng.standard_normal(120)
        params = RegressionParams(tol=0.5)
        base = stridge(a, y, params)
        scaled = a.copy()
        scaled[:, 0] *= 1000.0
        xi = stridge(scaled, y, params)
        assert np.array_equal(np.flatnonzero(xi), np.flatnonzero(base))
        assert abs(xi[0] * 1000.0 - base[0]) < 1e-6

    def test_support_recovery_rate_against_oracle(self):
        # 100 random 200x5 systems; recovered support must match the
        # exhaustive BIC oracle in at least 95 and the planted truth in all.
        # The oracle itself overfits by one noise column whenever a chi^2(1)
        # fluctuation exceeds ln(200) (~2% per noise column), which is the
        # only source of disagreement.
        rng = np.random.default_rng(13)
        params = RegressionParams()
        oracle_hits = truth_hits = 0
        for _ in range(100):
            a = rng.standard_normal((200, 5))
            size = int(rng.integers(1, 4))
            support = rng.choice(5, size=size, replace=False)
            xi_true = np.zeros(5)
            xi_true[support] = rng.choice([-1.0, 1.0], size=size) * rng.uniform(
                10 * params.tol, 30 * params.tol, size=size
            )
            y = a @ xi_true + 1e-3 * rng.standard_normal(200)
            got = frozenset(np.flatnonzero(stridge(a, y, params)).tolist())
            if got == best_subset_support_by_bic(a, y):
                oracle_hits += 1
            if got == frozenset(support.tolist()):
                truth_hits += 1
        assert oracle_hits >= 95
        assert truth_hits == 100

    def test_invalid_params_rejected(self):
        with pytest.raises(ValueError):
            RegressionParams(lam=-1.0)
        with pytest.raises(ValueError):
            RegressionParams(tol=0.0)
        with pytest.raises(ValueError):
            RegressionParams(max_sweeps=0)


class TestScore:
    def test_aic_arithmetic(self):
        # two surviving terms and mse = e**-8 give aic = 4 - 16 = -12
        rng = np.random.default_rng(16)
        n = 400
        q, _ = np.linalg.qr(rng.standard_normal((n, 3)))
        c0, c1, r = q[:, 0], q[:, 1], q[:, 2]
        resid = r * math.sqrt(n * math.exp(-8.0))
        y = 5.0 * c0 + 4.0 * c1 + resid
        sc = score(
            as_features(np.column_stack([c0, c1])),
            as_target(y),
            RegressionParams(lam=0.0, tol=1e-6),
        )
        assert sc.valid and sc.k == 2
        assert abs(sc.mse - math.exp(-8.0)) < 1e-12
        assert abs(sc.aic - (-12.0)) < 1e-9

    def test_non_finite_column_invalidates(self):
        a = np.ones((30, 2))
        a[3, 1] = np.inf
        sc = score(as_features(a), as_target(np.ones(30)), RegressionParams())
        assert not sc.valid and sc.aic == math.inf and sc.k == 0

    def test_all_zero_forest_is_invalid(self):
        a = np.zeros((30, 2))
        sc = score(as_features(a), as_target(np.ones(30)), RegressionParams())
        assert not sc.valid and sc.aic == math.inf

    def test_exact_fit_keeps_aic_finite(self):
        y = np.linspace(1.0, 2.0, 30)
        sc = score(
            as_features(y[:, None]), as_target(y), RegressionParams(lam=0.0, tol=0.5)
        )
        assert sc.valid and math.isfinite(sc.aic)

    def test_aic_monotone_in_k_and_mse(self):
        from pdeforest.regress import MSE_FLOOR

        def aic(k, mse):
            return 2 * k + 2 * math.log(max(mse, MSE_FLOOR))

        assert aic(2, 1e-4) < aic(3, 1e-4)
        assert aic(2, 1e-4) < aic(2, 1e-3)

    def test_score_is_pure(self):
        rng = np.random.default_rng(17)
        a = rng.standard_normal((50, 2))
        y = a @ np.array([1.0, 2.0])
        s1 = score(as_features(a), as_target(y), RegressionParams(tol=0.5))
        s2 = score(as_features(a), as_target(y), RegressionParams(tol=0.5))
        assert np.array_equal(s1.xi, s2.xi) and s1.aic == s2.aic

    def test_candidate_score_invariants(self):
        rng = np.random.default_rng(18)
        a = rng.standard_normal((80, 3))
        y = a @ np.array([2.0, 0.0, -3.0]) + 1e-4 * rng.standard_normal(80)
        sc = score(as_features(a), as_target(y), RegressionParams(tol=0.5))
        assert sc.k == int(np.count_nonzero(sc.xi))
        assert sc.aic == pytest.approx(2 * sc.k + 2 * math.log(sc.mse))


class TestOnBenchmarkData:
    def test_burgers_decoys_are_thresholded_away(self, burgers_ds):
        # correct pair plus two decoy terms: the support must shrink to the
        # genuine terms and their coefficients must match the known equation
        from pdeforest.expr import Forest, parse_computable_string
        from pdeforest.grid import build_feature_matrix, ut_vector

        forest = Forest(
            tuple(
                parse_computable_string(s)
                for s in (
                    "{ * u (d u x) }",
                    "{ d2 u x }",
                    "{ u }",
                    "{ / u x }",
                )
            )
        )
        fm = build_feature_matrix(forest, burgers_ds)
        sc = score(fm, ut_vector(burgers_ds), RegressionParams())
        assert sc.valid
        assert np.flatnonzero(sc.xi).tolist() == [0, 1]
        assert abs(sc.xi[0] - (-1.0011)) <= 0.05 * 1.0011
        assert abs(sc.xi[1] - 0.1024) <= 0.05 * 0.1024
