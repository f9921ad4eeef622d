import numpy as np
import pytest
import scipy.linalg

from statesecrecy.gaussians import (
    CovarianceMatrix,
    GaussianBelief,
    NumericError,
    condition,
    covariance_sqrt,
    dominant_left_eigenvector,
    kalman_gain,
    pseudoinverse,
    psd_floor,
    solve_dare,
    spectral_radius,
)

from helpers import random_psd


class TestCovarianceMatrix:
    def test_symmetrizes_small_asymmetry(self):
        cov = CovarianceMatrix([[1.0, 0.5 + 1e-12], [0.5, 1.0]])
        np.testing.assert_array_equal(cov.m, cov.m.T)

    def test_rejects_flagrant_asymmetry(self):
        with pytest.raises(ValueError, match="asymmetry"):
            CovarianceMatrix([[1.0, 0.3], [0.0, 1.0]])

    def test_rejects_negative_definite(self):
        with pytest.raises(ValueError, match="not PSD"):
            CovarianceMatrix([[-1.0, 0.0], [0.0, 1.0]])

    def test_accepts_roundoff_negative_eigenvalue(self):
        cov = CovarianceMatrix([[1e-10, 0.0], [0.0, -1e-10]])
        assert cov.dim == 2

    def test_scale_relative_psd_tolerance(self):
        # -1e-3 is far below tolerance at scale 1 but fine at scale 1e12.
        with pytest.raises(ValueError):
            CovarianceMatrix([[1.0, 0.0], [0.0, -1e-3]])
        big = CovarianceMatrix([[1e12, 0.0], [0.0, -1e-3]])
        assert big.trace() == pytest.approx(1e12)

    def test_zero_and_accessors(self):
        cov = CovarianceMatrix.zero(3)
        assert cov.dim == 3
        assert cov.trace() == 0.0
        np.testing.assert_array_equal(cov.diagonal(), np.zeros(3))
        assert cov.min_eigenvalue() == 0.0

    def test_rejects_nonsquare_and_nonfinite(self):
        with pytest.raises(ValueError, match="square"):
            CovarianceMatrix(np.ones((2, 3)))
        with pytest.raises(ValueError, match="finite"):
            CovarianceMatrix([[np.nan]])


class TestGaussianBelief:
    def test_block_partition_enforced(self):
        with pytest.raises(ValueError, match="cover"):
            GaussianBelief(np.zeros(3), np.eye(3), [("x", 2), ("z", 2)])
        with pytest.raises(ValueError, match="duplicate"):
            GaussianBelief(np.zeros(2), np.eye(2), [("x", 1), ("x", 1)])
        with pytest.raises(ValueError, match="dim"):
            GaussianBelief(np.zeros(3), np.eye(2), [("x", 3)])

    def test_marginal_and_slices(self):
        joint = GaussianBelief([1.0, 2.0, 3.0], np.diag([1.0, 2.0, 3.0]),
                               [("x", 2), ("z", 1)])
        assert joint.block_slice("z") == slice(2, 3)
        marg = joint.marginal("x")
        np.testing.assert_array_equal(marg.mean, [1.0, 2.0])
        np.testing.assert_array_equal(marg.cov.m, np.diag([1.0, 2.0]))
        with pytest.raises(KeyError):
            joint.block_slice("w")


class TestCondition:
    def test_hand_schur_complement(self):
        joint = GaussianBelief([0.0, 0.0], [[2.0, 1.0], [1.0, 1.0]],
                               [("x", 1), ("z", 1)])
        post = condition(joint, "z", [1.0])
        assert post.mean[0] == pytest.approx(1.0)
        assert post.cov.m[0, 0] == pytest.approx(1.0)  # 2 - 1*1*1

    def test_independent_blocks_leave_prior(self):
        joint = GaussianBelief([0.5, -2.0], [[3.0, 0.0], [0.0, 4.0]],
                               [("x", 1), ("z", 1)])
        post = condition(joint, "z", [17.0])
        assert post.mean[0] == pytest.approx(0.5)
        assert post.cov.m[0, 0] == pytest.approx(3.0)

    def test_perfect_observation(self):
        # z is x itself: all covariance blocks equal.
        joint = GaussianBelief([0.0, 0.0], [[2.0, 2.0], [2.0, 2.0]],
                               [("x", 1), ("z", 1)])
        post = condition(joint, "z", [0.7])
        assert post.mean[0] == pytest.approx(0.7)
        assert abs(post.cov.m[0, 0]) < 1e-12

    def test_singular_observed_block_is_legal(self):
        joint = GaussianBelief(np.zeros(2), [[1.0, 0.0], [0.0, 0.0]],
                               [("x", 1), ("z", 1)])
        post = condition(joint, "z", [0.0])
        assert post.cov.m[0, 0] == pytest.approx(1.0)

    def test_dimension_mismatch(self):
        joint = GaussianBelief(np.zeros(2), np.eye(2), [("x", 1), ("z", 1)])
        with pytest.raises(ValueError, match="length"):
            condition(joint, "z", [1.0, 2.0])

    def test_keeps_remaining_blocks_in_order(self):
        joint = GaussianBelief(np.zeros(4), np.eye(4),
                               [("a", 1), ("obs", 2), ("b", 1)])
        post = condition(joint, "obs", [0.0, 0.0])
        assert post.block_names() == ("a", "b")
        assert post.dim == 2

    def test_never_increases_covariance(self):
        # Information monotonicity: prior marginal minus posterior is PSD.
        rng = np.random.default_rng(5)
        for _ in range(50):
            nx = int(rng.integers(1, 4))
            nz = int(rng.integers(1, 4))
            cov = random_psd(rng, nx + nz)
            if rng.random() < 0.3:
                # make the observed block singular
                cov[nx:, :] = 0.0
                cov[:, nx:] = 0.0
            joint = GaussianBelief(rng.normal(size=nx + nz), 0.5 * (cov + cov.T),
                                   [("x", nx), ("z", nz)])
            post = condition(joint, "z", rng.normal(size=nz))
            gap = joint.cov.m[:nx, :nx] - post.cov.m
            assert np.linalg.eigvalsh(0.5 * (gap + gap.T)).min() >= -1e-9


class TestPseudoinverse:
    def test_identity(self):
        np.testing.assert_allclose(pseudoinverse(np.eye(3)), np.eye(3))

    def test_zero_matrix(self):
        np.testing.assert_array_equal(pseudoinverse(np.zeros((2, 2))), np.zeros((2, 2)))

    def test_singular_diagonal(self):
        np.testing.assert_allclose(pseudoinverse(np.diag([2.0, 0.0])), np.diag([0.5, 0.0]))

    def test_penrose_identities(self):
        rng = np.random.default_rng(2)
        for _ in range(25):
            rows = int(rng.integers(1, 5))
            cols = int(rng.integers(1, 5))
            m = rng.normal(size=(rows, cols))
            if rng.random() < 0.5 and min(rows, cols) > 1:
                m[:, -1] = m[:, 0]  # force rank deficiency
            p = pseudoinverse(m)
            np.testing.assert_allclose(m @ p @ m, m, atol=1e-9)
            np.testing.assert_allclose(p @ m @ p, p, atol=1e-9)
            np.testing.assert_allclose((m @ p).T, m @ p, atol=1e-9)
            np.testing.assert_allclose((p @ m).T, p @ m, atol=1e-9)

    def test_psd_input_gives_symmetric_psd_output(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            n = int(rng.integers(1, 5))
            cov = random_psd(rng, n, jitter=0.0)  # possibly singular
            p = pseudoinverse(cov)
            np.testing.assert_allclose(p, p.T, atol=1e-10)
            assert np.linalg.eigvalsh(0.5 * (p + p.T)).min() >= -1e-9


class TestSolveDare:
    def test_scalar_closed_form(self):
        P = solve_dare([[2.0]], [[1.0]], [[1.0]], [[1.0]])
        assert P.m[0, 0] == pytest.approx(2.0 + np.sqrt(5.0), abs=1e-9)

    def test_zero_dynamics_fixed_point_is_q(self):
        Q = [[0.7, 0.1], [0.1, 0.4]]
        P = solve_dare(np.zeros((2, 2)), np.eye(2), Q, np.eye(2))
        np.testing.assert_allclose(P.m, Q, atol=1e-9)

    def test_two_state_output_system_golden(self):
        A = [[1.2, 0.1], [0.0, 0.5]]
        C = [[1.0, 1.0]]
        Q = [[0.6, 0.2], [0.2, 0.5]]
        R = [[1.0]]
        # Frozen from fixed-point iteration at tolerance 1e-12.
        golden = np.array([[1.6928000451577901, 0.0479927824000422],
                           [0.0479927824000422, 0.6227127702138385]])
        P = solve_dare(A, C, Q, R)
        np.testing.assert_allclose(P.m, golden, atol=1e-9)
        # Independent oracle: scipy's DARE solver (estimation form via duality).
        ref = scipy.linalg.solve_discrete_are(np.asarray(A).T, np.asarray(C).T,
                                              np.asarray(Q), np.asarray(R))
        np.testing.assert_allclose(P.m, ref, atol=1e-9)

    def test_fixed_point_residual(self):
        rng = np.random.default_rng(4)
        for _ in range(10):
            A = rng.normal(size=(2, 2)) * 0.9
            C = rng.normal(size=(1, 2))
            Q = random_psd(rng, 2)
            R = random_psd(rng, 1)
            P = np.asarray(solve_dare(A, C, Q, R))
            S = C @ P @ C.T + R
            rhs = A @ P @ A.T + Q - A @ P @ C.T @ np.linalg.solve(S, C @ P @ A.T)
            assert np.max(np.abs(P - rhs)) <= 1e-9

    def test_divergence_raises(self):
        # Unstable and unobservable: the iteration blows up.
        with pytest.raises(NumericError):
            solve_dare([[2.0]], [[0.0]], [[1.0]], [[1.0]])


class TestKalmanGain:
    def test_scalar_gain(self):
        P = 2.0 + np.sqrt(5.0)
        K = kalman_gain([[P]], [[1.0]], [[1.0]])
        assert K[0, 0] == pytest.approx(P / (P + 1.0), abs=1e-12)
        assert K[0, 0] == pytest.approx(0.80902, abs=1e-5)

    def test_large_noise_kills_gain(self):
        P = np.asarray([[2.0 + np.sqrt(5.0)]])
        K = kalman_gain(P, [[1.0]], [[1e12]])
        assert np.max(np.abs(K)) <= 1e-11

    def test_perfect_measurement_via_pseudoinverse(self):
        P = random_psd(np.random.default_rng(6), 3)
        K = kalman_gain(P, np.eye(3), np.zeros((3, 3)))
        np.testing.assert_allclose(K, np.eye(3), atol=1e-9)

    def test_inconsistent_singular_innovation_raises(self):
        # The second output row is so small that its innovation variance
        # truncates to zero, leaving the gain equation unsolvable there.
        C = np.array([[1.0, 0.0], [0.0, 1e-7]])
        with pytest.raises(NumericError, match="singular"):
            kalman_gain(np.eye(2), C, np.zeros((2, 2)))


class TestSpectral:
    def test_triangular(self):
        assert spectral_radius([[1.2, 0.1], [0.0, 0.5]]) == pytest.approx(1.2)

    def test_identity(self):
        assert spectral_radius(np.eye(4)) == pytest.approx(1.0)

    def test_scaled_rotation(self):
        rot = 2.0 * np.array([[0.0, -1.0], [1.0, 0.0]])
        assert spectral_radius(rot) == pytest.approx(2.0)

    def test_left_eigenvector(self):
        A = np.array([[1.2, 0.1], [0.0, 0.5]])
        v = dominant_left_eigenvector(A)
        np.testing.assert_allclose(v @ A, 1.2 * v, atol=1e-12)

    def test_left_eigenvector_complex_dominant_raises(self):
        rot = 2.0 * np.array([[0.0, -1.0], [1.0, 0.0]])
        with pytest.raises(NumericError, match="complex"):
            dominant_left_eigenvector(rot)


class TestNumericHygiene:
    def test_psd_floor_clears_tiny_negatives(self):
        m = np.diag([1.0, -1e-12])
        floored = psd_floor(m)
        assert np.linalg.eigvalsh(floored).min() >= 0.0
        np.testing.assert_allclose(floored, np.diag([1.0, 0.0]), atol=1e-11)

    def test_psd_floor_leaves_real_violations(self):
        m = np.diag([1.0, -0.5])
        np.testing.assert_array_equal(psd_floor(m), m)

    def test_covariance_sqrt_definite(self):
        cov = random_psd(np.random.default_rng(7), 3)
        L = covariance_sqrt(cov)
        np.testing.assert_allclose(L @ L.T, cov, atol=1e-12)

    def test_covariance_sqrt_singular_fallback(self):
        cov = np.diag([2.0, 0.0])
        L = covariance_sqrt(cov)
        np.testing.assert_allclose(L @ L.T, cov, atol=1e-12)
