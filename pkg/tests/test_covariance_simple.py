"""
测试极限协方差：Δ、Σ、μ、Δ̃、Σ̃、缩放均值与经验矩
"""

import sys
import os
# 添加项目根目录到Python路径
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

import unittest

import numpy as np
import scipy.stats
from loguru import logger

from esclust.covariance import (
    ase_covariance,
    ase_covariances,
    ase_delta,
    ase_limit_params,
    asymmetry,
    bernoulli_variances,
    empirical_moments,
    lse_covariance,
    lse_covariances,
    lse_delta_tilde,
    lse_limit_params,
    lse_mu,
    lse_scaled_mean,
)
from esclust.graph import LatentConfig
from esclust.utils.errors import DegenerateConfigurationError, InvalidScalingError

X2 = np.array([[0.4076, 0.1840], [0.1840, 0.4076]])
X3 = np.array([[0.6024, 0.3703], [0.3703, 0.5319]])
SWAP = np.array([[0.0, 1.0], [1.0, 0.0]])


def oracle_ase_covariance(x, pi, k):
    """逐项求和的 Σ(ν_k | x, π)"""
    K, d = x.shape
    delta = np.zeros((d, d))
    for j in range(K):
        delta += pi[j] * np.outer(x[j], x[j])
    inner = np.zeros((d, d))
    for j in range(K):
        p = x[k] @ x[j]
        inner += pi[j] * np.outer(x[j], x[j]) * (p - p * p)
    inv = np.linalg.inv(delta)
    return inv @ inner @ inv


def oracle_lse_covariance(x, pi, k):
    """逐项求和的 Σ̃(ν_k | x, π)，左因子带 1/2"""
    K, d = x.shape
    mu = sum(pi[j] * x[j] for j in range(K))
    dt = np.zeros((d, d))
    for j in range(K):
        dt += pi[j] * np.outer(x[j], x[j]) / (x[j] @ mu)
    inv = np.linalg.inv(dt)
    sk = x[k] @ mu
    out = np.zeros((d, d))
    for j in range(K):
        sj = x[j] @ mu
        p = x[k] @ x[j]
        left = inv @ x[j] / sj - x[k] / (2 * sk)
        right = x[j] @ inv / sj - x[k] / sk
        out += pi[j] * np.outer(left, right) * (p - p * p) / sk
    return out


class TestAseLimit(unittest.TestCase):
    def setUp(self):
        self.half = np.array([0.5, 0.5])
        self.config = LatentConfig(X2, self.half)

    def test_one_block(self):
        logger.info("=== 测试 K=1 的 ASE 协方差 ===")
        p = 0.3
        config = LatentConfig([[np.sqrt(p)]], [1.0])
        np.testing.assert_allclose(ase_delta(config), [[p]], atol=1e-15)
        np.testing.assert_allclose(ase_covariance(0, config), [[1.0 - p]], atol=1e-12)
        logger.info(f"✓ Σ = 1 - p = {1 - p}")

    def test_delta_against_summation(self):
        expected = 0.5 * (np.outer(X2[0], X2[0]) + np.outer(X2[1], X2[1]))
        np.testing.assert_allclose(ase_delta(self.config), expected, atol=1e-12)

    def test_covariance_against_oracle(self):
        for x in (X2, X3):
            config = LatentConfig(x, self.half)
            for k in range(2):
                np.testing.assert_allclose(ase_covariance(k, config), oracle_ase_covariance(x, self.half, k),
                                           atol=1e-12)
        sigmas, diag = ase_covariances(self.config)
        self.assertEqual(sigmas.shape, (2, 2, 2))
        self.assertEqual(diag.clamped, 0)
        self.assertGreater(diag.condition, 1.0)
        logger.info("✓ 与逐项求和一致")

    def test_symmetric_psd_and_block_swap(self):
        S1 = ase_covariance(0, self.config)
        S2 = ase_covariance(1, self.config)
        np.testing.assert_allclose(S1, S1.T, atol=1e-14)
        self.assertGreaterEqual(np.linalg.eigvalsh(S1).min(), -1e-10)
        np.testing.assert_allclose(S1, SWAP @ S2 @ SWAP, atol=1e-12)
        logger.info("✓ 对称半正定，且块交换对称")

    def test_orthogonal_equivariance(self):
        for seed in range(5):
            W = scipy.stats.ortho_group.rvs(2, random_state=seed)
            rotated = LatentConfig(X3 @ W, self.half, strict=False)
            for k in range(2):
                np.testing.assert_allclose(ase_covariance(k, rotated),
                                           W.T @ ase_covariance(k, LatentConfig(X3, self.half)) @ W,
                                           atol=1e-11)

    def test_block_permutation_invariance(self):
        pi = np.array([0.3, 0.7])
        config = LatentConfig(X3, pi)
        permuted = LatentConfig(X3[::-1], pi[::-1])
        np.testing.assert_allclose(ase_covariance(0, config), ase_covariance(1, permuted), atol=1e-12)
        np.testing.assert_allclose(lse_covariance(0, config), lse_covariance(1, permuted), atol=1e-12)

    def test_degenerate_delta(self):
        config = LatentConfig([[0.5, 0.5], [0.5, 0.5]], self.half)
        with self.assertRaises(DegenerateConfigurationError):
            ase_delta(config)
        with self.assertRaises(DegenerateConfigurationError):
            ase_covariance(0, config)

    def test_bernoulli_clamp(self):
        x = np.array([[1.0]])
        V, clamped = bernoulli_variances(x)
        self.assertEqual((V[0, 0], clamped), (0.0, 0))
        V, clamped = bernoulli_variances(x, clamp=True)
        self.assertEqual(clamped, 1)
        self.assertAlmostEqual(V[0, 0], (1 - 1e-6) * 1e-6, places=15)

    def test_limit_params(self):
        params = ase_limit_params(self.config)
        self.assertEqual(len(params.sigmas), 2)
        np.testing.assert_allclose(params.sigmas[1], ase_covariance(1, self.config), atol=1e-14)


class TestLseLimit(unittest.TestCase):
    def setUp(self):
        self.half = np.array([0.5, 0.5])
        self.config = LatentConfig(X2, self.half)

    def test_mu_and_delta_tilde(self):
        logger.info("=== 测试 μ 与 Δ̃ ===")
        mu = lse_mu(self.config)
        np.testing.assert_allclose(mu, 0.5 * (X2[0] + X2[1]), atol=1e-15)
        expected = sum(0.5 * np.outer(v, v) / (v @ mu) for v in X2)
        np.testing.assert_allclose(lse_delta_tilde(self.config), expected, atol=1e-12)

        one = LatentConfig([[0.3, 0.4]], [1.0])
        v = np.array([0.3, 0.4])
        np.testing.assert_allclose(lse_delta_tilde(one), np.outer(v, v) / (v @ v), atol=1e-14)
        logger.info("✓ 与直接求和一致")

    def test_delta_tilde_homogeneity(self):
        np.testing.assert_allclose(lse_mu(LatentConfig(0.5 * X2, self.half)), 0.5 * lse_mu(self.config), atol=1e-15)
        # μ 与 ν 同阶，分母 ν_k·μ 为二阶，Δ̃ 对缩放不变
        for c in (0.5, 2.0):
            scaled = LatentConfig(c * X2, self.half)
            np.testing.assert_allclose(lse_delta_tilde(scaled), lse_delta_tilde(self.config), atol=1e-13)

    def test_covariance_as_printed(self):
        logger.info("=== 测试 Σ̃ 按公式原样计算 ===")
        for x in (X2, X3):
            config = LatentConfig(x, self.half)
            for k in range(2):
                np.testing.assert_allclose(lse_covariance(k, config), oracle_lse_covariance(x, self.half, k),
                                           atol=1e-12)
        sigmas, diag = lse_covariances(LatentConfig(X3, self.half))
        self.assertGreater(diag.asymmetry, 0.0)
        self.assertAlmostEqual(diag.asymmetry, max(asymmetry(S) for S in sigmas), places=15)
        logger.info(f"✓ 与逐项求和一致，非对称度 {diag.asymmetry:.3e}")

    def test_one_block_is_zero(self):
        config = LatentConfig([[np.sqrt(0.3)]], [1.0])
        np.testing.assert_allclose(lse_covariance(0, config), [[0.0]], atol=1e-14)

    def test_block_swap(self):
        S1 = lse_covariance(0, self.config)
        S2 = lse_covariance(1, self.config)
        np.testing.assert_allclose(S1, SWAP @ S2 @ SWAP, atol=1e-12)

    def test_nonpositive_projection(self):
        config = LatentConfig([[1.0, 0.0], [-0.9, 0.1]], self.half, strict=False)
        with self.assertRaises(InvalidScalingError):
            lse_delta_tilde(config)
        with self.assertRaises(InvalidScalingError):
            lse_covariance(0, config)

    def test_scaled_mean(self):
        v = np.array([[0.3, 0.4]])
        np.testing.assert_allclose(lse_scaled_mean(0, v, [100]), v[0] / np.sqrt(100 * 0.25), atol=1e-15)
        m = lse_scaled_mean(0, X2, [450, 450])
        expected = X2[0] / np.sqrt(450 * X2[0] @ X2[0] + 450 * X2[0] @ X2[1])
        np.testing.assert_allclose(m, expected, atol=1e-15)
        np.testing.assert_allclose(lse_scaled_mean(0, X2, [900, 900]), m / np.sqrt(2), atol=1e-15)
        self.assertLess(np.linalg.norm(m), np.linalg.norm(X2[0]))

    def test_limit_params(self):
        params = lse_limit_params(self.config, [450, 450])
        self.assertEqual(len(params.sigmas_tilde), 2)
        np.testing.assert_allclose(params.scaled_means[1], lse_scaled_mean(1, X2, [450, 450]), atol=1e-15)
        np.testing.assert_allclose(params.mu, lse_mu(self.config), atol=1e-15)


class TestEmpiricalMoments(unittest.TestCase):
    def test_identical_points(self):
        v = np.array([0.3, 0.4])
        delta, mu, delta_tilde = empirical_moments(np.tile(v, (10, 1)))
        np.testing.assert_allclose(delta, np.outer(v, v), atol=1e-15)
        np.testing.assert_allclose(mu, v, atol=1e-15)
        np.testing.assert_allclose(delta_tilde, np.outer(v, v) / (v @ v), atol=1e-14)

    def test_point_masses(self):
        logger.info("=== 测试点质量的经验矩 ===")
        points = np.vstack([np.tile(X2[0], (30, 1)), np.tile(X2[1], (70, 1))])
        delta, _, _ = empirical_moments(points)
        expected = 0.3 * np.outer(X2[0], X2[0]) + 0.7 * np.outer(X2[1], X2[1])
        np.testing.assert_allclose(delta, expected, atol=1e-14)
        logger.info("✓ Δ̂ = Σ (n_k/n) ν_k ν_k^T")

    def test_invalid_scaling(self):
        with self.assertRaises(InvalidScalingError):
            empirical_moments(np.array([[1.0, 0.0], [-1.0, 0.1]]))


if __name__ == '__main__':
    unittest.main()
