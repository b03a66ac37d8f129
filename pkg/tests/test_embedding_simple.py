"""
测试谱嵌入：ASE、LSE、一一变换与 Procrustes 对齐
"""

import sys
import os
# 添加项目根目录到Python路径
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

import tempfile
import unittest
from pathlib import Path

import numpy as np
import scipy.stats
from loguru import logger

from esclust.embedding import (
    Embedding,
    EmbeddingKind,
    ase,
    ase_to_lse,
    lse,
    normalized_laplacian,
    principal_angles,
    procrustes_align,
    write_embedding,
)
from esclust.covariance import lse_scaled_mean
from esclust.graph import BlockModel, balanced_labels, edge_probability_matrix, expand_latent_positions, sample_sbm
from esclust.utils.errors import EsClustError, InsufficientSpectrumError, IsolatedVertexError


X2 = np.array([[0.4076, 0.1840], [0.1840, 0.4076]])


def circulant_graph(n: int, offsets) -> np.ndarray:
    """每个节点与 i ± offset 相连的正则图"""
    A = np.zeros((n, n))
    for i in range(n):
        for offset in offsets:
            A[i, (i + offset) % n] = A[(i + offset) % n, i] = 1.0
    return A


def aligned_residual(source, target) -> float:
    """min_W ||source W - target||_F"""
    return float(np.linalg.norm(source @ procrustes_align(source, target) - target))


class TestSpectralEmbedding(unittest.TestCase):
    def setUp(self):
        rng = np.random.default_rng(2024)
        self.X = rng.uniform(0.2, 0.6, size=(30, 1))
        self.graph = sample_sbm(BlockModel([[0.5, 0.4], [0.4, 0.5]], [0.5, 0.5]), 120, seed=11)

    def test_ase_exact_rank_one(self):
        logger.info("=== 测试 ASE 精确恢复 ===")
        A = self.X @ self.X.T
        emb = ase(A, 1)
        self.assertIs(emb.kind, EmbeddingKind.ASE)
        np.testing.assert_allclose(emb.points, self.X, atol=1e-12)
        np.testing.assert_allclose(emb.degrees, A.sum(axis=1))
        logger.info("✓ A = X X^T 时 ASE 恢复正的 X")

    def test_ase_column_norms(self):
        A = self.graph.adjacency
        emb = ase(A, 2)
        values = np.sort(np.linalg.eigvalsh(A))[::-1][:2]
        np.testing.assert_allclose(np.sum(emb.points ** 2, axis=0), values, rtol=1e-10)
        self.assertFalse(emb.points.flags.writeable)
        logger.info(f"✓ 列平方范数等于前两个特征值 {values.round(3).tolist()}")

    def test_ase_insufficient_spectrum(self):
        A = np.array([[0.0, 1.0], [1.0, 0.0]])
        with self.assertRaises(InsufficientSpectrumError):
            ase(A, 2)
        with self.assertRaises(EsClustError):
            ase(A, 3)

    def test_normalized_laplacian_small_graphs(self):
        logger.info("=== 测试小图的归一化拉普拉斯 ===")
        cycle = np.ones((3, 3)) - np.eye(3)
        np.testing.assert_allclose(normalized_laplacian(cycle), cycle / 2, rtol=0, atol=1e-15)

        path = np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]], dtype=float)
        r = 1.0 / np.sqrt(2.0)
        expected = np.array([[0, r, 0], [r, 0, r], [0, r, 0]])
        np.testing.assert_allclose(normalized_laplacian(path), expected, rtol=0, atol=1e-15)

        P = edge_probability_matrix(X2, balanced_labels([0.5, 0.5], 20))
        for c in (0.5, 2.0, 10.0):
            np.testing.assert_allclose(normalized_laplacian(c * P), normalized_laplacian(P), rtol=0, atol=1e-15)
        logger.info("✓ 三角形为 A/2，路径中间项为 1/√2，L(cM) = L(M)")

    def test_normalized_laplacian(self):
        A = self.graph.adjacency
        L = normalized_laplacian(A)
        np.testing.assert_allclose(L, L.T, atol=1e-15)
        np.testing.assert_allclose(normalized_laplacian(3.7 * A), L, atol=1e-14)
        top = np.linalg.eigvalsh(L)[-1]
        self.assertAlmostEqual(top, 1.0, places=10)

        isolated = A.copy()
        isolated[0, :] = isolated[:, 0] = 0.0
        with self.assertRaises(IsolatedVertexError):
            normalized_laplacian(isolated)
        with self.assertRaises(IsolatedVertexError):
            lse(isolated, 2)
        logger.info("✓ L(cA) = L(A)，最大特征值为 1，孤立节点被拒绝")

    def test_lse_of_regular_graph(self):
        logger.info("=== 测试正则图的 LSE ===")
        r = 4
        A = circulant_graph(12, (1, 2))
        np.testing.assert_array_equal(A.sum(axis=1), r)
        # 第二、三个特征值相等，取 d=3 使特征子空间唯一
        ase_points = ase(A, 3).points
        lse_points = lse(A, 3).points
        np.testing.assert_allclose(lse_points @ lse_points.T, ase_points @ ase_points.T / r, atol=1e-12)
        self.assertLess(aligned_residual(lse_points, ase_points / np.sqrt(r)), 1e-10)
        logger.info("✓ 正则图上 LSE = ASE / √r")

    def test_embeddings_of_probability_matrix(self):
        logger.info("=== 测试在 P 上恢复潜在位置与缩放均值 ===")
        tau = balanced_labels([0.5, 0.5], 40)
        counts = np.bincount(tau - 1)
        P = edge_probability_matrix(X2, tau)

        X = expand_latent_positions(X2, tau)
        self.assertLess(aligned_residual(ase(P, 2).points, X), 1e-8)

        scaled = np.array([lse_scaled_mean(k - 1, X2, counts) for k in tau])
        self.assertLess(aligned_residual(lse(P, 2).points, scaled), 1e-8)
        logger.info("✓ ase(P) 恢复 X，lse(L(P)) 恢复缩放均值（相差正交变换）")

    def test_ase_to_lse_spans_lse(self):
        P = edge_probability_matrix(X2, balanced_labels([0.5, 0.5], 40))
        for A, d in ((P, 2), (circulant_graph(12, (1, 2)), 3)):
            converted = ase_to_lse(ase(A, d), A.sum(axis=1))
            angles = principal_angles(converted.points, lse(A, d).points)
            self.assertLess(float(np.max(angles)), 1e-6)

    def test_lse_row_norms(self):
        emb = lse(self.graph.adjacency, 2)
        self.assertIs(emb.kind, EmbeddingKind.LSE)
        self.assertTrue(np.all(np.linalg.norm(emb.points, axis=1) <= 1.0 + 1e-8))

    def test_ase_to_lse(self):
        logger.info("=== 测试 ASE 到 LSE 的一一变换 ===")
        A = self.graph.adjacency
        emb = ase(A, 2)
        converted = ase_to_lse(emb, self.graph.degrees())
        np.testing.assert_allclose(converted.points, emb.points / np.sqrt(self.graph.degrees())[:, None])
        self.assertIs(converted.kind, EmbeddingKind.LSE)
        with self.assertRaises(EsClustError):
            ase_to_lse(converted, self.graph.degrees())
        with self.assertRaises(IsolatedVertexError):
            ase_to_lse(emb, np.zeros(emb.n))
        logger.info("✓ X̌ = diag(deg)^{-1/2} X̂")

    def test_ase_to_lse_constant_degrees(self):
        emb = ase(self.X @ self.X.T, 1)
        np.testing.assert_array_equal(ase_to_lse(emb, np.ones(emb.n)).points, emb.points)
        np.testing.assert_array_equal(ase_to_lse(emb, np.full(emb.n, 4.0)).points, emb.points / 2)

    def test_lse_points_need_degrees(self):
        with self.assertRaises(IsolatedVertexError):
            Embedding(points=np.ones((3, 1)) * 0.1, kind=EmbeddingKind.LSE)

    def test_procrustes_recovers_rotation(self):
        logger.info("=== 测试 Procrustes 对齐 ===")
        rng = np.random.default_rng(5)
        source = rng.normal(size=(50, 3))
        W = scipy.stats.ortho_group.rvs(3, random_state=7)
        recovered = procrustes_align(source, source @ W)
        np.testing.assert_allclose(recovered, W, atol=1e-10)
        np.testing.assert_allclose(recovered.T @ recovered, np.eye(3), atol=1e-12)
        with self.assertRaises(EsClustError):
            procrustes_align(source, source[:, :2])
        logger.info("✓ 恢复随机正交矩阵")

    def test_procrustes_special_cases(self):
        rng = np.random.default_rng(6)
        source = rng.normal(size=(50, 3))
        np.testing.assert_allclose(procrustes_align(source, source), np.eye(3), atol=1e-12)

        reflected = source.copy()
        reflected[:, -1] *= -1
        np.testing.assert_allclose(procrustes_align(source, reflected), np.diag([1.0, 1.0, -1.0]), atol=1e-10)

        R = scipy.stats.special_ortho_group.rvs(3, random_state=8)
        W = procrustes_align(source @ R.T, source)
        np.testing.assert_allclose(W, R, atol=1e-10)
        self.assertLess(np.linalg.norm(source @ R.T @ W - source), 1e-10)

    def test_procrustes_is_optimal(self):
        logger.info("=== 测试 Procrustes 最优性 ===")
        rng = np.random.default_rng(10)
        source = rng.normal(size=(40, 3))
        target = source @ scipy.stats.ortho_group.rvs(3, random_state=11) + 0.3 * rng.normal(size=(40, 3))
        W = procrustes_align(source, target)
        np.testing.assert_allclose(W.T @ W, np.eye(3), atol=1e-12)
        best = np.linalg.norm(source @ W - target)
        self.assertLessEqual(best, np.linalg.norm(source - target))
        for Q in scipy.stats.ortho_group.rvs(3, size=200, random_state=12):
            self.assertLessEqual(best, np.linalg.norm(source @ Q - target) + 1e-12)
        logger.info(f"✓ 残差 {best:.4f} 不大于 200 个随机正交矩阵的残差")

    def test_principal_angles(self):
        rng = np.random.default_rng(9)
        A = rng.normal(size=(20, 2))
        mixed = A @ np.array([[2.0, 1.0], [0.5, -1.0]])
        np.testing.assert_allclose(principal_angles(A, mixed), 0.0, atol=1e-10)

    def test_ase_column_space(self):
        A = self.graph.adjacency
        emb = ase(A, 2)
        _, vectors = np.linalg.eigh(A)
        np.testing.assert_allclose(principal_angles(emb.points, vectors[:, -2:]), 0.0, atol=1e-8)

    def test_write_embedding(self):
        emb = ase(self.X @ self.X.T, 1)
        with tempfile.TemporaryDirectory() as tmp:
            path = write_embedding(emb, Path(tmp) / "ase.csv")
            loaded = np.loadtxt(path, delimiter=",").reshape(-1, 1)
        np.testing.assert_array_equal(loaded, emb.points)


if __name__ == '__main__':
    unittest.main()
