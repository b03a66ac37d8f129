"""
谱嵌入

- ase: 邻接谱嵌入 X̂ = U_A^{(d)} (D_A^{(d)})^{1/2}
- lse: 拉普拉斯谱嵌入，对归一化拉普拉斯 L(A) 做同样的构造
- ase_to_lse: X̌ = diag(A 1_n)^{-1/2} X̂
- procrustes_align: min_W ||X̂ W - X||_F, W^T W = I
"""

from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Optional

import numpy as np
import scipy.linalg
from loguru import logger

from ..utils.errors import EsClustError, InsufficientSpectrumError, IsolatedVertexError
from ..utils.linalg import check_symmetric, sorted_eigh

LSE_ROW_NORM_TOL = 1e-8
PROCRUSTES_RANK_TOL = 1e-12


class EmbeddingKind(str, Enum):
    ASE = "ASE"
    LSE = "LSE"


@dataclass(frozen=True)
class Embedding:
    """n×d 点云，标记为 ASE 或 LSE，并保留 A 的行和（度）"""
    points: np.ndarray
    kind: EmbeddingKind
    degrees: Optional[np.ndarray] = None

    def __post_init__(self):
        points = np.array(self.points, dtype=float, copy=True)
        if points.ndim == 1:
            points = points.reshape(-1, 1)
        if points.ndim != 2:
            raise EsClustError(f"嵌入点必须是 n×d 矩阵: shape={points.shape}")
        kind = EmbeddingKind(self.kind)
        degrees = self.degrees
        if degrees is not None:
            degrees = np.array(degrees, dtype=float, copy=True).ravel()
            if degrees.shape[0] != points.shape[0]:
                raise EsClustError(f"度向量长度 {degrees.shape[0]} 与点数 {points.shape[0]} 不一致")
            degrees.setflags(write=False)
        if kind is EmbeddingKind.LSE:
            if degrees is None or np.any(degrees <= 0):
                raise IsolatedVertexError("LSE 嵌入要求所有度严格为正")
            norms = np.linalg.norm(points, axis=1)
            if np.any(norms > 1.0 + LSE_ROW_NORM_TOL):
                raise EsClustError(f"LSE 行范数超过 1: max={norms.max():.6f}")
        points.setflags(write=False)
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "degrees", degrees)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]


def _top_scaled_eigenvectors(M: np.ndarray, d: int, name: str) -> np.ndarray:
    n = M.shape[0]
    if d < 1 or d > n:
        raise EsClustError(f"嵌入维数 d={d} 必须满足 1 ≤ d ≤ n={n}")
    values, vectors = sorted_eigh(M, top=d)
    if np.any(values <= 0):
        raise InsufficientSpectrumError(
            f"{name} 的前 {d} 个特征值不全为正: {np.array2string(values, precision=4)}")
    return vectors * np.sqrt(values)


def ase(A, d: int) -> Embedding:
    """
    邻接谱嵌入

    :param A: n×n 对称矩阵
    :param d: 嵌入维数
    :return: kind=ASE 的 Embedding，第 k 列的平方范数等于 λ_k(A)
    """
    A = check_symmetric(A, "A")
    points = _top_scaled_eigenvectors(A, d, "A")
    return Embedding(points=points, kind=EmbeddingKind.ASE, degrees=A.sum(axis=1))


def normalized_laplacian(M) -> np.ndarray:
    """
    归一化拉普拉斯 L(M) = diag(M 1_n)^{-1/2} M diag(M 1_n)^{-1/2}

    :param M: 对称非负矩阵，行和严格为正
    :return: n×n 对称矩阵
    """
    M = check_symmetric(M, "M")
    if np.any(M < 0):
        raise EsClustError("归一化拉普拉斯要求非负矩阵")
    degrees = M.sum(axis=1)
    isolated = np.flatnonzero(degrees <= 0)
    if isolated.size:
        raise IsolatedVertexError(f"存在 {isolated.size} 个孤立节点 (例如节点 {isolated[0] + 1})")
    scale = 1.0 / np.sqrt(degrees)
    return M * scale[:, None] * scale[None, :]


def lse(A, d: int) -> Embedding:
    """
    拉普拉斯谱嵌入：对 L(A) 取前 d 个特征对

    :param A: n×n 邻接矩阵
    :param d: 嵌入维数
    :return: kind=LSE 的 Embedding，degrees 为 A 的行和
    """
    A = check_symmetric(A, "A")
    L = normalized_laplacian(A)
    points = _top_scaled_eigenvectors(L, d, "L(A)")
    return Embedding(points=points, kind=EmbeddingKind.LSE, degrees=A.sum(axis=1))


def ase_to_lse(ase_embedding: Embedding, degrees) -> Embedding:
    """
    一一变换 X̌ = diag(A 1_n)^{-1/2} X̂

    :param ase_embedding: kind=ASE 的嵌入
    :param degrees: 长度为 n 的正数（A 的行和）
    :return: kind=LSE 的 Embedding
    """
    if ase_embedding.kind is not EmbeddingKind.ASE:
        raise EsClustError(f"ase_to_lse 需要 ASE 嵌入，实际为 {ase_embedding.kind.value}")
    degrees = np.asarray(degrees, dtype=float).ravel()
    if degrees.shape[0] != ase_embedding.n:
        raise EsClustError(f"度向量长度 {degrees.shape[0]} 与点数 {ase_embedding.n} 不一致")
    if np.any(degrees <= 0):
        raise IsolatedVertexError(f"存在 {int(np.sum(degrees <= 0))} 个非正度")
    points = ase_embedding.points / np.sqrt(degrees)[:, None]
    return Embedding(points=points, kind=EmbeddingKind.LSE, degrees=degrees)


def procrustes_align(source, target) -> np.ndarray:
    """
    正交 Procrustes 问题 min_W ||source W - target||_F

    由 source^T target 的奇异分解 U S V^T 得到 W = U V^T。互叉矩阵秩亏时
    零奇异方向沿用奇异分解给出的因子（单位补全），此时解不唯一。

    :param source: n×d
    :param target: n×d
    :return: d×d 正交矩阵
    """
    source = np.asarray(source, dtype=float)
    target = np.asarray(target, dtype=float)
    if source.shape != target.shape:
        raise EsClustError(f"Procrustes 输入形状不一致: {source.shape} vs {target.shape}")
    U, s, Vt = scipy.linalg.svd(source.T @ target)
    if s.size and s[-1] < PROCRUSTES_RANK_TOL:
        logger.debug(f"Procrustes 互叉矩阵秩亏 (最小奇异值 {s[-1]:.3e})，解不唯一")
    return U @ Vt


def principal_angles(A, B) -> np.ndarray:
    """两个列空间之间的主角（弧度）"""
    return scipy.linalg.subspace_angles(np.asarray(A, dtype=float), np.asarray(B, dtype=float))


def write_embedding(embedding: Embedding, path: str | Path, delimiter: str = ",") -> Path:
    """
    导出嵌入点，每行一个点，17 位有效数字

    :param embedding: 嵌入
    :param path: 输出路径
    :param delimiter: 分隔符
    :return: 输出路径
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    np.savetxt(path, embedding.points, fmt="%.17g", delimiter=delimiter)
    logger.success(f"{embedding.kind.value} 嵌入已保存: {path}, shape={embedding.points.shape}")
    return path
