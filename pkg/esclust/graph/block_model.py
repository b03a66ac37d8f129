"""
随机块模型 (SBM)

定义块模型与潜在位置配置，采样 SBM 图，并给出规范潜在位置
x = U_B D_B^{1/2} U_B^T 以及按块标签展开的潜在位置矩阵。

标签在所有公开接口上都是 1..K。
"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from loguru import logger

from ..utils.errors import EsClustError, LabelRangeError, NotPSDError
from ..utils.linalg import check_symmetric, sorted_eigh
from ..utils.rng import SeedLike, make_rng

PI_SUM_TOL = 1e-12
PSD_TOL = 1e-10
RANK_RELATIVE_TOL = 1e-10
ROW_NORM_TOL = 1e-12


def _frozen(array: np.ndarray) -> np.ndarray:
    array = np.array(array, dtype=float, copy=True)
    array.setflags(write=False)
    return array


def check_proportions(pi, K: Optional[int] = None) -> np.ndarray:
    """
    检查混合比例位于单纯形上

    :param pi: 长度为 K 的非负向量
    :param K: 期望长度，可选
    :return: float64 向量
    """
    pi = np.asarray(pi, dtype=float).ravel()
    if K is not None and pi.shape[0] != K:
        raise EsClustError(f"pi 长度 {pi.shape[0]} 与块数 K={K} 不一致")
    if (pi < 0).any():
        raise EsClustError(f"pi 含有负元素: {pi}")
    if abs(pi.sum() - 1.0) > PI_SUM_TOL:
        raise EsClustError(f"pi 之和不为 1: {pi.sum():.15f}")
    return pi


def check_labels(tau, K: int) -> np.ndarray:
    """
    检查块标签取值于 1..K

    :param tau: 标签序列
    :param K: 块数
    :return: int64 标签数组
    """
    tau = np.asarray(tau)
    if tau.ndim != 1:
        raise LabelRangeError(f"标签必须是一维数组: shape={tau.shape}")
    if tau.size and (not np.issubdtype(tau.dtype, np.integer)):
        if not np.all(tau == np.round(tau)):
            raise LabelRangeError("标签必须为整数")
    tau = tau.astype(np.int64)
    if tau.size and (tau.min() < 1 or tau.max() > K):
        raise LabelRangeError(f"标签超出范围 1..{K}: [{tau.min()}, {tau.max()}]")
    return tau


def spectral_rank(values: np.ndarray) -> int:
    """按 λ > 1e-10·λ_max 判定的数值秩"""
    lam_max = max(float(values.max()), 0.0)
    if lam_max == 0.0:
        return 0
    return int(np.sum(values > RANK_RELATIVE_TOL * lam_max))


@dataclass(frozen=True)
class BlockModel:
    """SBM 参数：块概率矩阵 B 与块比例 pi"""
    B: np.ndarray
    pi: np.ndarray
    K: int = field(init=False)
    d: int = field(init=False)

    def __post_init__(self):
        B = check_symmetric(self.B, "B")
        if not np.all((B > 0.0) & (B < 1.0)):
            raise EsClustError("B 的元素必须严格位于 (0, 1)")
        pi = check_proportions(self.pi, B.shape[0])
        values, _ = sorted_eigh(B)
        if values[-1] < -PSD_TOL:
            raise NotPSDError(f"B 不是半正定矩阵 (最小特征值 {values[-1]:.3e})")
        object.__setattr__(self, "B", _frozen(B))
        object.__setattr__(self, "pi", _frozen(pi))
        object.__setattr__(self, "K", B.shape[0])
        object.__setattr__(self, "d", spectral_rank(values))


@dataclass(frozen=True)
class LatentConfig:
    """
    K 个潜在位置 (x 的行 ν_k) 与混合比例 pi

    strict=False 时跳过点积与行范数检查，用于迭代中可能越界的估计值。
    """
    x: np.ndarray
    pi: np.ndarray
    strict: bool = True

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        if x.ndim == 1:
            x = x.reshape(-1, 1)
        if x.ndim != 2:
            raise EsClustError(f"x 必须是 K×d 矩阵: shape={x.shape}")
        pi = check_proportions(self.pi, x.shape[0])
        if self.strict:
            gram = x @ x.T
            if not np.all((gram > 0.0) & (gram < 1.0)):
                raise EsClustError("潜在位置的点积必须严格位于 (0, 1)")
            if np.any(np.linalg.norm(x, axis=1) > 1.0 + ROW_NORM_TOL):
                raise EsClustError("潜在位置的行范数不能超过 1")
        object.__setattr__(self, "x", _frozen(x))
        object.__setattr__(self, "pi", _frozen(pi))

    @property
    def K(self) -> int:
        return self.x.shape[0]

    @property
    def d(self) -> int:
        return self.x.shape[1]

    @property
    def gram(self) -> np.ndarray:
        """块概率矩阵 x x^T"""
        return self.x @ self.x.T


@dataclass(frozen=True)
class Graph:
    """对称、零对角的 0/1 邻接矩阵，以及可选的真实块标签 tau"""
    adjacency: np.ndarray
    tau: Optional[np.ndarray] = None

    def __post_init__(self):
        A = np.asarray(self.adjacency, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise EsClustError(f"邻接矩阵必须是方阵: shape={A.shape}")
        if not np.array_equal(A, A.T):
            raise EsClustError("邻接矩阵不对称")
        if np.any(np.diag(A) != 0):
            raise EsClustError("邻接矩阵对角线必须为 0")
        if not np.all((A == 0) | (A == 1)):
            raise EsClustError("邻接矩阵必须为 0/1 矩阵")
        object.__setattr__(self, "adjacency", _frozen(A))
        if self.tau is not None:
            tau = np.asarray(self.tau, dtype=np.int64)
            if tau.shape != (A.shape[0],):
                raise LabelRangeError(f"标签长度 {tau.shape} 与节点数 {A.shape[0]} 不一致")
            if tau.size and tau.min() < 1:
                raise LabelRangeError("标签必须从 1 开始")
            tau.setflags(write=False)
            object.__setattr__(self, "tau", tau)

    @property
    def n(self) -> int:
        return self.adjacency.shape[0]

    def degrees(self) -> np.ndarray:
        """节点度 A 1_n"""
        return self.adjacency.sum(axis=1)

    def block_counts(self, K: Optional[int] = None) -> np.ndarray:
        """
        各块节点数 n_k

        :param K: 块数；默认取标签最大值
        :return: 长度为 K 的计数
        """
        if self.tau is None:
            raise EsClustError("图没有块标签")
        K = K or int(self.tau.max())
        return np.bincount(self.tau - 1, minlength=K)[:K]

    def to_edge_list(self, path: str | Path) -> Path:
        """
        导出上三角边表，每行一个 "i j"（从 1 开始编号）

        :param path: 输出文件路径
        :return: 输出文件路径
        """
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        rows, cols = np.nonzero(np.triu(self.adjacency, k=1))
        np.savetxt(path, np.column_stack([rows + 1, cols + 1]), fmt="%d", delimiter=" ")
        logger.success(f"边表已保存: {path}, 共 {rows.size} 条边")
        return path


# ==================== 潜在位置 ====================

def canonical_latent_positions(B) -> np.ndarray:
    """
    规范潜在位置 x = U_B D_B^{1/2} U_B^T

    满秩时返回 B 的对称平方根；秩 d < K 时返回 K×d 的薄因子
    U_B^{(d)} (D_B^{(d)})^{1/2}。两种情况下都有 x x^T = B。

    :param B: K×K 对称半正定矩阵
    :return: 潜在位置矩阵
    """
    B = check_symmetric(B, "B")
    values, vectors = sorted_eigh(B)
    if values[-1] < -PSD_TOL:
        raise NotPSDError(f"B 不是半正定矩阵 (最小特征值 {values[-1]:.3e})")
    K = B.shape[0]
    d = spectral_rank(values)
    if d == 0:
        raise NotPSDError("B 没有正特征值")
    roots = np.sqrt(np.clip(values[:d], 0.0, None))
    if d == K:
        return (vectors * roots) @ vectors.T
    logger.debug(f"B 秩亏 (d={d} < K={K})，返回薄因子")
    return vectors[:, :d] * roots


def expand_latent_positions(x, tau) -> np.ndarray:
    """
    按块标签展开潜在位置：第 i 行等于 ν_{τ_i}

    :param x: K×d 潜在位置
    :param tau: 长度为 n 的标签 (1..K)
    :return: n×d 矩阵 X
    """
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x.reshape(-1, 1)
    tau = check_labels(tau, x.shape[0])
    return x[tau - 1]


def edge_probability_matrix(x, tau) -> np.ndarray:
    """边概率矩阵 P = X X^T"""
    X = expand_latent_positions(x, tau)
    return X @ X.T


def balanced_labels(pi, n: int) -> np.ndarray:
    """
    固定块大小的标签：用最大余数法把 n·π 取整为块计数，按块依次排列

    :param pi: 混合比例
    :param n: 节点数
    :return: 长度为 n 的标签 (1..K)
    """
    pi = check_proportions(pi)
    raw = n * pi
    counts = np.floor(raw).astype(np.int64)
    remainder = int(n - counts.sum())
    order = np.argsort(-(raw - counts), kind="stable")
    counts[order[:remainder]] += 1
    return np.repeat(np.arange(1, pi.shape[0] + 1), counts)


# ==================== 采样 ====================

def sample_sbm(model: BlockModel, n: int, seed: SeedLike,
               fixed_labels: Optional[Sequence[int]] = None) -> Graph:
    """
    采样 (A, τ) ~ SBM(n, B, π)

    τ_i 独立服从 Cate(π)（或使用给定的固定标签），上三角 A_ij 在给定 τ 时
    独立服从 Bern(B_{τ_i τ_j})，对角线为 0。

    :param model: 块模型
    :param n: 节点数，n ≥ K
    :param seed: 随机种子或 Generator
    :param fixed_labels: 可选的固定标签
    :return: Graph
    """
    if n < model.K:
        raise EsClustError(f"节点数 n={n} 小于块数 K={model.K}")
    rng = make_rng(seed)
    if fixed_labels is not None:
        tau = check_labels(fixed_labels, model.K)
        if tau.shape[0] != n:
            raise LabelRangeError(f"固定标签长度 {tau.shape[0]} 与 n={n} 不一致")
    else:
        tau = rng.choice(model.K, size=n, p=model.pi) + 1

    P = model.B[np.ix_(tau - 1, tau - 1)]
    upper = np.triu(rng.random((n, n)) < P, k=1)
    A = (upper | upper.T).astype(float)
    logger.debug(f"采样 SBM 完成: n={n}, K={model.K}, 边数={int(upper.sum())}")
    return Graph(adjacency=A, tau=tau)
