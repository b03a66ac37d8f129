"""
谱嵌入极限分布的曲线高斯参数

K 点混合 F = Σ_k π_k δ(ν_k) 下：
- ASE: Δ = Σ_k π_k ν_k ν_k^T,
  Σ(ν_k | x, π) = Δ^{-1} (Σ_j π_j ν_j ν_j^T (ν_k^T ν_j - ν_k^T ν_j ν_j^T ν_k)) Δ^{-1}
- LSE: μ = Σ_k π_k ν_k, Δ̃ = Σ_k π_k ν_k ν_k^T / (ν_k^T μ), Σ̃(ν_k | x, π) 以及
  缩放均值 ν_k / sqrt(Σ_l n_l ν_l^T ν_k)
- 经验矩替代：Δ̂, μ̂, Δ̃̂

这里只给出极限参数本身；混合模型中使用的 Σ/n 与 Σ̃/n² 的缩放在
esclust.mixture 中完成。Σ̃ 按公式原样计算，不保证对称。
"""

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from ..graph.block_model import LatentConfig
from ..utils.errors import EsClustError, InvalidScalingError
from ..utils.linalg import guarded_inverse

GRAM_CLAMP = (1e-6, 1.0 - 1e-6)


@dataclass(frozen=True)
class AseLimitParams:
    delta: np.ndarray
    sigmas: Tuple[np.ndarray, ...]


@dataclass(frozen=True)
class LseLimitParams:
    mu: np.ndarray
    delta_tilde: np.ndarray
    sigmas_tilde: Tuple[np.ndarray, ...]
    scaled_means: Tuple[np.ndarray, ...]


@dataclass(frozen=True)
class CovarianceDiagnostics:
    """一次协方差函数求值的诊断信息"""
    condition: float
    clamped: int = 0
    asymmetry: float = 0.0


def _check_block(k: int, K: int) -> int:
    if not 0 <= k < K:
        raise EsClustError(f"块下标 k={k} 超出范围 0..{K - 1}")
    return k


def bernoulli_variances(x: np.ndarray, clamp: bool = False) -> Tuple[np.ndarray, int]:
    """
    Bernoulli 方差 p(1 - p)，p = ν_k^T ν_j

    :param x: K×d 潜在位置
    :param clamp: 为 True 时先把 p 截断到 [1e-6, 1 - 1e-6]
    :return: (K×K 方差矩阵, 被截断的 Gram 元素个数)
    """
    P = x @ x.T
    clamped = 0
    if clamp:
        lo, hi = GRAM_CLAMP
        clamped = int(np.sum((P < lo) | (P > hi)))
        P = np.clip(P, lo, hi)
    return P * (1.0 - P), clamped


def asymmetry(S: np.ndarray) -> float:
    """相对非对称度 ||S - S^T||_F / ||S||_F"""
    norm = np.linalg.norm(S)
    if norm == 0:
        return 0.0
    return float(np.linalg.norm(S - S.T) / norm)


# ==================== ASE ====================

def _ase_delta(x: np.ndarray, pi: np.ndarray) -> np.ndarray:
    return (x * pi[:, None]).T @ x


def ase_delta(config: LatentConfig) -> np.ndarray:
    """
    Δ = Σ_k π_k ν_k ν_k^T

    :param config: 潜在位置配置
    :return: d×d 对称矩阵；条件数超过 1e12 时报 degenerate latent configuration
    """
    delta = _ase_delta(config.x, config.pi)
    guarded_inverse(delta, "Δ")
    return delta


def ase_covariances(config: LatentConfig, delta: Optional[np.ndarray] = None,
                    clamp: bool = False) -> Tuple[np.ndarray, CovarianceDiagnostics]:
    """
    一次性计算全部 K 个 Σ(ν_k | x, π)

    :param config: 潜在位置配置
    :param delta: 可选的 Δ 替代值（经验矩变体）
    :param clamp: 是否截断 Bernoulli 方差项中的点积
    :return: (K×d×d 协方差, 诊断信息)
    """
    x, pi = config.x, config.pi
    if delta is None:
        delta = _ase_delta(x, pi)
    delta_inv, condition = guarded_inverse(delta, "Δ")
    V, clamped = bernoulli_variances(x, clamp)
    # inner[k] = Σ_j π_j V_kj ν_j ν_j^T
    inner = np.einsum("j,kj,ja,jb->kab", pi, V, x, x)
    sigmas = delta_inv[None, :, :] @ inner @ delta_inv[None, :, :]
    return sigmas, CovarianceDiagnostics(condition=condition, clamped=clamped)


def ase_covariance(k: int, config: LatentConfig, delta: Optional[np.ndarray] = None,
                   clamp: bool = False) -> np.ndarray:
    """
    Σ(ν_k | x, π)

    :param k: 块下标（从 0 开始）
    :param config: 潜在位置配置
    :param delta: 可选的 Δ 替代值
    :param clamp: 是否截断 Bernoulli 方差项中的点积
    :return: d×d 对称半正定矩阵
    """
    k = _check_block(k, config.K)
    x, pi = config.x, config.pi
    if delta is None:
        delta = _ase_delta(x, pi)
    delta_inv, _ = guarded_inverse(delta, "Δ")
    V, _ = bernoulli_variances(x, clamp)
    inner = (x * (pi * V[k])[:, None]).T @ x
    return delta_inv @ inner @ delta_inv


# ==================== LSE ====================

def lse_mu(config: LatentConfig) -> np.ndarray:
    """μ = Σ_k π_k ν_k"""
    return config.pi @ config.x


def _projections(x: np.ndarray, mu: np.ndarray) -> np.ndarray:
    s = x @ mu
    if np.any(s <= 0):
        raise InvalidScalingError(f"ν_k^T μ 必须为正: {np.array2string(s, precision=4)}",
                                  reason="nonpositive nu^T mu")
    return s


def lse_delta_tilde(config: LatentConfig, mu: Optional[np.ndarray] = None) -> np.ndarray:
    """
    Δ̃ = Σ_k π_k ν_k ν_k^T / (ν_k^T μ)

    :param config: 潜在位置配置
    :param mu: 可选的 μ 替代值
    :return: d×d 对称矩阵
    """
    x, pi = config.x, config.pi
    if mu is None:
        mu = lse_mu(config)
    s = _projections(x, mu)
    return (x * (pi / s)[:, None]).T @ x


def _lse_covariance(k: int, x: np.ndarray, pi: np.ndarray, s: np.ndarray,
                    delta_tilde_inv: np.ndarray, V: np.ndarray) -> np.ndarray:
    nu_k = x[k]
    scaled = (x @ delta_tilde_inv) / s[:, None]
    left = scaled - nu_k / (2.0 * s[k])
    right = scaled - nu_k / s[k]
    weights = pi * V[k] / s[k]
    return (left * weights[:, None]).T @ right


def lse_covariances(config: LatentConfig, mu: Optional[np.ndarray] = None,
                    delta_tilde: Optional[np.ndarray] = None,
                    clamp: bool = False) -> Tuple[np.ndarray, CovarianceDiagnostics]:
    """
    一次性计算全部 K 个 Σ̃(ν_k | x, π)（未对称化）

    :param config: 潜在位置配置
    :param mu: 可选的 μ 替代值（经验矩变体）
    :param delta_tilde: 可选的 Δ̃ 替代值
    :param clamp: 是否截断 Bernoulli 方差项中的点积
    :return: (K×d×d 协方差, 诊断信息；asymmetry 为各块的最大非对称度)
    """
    x, pi = config.x, config.pi
    if mu is None:
        mu = lse_mu(config)
    s = _projections(x, mu)
    if delta_tilde is None:
        delta_tilde = (x * (pi / s)[:, None]).T @ x
    delta_tilde_inv, condition = guarded_inverse(delta_tilde, "Δ̃")
    V, clamped = bernoulli_variances(x, clamp)
    sigmas = np.stack([_lse_covariance(k, x, pi, s, delta_tilde_inv, V) for k in range(config.K)])
    worst = max(asymmetry(S) for S in sigmas)
    return sigmas, CovarianceDiagnostics(condition=condition, clamped=clamped, asymmetry=worst)


def lse_covariance(k: int, config: LatentConfig, mu: Optional[np.ndarray] = None,
                   delta_tilde: Optional[np.ndarray] = None, clamp: bool = False) -> np.ndarray:
    """
    Σ̃(ν_k | x, π)，按公式原样计算（左因子带 1/2，右因子不带）

    :param k: 块下标（从 0 开始）
    :param config: 潜在位置配置
    :param mu: 可选的 μ 替代值
    :param delta_tilde: 可选的 Δ̃ 替代值
    :param clamp: 是否截断 Bernoulli 方差项中的点积
    :return: d×d 矩阵
    """
    k = _check_block(k, config.K)
    x, pi = config.x, config.pi
    if mu is None:
        mu = lse_mu(config)
    s = _projections(x, mu)
    if delta_tilde is None:
        delta_tilde = (x * (pi / s)[:, None]).T @ x
    delta_tilde_inv, _ = guarded_inverse(delta_tilde, "Δ̃")
    V, _ = bernoulli_variances(x, clamp)
    return _lse_covariance(k, x, pi, s, delta_tilde_inv, V)


def lse_scaled_means(x: np.ndarray, counts) -> np.ndarray:
    """
    全部缩放均值 ν_k / sqrt(Σ_l n_l ν_k^T ν_l)

    :param x: K×d 潜在位置
    :param counts: 长度为 K 的块计数
    :return: K×d
    """
    x = np.asarray(x, dtype=float)
    counts = np.asarray(counts, dtype=float).ravel()
    if counts.shape[0] != x.shape[0]:
        raise EsClustError(f"块计数长度 {counts.shape[0]} 与 K={x.shape[0]} 不一致")
    denominators = (x @ x.T) @ counts
    if np.any(denominators <= 0):
        raise InvalidScalingError("Σ_l n_l ν_k^T ν_l 必须为正", reason="nonpositive nu^T mu")
    return x / np.sqrt(denominators)[:, None]


def lse_scaled_mean(k: int, x: np.ndarray, counts) -> np.ndarray:
    """第 k 个缩放均值 ν_k / sqrt(Σ_l n_l ν_k^T ν_l)"""
    x = np.asarray(x, dtype=float)
    k = _check_block(k, x.shape[0])
    return lse_scaled_means(x, counts)[k]


# ==================== 汇总与经验矩 ====================

def ase_limit_params(config: LatentConfig) -> AseLimitParams:
    """Δ 与全部 Σ(ν_k | x, π)"""
    delta = ase_delta(config)
    sigmas, _ = ase_covariances(config, delta=delta)
    return AseLimitParams(delta=delta, sigmas=tuple(sigmas))


def lse_limit_params(config: LatentConfig, counts) -> LseLimitParams:
    """μ、Δ̃、全部 Σ̃(ν_k | x, π) 以及缩放均值"""
    mu = lse_mu(config)
    delta_tilde = lse_delta_tilde(config, mu)
    sigmas, _ = lse_covariances(config, mu=mu, delta_tilde=delta_tilde)
    means = lse_scaled_means(config.x, counts)
    return LseLimitParams(mu=mu, delta_tilde=delta_tilde,
                          sigmas_tilde=tuple(sigmas), scaled_means=tuple(means))


def empirical_moments(ase_points) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    经验矩 Δ̂ = Σ_i X̂_i X̂_i^T / n, μ̂ = Σ_i X̂_i / n,
    Δ̃̂ = Σ_i X̂_i X̂_i^T / (X̂_i^T μ̂) / n

    :param ase_points: n×d ASE 点
    :return: (Δ̂, μ̂, Δ̃̂)
    """
    X = np.asarray(ase_points, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    n, d = X.shape
    if n < d:
        raise EsClustError(f"经验矩需要 n ≥ d (n={n}, d={d})")
    delta_hat = X.T @ X / n
    mu_hat = X.mean(axis=0)
    s = X @ mu_hat
    if np.any(s <= 0):
        raise InvalidScalingError(f"有 {int(np.sum(s <= 0))} 个点满足 X̂_i^T μ̂ ≤ 0")
    delta_tilde_hat = (X / s[:, None]).T @ X / n
    return delta_hat, mu_hat, 0.5 * (delta_tilde_hat + delta_tilde_hat.T)
