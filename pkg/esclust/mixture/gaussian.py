"""
多元正态对数密度

通过 Cholesky 分解 Σ = L L^T 在对数空间计算：
log φ(x | m, Σ) = -d/2·log(2π) - Σ log diag(L) - ½‖L^{-1}(x - m)‖²
"""

import numpy as np
import scipy.linalg

from ..utils.errors import CovarianceNotPDError

LOG_2PI = np.log(2.0 * np.pi)


def cholesky_factor(cov: np.ndarray) -> np.ndarray:
    """
    下三角 Cholesky 因子

    :param cov: d×d 对称正定矩阵
    :return: L，使 cov = L L^T
    """
    try:
        return scipy.linalg.cholesky(cov, lower=True)
    except (np.linalg.LinAlgError, ValueError) as e:
        raise CovarianceNotPDError(f"协方差矩阵 Cholesky 分解失败: {e}") from e


def _log_density_rows(points: np.ndarray, mean: np.ndarray, L: np.ndarray) -> np.ndarray:
    d = L.shape[0]
    soln = scipy.linalg.solve_triangular(L, (points - mean).T, lower=True)
    half_log_det = np.sum(np.log(np.diag(L)))
    return -0.5 * d * LOG_2PI - half_log_det - 0.5 * np.sum(soln ** 2, axis=0)


def gaussian_log_density(point, mean, cov) -> float:
    """
    单点的正态对数密度 log φ(point | mean, cov)

    :param point: 长度为 d 的向量
    :param mean: 长度为 d 的向量
    :param cov: d×d 对称正定矩阵
    :return: 对数密度
    """
    point = np.atleast_1d(np.asarray(point, dtype=float))
    mean = np.atleast_1d(np.asarray(mean, dtype=float))
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    L = cholesky_factor(cov)
    return float(_log_density_rows(point.reshape(1, -1), mean, L)[0])


def component_log_densities(points: np.ndarray, means: np.ndarray, covs: np.ndarray) -> np.ndarray:
    """
    每个点在每个分量下的对数密度

    :param points: n×d
    :param means: K×d
    :param covs: K×d×d
    :return: n×K 矩阵
    """
    points = np.asarray(points, dtype=float)
    out = np.empty((points.shape[0], means.shape[0]))
    for k in range(means.shape[0]):
        L = cholesky_factor(covs[k])
        out[:, k] = _log_density_rows(points, means[k], L)
    return out
