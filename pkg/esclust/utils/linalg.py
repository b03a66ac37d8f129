"""
稠密对称矩阵的数值工具

- sorted_eigh: 特征值按降序排列、特征向量符号规范化的对称特征分解
- guarded_inverse: 带条件数保护的对称正定矩阵求逆
- psd_floor: 对称化并把特征值截断到 PSD 下界
"""

from typing import Optional, Tuple

import numpy as np
import scipy.linalg

from .errors import CovarianceNotPDError, DegenerateConfigurationError, NotSymmetricError

SYMMETRY_TOL = 1e-10
MAX_CONDITION = 1e12
PSD_RELATIVE_FLOOR = 1e-12


def check_symmetric(M, name: str = "matrix", tol: float = SYMMETRY_TOL) -> np.ndarray:
    """
    检查矩阵为方阵且对称

    :param M: 输入矩阵
    :param name: 用于错误信息的矩阵名称
    :param tol: 允许的逐元素绝对误差
    :return: float64 数组
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise NotSymmetricError(f"{name} 不是方阵: shape={M.shape}")
    if not np.allclose(M, M.T, atol=tol, rtol=0.0):
        raise NotSymmetricError(f"{name} 不对称 (max |M - M^T| = {np.abs(M - M.T).max():.3e})")
    return M


def fix_eigenvector_signs(vectors: np.ndarray) -> np.ndarray:
    """每个特征向量中绝对值最大的分量取正号"""
    if vectors.size == 0:
        return vectors
    rows = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[rows, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return vectors * signs


def sorted_eigh(M: np.ndarray, top: Optional[int] = None) -> Tuple[np.ndarray, np.ndarray]:
    """
    对称特征分解，特征值按代数值降序排列

    使用 LAPACK 的三对角化 + 分治求解器 (scipy.linalg.eigh)。只需要前 top 个
    特征对时通过 subset_by_index 只计算这部分。

    :param M: 对称矩阵
    :param top: 只返回最大的 top 个特征对；None 表示全部
    :return: (降序特征值, 对应的列特征向量)
    """
    n = M.shape[0]
    if top is None or top >= n:
        values, vectors = scipy.linalg.eigh(M)
    else:
        values, vectors = scipy.linalg.eigh(M, subset_by_index=[n - top, n - 1])
    values = values[::-1]
    vectors = fix_eigenvector_signs(vectors[:, ::-1])
    return values, vectors


def guarded_inverse(M: np.ndarray, name: str = "matrix",
                    max_condition: float = MAX_CONDITION) -> Tuple[np.ndarray, float]:
    """
    通过对称特征分解求逆，条件数超过阈值时报错而不做正则化

    :param M: 对称正定矩阵
    :param name: 用于错误信息的矩阵名称
    :param max_condition: 允许的最大条件数
    :return: (逆矩阵, 条件数)
    """
    S = 0.5 * (M + M.T)
    values, vectors = scipy.linalg.eigh(S)
    lam_min, lam_max = values[0], values[-1]
    if lam_max <= 0 or lam_min <= 0:
        raise DegenerateConfigurationError(
            f"{name} 非正定 (特征值范围 [{lam_min:.3e}, {lam_max:.3e}])")
    condition = float(lam_max / lam_min)
    if condition > max_condition:
        raise DegenerateConfigurationError(f"{name} 条件数过大: {condition:.3e}")
    inverse = (vectors / values) @ vectors.T
    return inverse, condition


def psd_floor(S: np.ndarray, relative_floor: float = PSD_RELATIVE_FLOOR) -> Tuple[np.ndarray, bool]:
    """
    对称化 (S + S^T)/2，并把特征值截断到 relative_floor * λ_max

    :param S: 方阵
    :param relative_floor: 相对最大特征值的下界
    :return: (处理后的矩阵, 是否发生截断)
    """
    sym = 0.5 * (S + S.T)
    values, vectors = scipy.linalg.eigh(sym)
    lam_max = values[-1]
    if not np.isfinite(lam_max) or lam_max <= 0:
        raise CovarianceNotPDError(f"协方差矩阵没有正特征值 (λ_max={lam_max:.3e})")
    floor = relative_floor * lam_max
    if values[0] >= floor:
        return sym, False
    clipped = np.maximum(values, floor)
    floored = (vectors * clipped) @ vectors.T
    return 0.5 * (floored + floored.T), True
