"""
K-means 基线 (Lloyd 迭代)

给定初始中心时结果完全确定；分配时距离相同取下标最小的中心。
"""

from dataclasses import dataclass, field
from typing import List

import numpy as np
from loguru import logger
from scipy.spatial.distance import cdist

from ..utils.errors import EsClustError

DEFAULT_KMEANS_MAX_ITER = 300


@dataclass
class KMeansResult:
    labels: np.ndarray
    centers: np.ndarray
    iterations: int
    converged: bool
    empty_clusters: List[int] = field(default_factory=list)


def _reseed_empty(points: np.ndarray, centers: np.ndarray, labels: np.ndarray,
                  d2: np.ndarray, empty: List[int]) -> None:
    """把空簇的中心移到离其所属中心最远的点上；所有点都与中心重合时保持不动并记下"""
    K = centers.shape[0]
    for k in range(K):
        if np.any(labels == k):
            continue
        assigned = d2[np.arange(points.shape[0]), labels]
        far = int(np.argmax(assigned))
        if assigned[far] <= 0.0:
            if k + 1 not in empty:
                empty.append(k + 1)
            continue
        logger.warning(f"K-means 第 {k + 1} 簇为空，重新以最远点 {far} 作为中心")
        if k + 1 not in empty:
            empty.append(k + 1)
        centers[k] = points[far]
        labels[far] = k
        d2[:, k] = np.sum((points - centers[k]) ** 2, axis=1)


def kmeans(points, K: int, init_centers, max_iter: int = DEFAULT_KMEANS_MAX_ITER) -> KMeansResult:
    """
    Lloyd 迭代直到分配不再变化或达到 max_iter

    :param points: n×d 数据
    :param K: 簇数
    :param init_centers: K×d 初始中心
    :param max_iter: 最大迭代次数
    :return: KMeansResult，labels 取值 1..K
    """
    X = np.asarray(points, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    centers = np.array(init_centers, dtype=float, copy=True).reshape(K, X.shape[1])
    if K > X.shape[0]:
        raise EsClustError(f"簇数 K={K} 不能超过点数 n={X.shape[0]}")

    labels = None
    empty: List[int] = []
    converged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        d2 = cdist(X, centers, metric="sqeuclidean")
        new_labels = np.argmin(d2, axis=1)
        _reseed_empty(X, centers, new_labels, d2, empty)
        if labels is not None and np.array_equal(new_labels, labels):
            converged = True
            break
        labels = new_labels
        for k in range(K):
            members = labels == k
            if members.any():
                centers[k] = X[members].mean(axis=0)

    if empty:
        logger.warning(f"K-means 出现空簇: {empty}")
    return KMeansResult(labels=labels + 1, centers=centers, iterations=iterations,
                        converged=converged, empty_clusters=sorted(empty))
