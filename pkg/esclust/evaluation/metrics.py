"""
聚类与参数估计的评价指标

- adjusted_rand_index: Hubert-Arabie 调整兰德指数
- parameter_squared_error: 与真实参数向量 Ψ_ASE / Ψ_LSE 的平方误差
- median_ci: 基于次序统计量的中位数无分布置信区间
- paired_difference_table: 按样本量汇总两种方法的逐重复差值
"""

import itertools
import math
from dataclasses import dataclass, field
from typing import Dict, List, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy.stats import binom
from sklearn.metrics import adjusted_rand_score

from ..embedding.spectral_embedding import EmbeddingKind
from ..mixture.state import MixtureState
from ..utils.errors import EsClustError, NothingToCompareError

MIN_CI_VALUES = 6
TABLE_COLUMNS = ["n", "median", "ci_lo", "ci_hi", "method_a", "method_b"]


@dataclass
class PairedResult:
    """一次重复实验中所有方法的得分；同一重复内各方法使用相同数据"""
    replication: int
    n: int
    seed: int
    ari_by_method: Dict[str, float] = field(default_factory=dict)
    param_err_by_method: Dict[str, float] = field(default_factory=dict)
    converged_by_method: Dict[str, bool] = field(default_factory=dict)
    iterations_by_method: Dict[str, int] = field(default_factory=dict)
    input_digest_by_method: Dict[str, str] = field(default_factory=dict)
    resamples: int = 0
    flags: List[str] = field(default_factory=list)

    def metric(self, name: str) -> Dict[str, float]:
        if name == "ari":
            return self.ari_by_method
        if name == "param_err":
            return self.param_err_by_method
        raise EsClustError(f"未知的指标: {name}")


def adjusted_rand_index(a, b) -> float:
    """
    调整兰德指数 (ΣC(n_ij,2) - E) / (max - E)，
    E = ΣC(a_i,2)·ΣC(b_j,2) / C(n,2)，max = (ΣC(a_i,2) + ΣC(b_j,2)) / 2

    由 sklearn 的 adjusted_rand_score 计算；两个划分都平凡（分母为 0）时返回 1.0。

    :param a: 长度为 n 的标签
    :param b: 长度为 n 的标签
    :return: ARI
    """
    a = np.asarray(a).ravel()
    b = np.asarray(b).ravel()
    if a.shape[0] != b.shape[0]:
        raise EsClustError(f"两组标签长度不一致: {a.shape[0]} vs {b.shape[0]}")
    n = a.shape[0]
    if n < 2:
        raise EsClustError(f"ARI 至少需要 2 个点: n={n}")
    return float(adjusted_rand_score(a, b))


def _stacked(state: MixtureState, flavor: EmbeddingKind, order=None) -> np.ndarray:
    if order is not None:
        state = state.permuted(order)
    means = state.nu if flavor is EmbeddingKind.ASE else state.component_means()
    return np.concatenate([state.pi, means.ravel(), state.sigmas.ravel()])


def best_permutation(est_means: np.ndarray, truth_means: np.ndarray) -> Tuple[int, ...]:
    """
    使 Σ_k ‖est[p_k] - truth_k‖² 最小的分量排列（穷举 K!）

    :return: 排列 p，est 的第 p_k 个分量对应真实的第 k 个分量
    """
    K = truth_means.shape[0]
    best, best_cost = tuple(range(K)), math.inf
    for order in itertools.permutations(range(K)):
        cost = float(np.sum((est_means[list(order)] - truth_means) ** 2))
        if cost < best_cost:
            best, best_cost = order, cost
    return best


def parameter_squared_error(est: MixtureState, truth: MixtureState,
                            flavor: Union[str, EmbeddingKind]) -> float:
    """
    堆叠参数向量 (π, 均值, 全部协方差元素) 的平方欧氏距离

    ASE 的均值为 x 的行，LSE 的均值为缩放均值 (由 counts 推得；EM 状态中即 nu)。
    比较前按均值距离最小的排列对齐分量。

    :param est: 估计状态
    :param truth: 真实状态（协方差已按 1/n 或 1/n² 缩放）
    :param flavor: ASE 或 LSE
    :return: 平方误差
    """
    flavor = EmbeddingKind(flavor)
    if est.K != truth.K or est.d != truth.d:
        raise EsClustError(f"参数维数不一致: (K={est.K}, d={est.d}) vs (K={truth.K}, d={truth.d})")
    truth_vec = _stacked(truth, flavor)
    est_means = est.nu if flavor is EmbeddingKind.ASE else est.component_means()
    truth_means = truth.nu if flavor is EmbeddingKind.ASE else truth.component_means()
    order = best_permutation(est_means, truth_means)
    return float(np.sum((_stacked(est, flavor, order) - truth_vec) ** 2))


def median_ci(values: Sequence[float], level: float = 0.95) -> Tuple[float, float]:
    """
    中位数的次序统计量置信区间

    取最大的 l 使 P(Binom(n, ½) ≤ l - 1) ≤ (1 - level)/2，区间为 (X_(l), X_(n-l+1))。

    :param values: 至少 6 个数
    :param level: 置信水平
    :return: (下界, 上界)
    """
    x = np.sort(np.asarray(values, dtype=float).ravel())
    n = x.shape[0]
    if n < MIN_CI_VALUES:
        raise EsClustError(f"中位数置信区间至少需要 {MIN_CI_VALUES} 个值: n={n}")
    if not 0 < level < 1:
        raise EsClustError(f"置信水平必须位于 (0, 1): {level}")
    tail = 0.5 * (1.0 - level)
    j = np.arange(1, n // 2 + 1)
    ok = j[binom.cdf(j - 1, n, 0.5) <= tail]
    if ok.size == 0:
        raise EsClustError(f"n={n} 个值不足以构造 {level:.0%} 置信区间")
    l = int(ok.max())
    return float(x[l - 1]), float(x[n - l])


def paired_differences(results: Sequence[PairedResult], method_a: str, method_b: str,
                       metric: str = "ari") -> pd.DataFrame:
    """逐重复差值 a - b，只保留两种方法都有有限得分的重复"""
    rows = []
    for r in results:
        scores = r.metric(metric)
        if method_a in scores and method_b in scores:
            rows.append({"n": r.n, "replication": r.replication,
                         "delta": scores[method_a] - scores[method_b]})
    frame = pd.DataFrame(rows, columns=["n", "replication", "delta"])
    return frame[np.isfinite(frame["delta"].astype(float))]


def paired_difference_table(results: Sequence[PairedResult], method_a: str, method_b: str,
                            metric: str = "ari", level: float = 0.95) -> pd.DataFrame:
    """
    每个样本量一行：(n, Δ 的中位数, CI 下界, CI 上界, method_a, method_b)

    Δ 在汇总前逐重复计算；有限差值少于 6 个时 CI 为 NaN。

    :param results: 重复实验结果
    :param method_a: 方法 a
    :param method_b: 方法 b
    :param metric: "ari" 或 "param_err"
    :param level: 置信水平
    :return: DataFrame
    """
    if not any(method_a in r.metric(metric) and method_b in r.metric(metric) for r in results):
        raise NothingToCompareError(f"没有同时包含 {method_a} 与 {method_b} 的结果")
    deltas = paired_differences(results, method_a, method_b, metric)
    rows = []
    for n in sorted({r.n for r in results}):
        values = deltas.loc[deltas["n"] == n, "delta"].to_numpy(dtype=float)
        median = float(np.median(values)) if values.size else math.nan
        lo = hi = math.nan
        if values.size >= MIN_CI_VALUES:
            lo, hi = median_ci(values, level)
        rows.append({"n": int(n), "median": median, "ci_lo": lo, "ci_hi": hi,
                     "method_a": method_a, "method_b": method_b})
    return pd.DataFrame(rows, columns=TABLE_COLUMNS)
