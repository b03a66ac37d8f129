"""
混合模型的参数状态、后验责任矩阵与运行报告
"""

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np

from ..covariance.limit_covariance import lse_scaled_means
from ..graph.block_model import check_proportions
from ..utils.errors import EsClustError

ROW_SUM_TOL = 1e-10
COUNTS_SUM_TOL = 1e-8


@dataclass
class MixtureState:
    """
    一组混合模型参数 (π, ν, Σ, n_k)

    - ES 引擎中 nu 是潜在位置 x 的行，sigmas 由 (x, π) 推导
    - 完全 GMM 的 EM 中 nu 是无约束的分量均值，sigmas 为自由参数
    - counts 只在 ES∘LSE 中使用，此时分量均值为缩放均值
    """
    pi: np.ndarray
    nu: np.ndarray
    sigmas: np.ndarray
    counts: Optional[np.ndarray] = None
    info: Dict[str, Any] = field(default_factory=dict, compare=False)

    def __post_init__(self):
        nu = np.asarray(self.nu, dtype=float)
        if nu.ndim == 1:
            nu = nu.reshape(-1, 1)
        K, d = nu.shape
        sigmas = np.asarray(self.sigmas, dtype=float)
        if sigmas.shape != (K, d, d):
            raise EsClustError(f"sigmas 形状应为 {(K, d, d)}，实际为 {sigmas.shape}")
        self.pi = check_proportions(self.pi, K)
        self.nu = nu
        self.sigmas = sigmas
        if self.counts is not None:
            counts = np.asarray(self.counts, dtype=float).ravel()
            if counts.shape[0] != K or np.any(counts <= 0):
                raise EsClustError(f"块计数必须是 {K} 个正数: {counts}")
            self.counts = counts

    @property
    def K(self) -> int:
        return self.nu.shape[0]

    @property
    def d(self) -> int:
        return self.nu.shape[1]

    def component_means(self) -> np.ndarray:
        """E 步使用的分量均值：有 counts 时为缩放均值，否则为 nu"""
        if self.counts is None:
            return self.nu
        return lse_scaled_means(self.nu, self.counts)

    def check_counts(self, n: int) -> None:
        if self.counts is not None and abs(self.counts.sum() - n) > COUNTS_SUM_TOL * max(n, 1):
            raise EsClustError(f"块计数之和 {self.counts.sum():.10f} 与 n={n} 不一致")

    def permuted(self, order) -> "MixtureState":
        """按给定顺序重排分量"""
        order = np.asarray(order, dtype=int)
        counts = None if self.counts is None else self.counts[order]
        return MixtureState(pi=self.pi[order], nu=self.nu[order], sigmas=self.sigmas[order],
                            counts=counts, info=dict(self.info))


@dataclass
class Responsibilities:
    """
    后验隶属概率矩阵 Z*

    underflow 记录所有分量密度都下溢、被赋予均匀责任的行数；
    log_likelihood 是计算这组责任时所用参数下的混合对数似然。
    """
    z: np.ndarray
    underflow: int = 0
    log_likelihood: float = float("nan")

    def __post_init__(self):
        z = np.asarray(self.z, dtype=float)
        if z.ndim != 2:
            raise EsClustError(f"责任矩阵必须是 n×K: shape={z.shape}")
        if np.any(z < 0) or np.any(np.abs(z.sum(axis=1) - 1.0) > ROW_SUM_TOL):
            raise EsClustError("责任矩阵的每一行必须非负且和为 1")
        self.z = z

    @property
    def n(self) -> int:
        return self.z.shape[0]

    @property
    def K(self) -> int:
        return self.z.shape[1]


@dataclass
class RunReport:
    """一次迭代运行的记录"""
    iterations: int = 0
    converged: bool = False
    final_step_norm: float = float("inf")
    trace: List[float] = field(default_factory=list)
    diagnostics: List[Dict[str, Any]] = field(default_factory=list)
    loglik_trace: List[float] = field(default_factory=list)
    reason: Optional[str] = None

    def flag_totals(self) -> Dict[str, int]:
        """汇总各次迭代中的截断、下溢、PSD 截断与脊正则化事件"""
        totals = {"clamped": 0, "underflow": 0, "floored": 0, "ridge": 0}
        for entry in self.diagnostics:
            for key in totals:
                totals[key] += int(entry.get(key, 0))
        return totals

    @property
    def max_condition(self) -> float:
        values = [entry["condition"] for entry in self.diagnostics if "condition" in entry]
        return max(values) if values else float("nan")
