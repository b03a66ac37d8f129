"""
混合模型拟合引擎

- FullGmmEngine: 完全协方差 GMM 的 EM
- CurvedGmmEngine: 一般曲线 GMM 的 ES 迭代，方差函数由调用方给出
- EsAseEngine: ASE 上的 ES，E 步使用 Σ(ν_k | x, π)/n
- EsLseEngine: LSE 上做 E 步、ASE 上做 S 步，E 步使用缩放均值与 Σ̃(ν_k | x, π)/n²

所有引擎共用 run_to_convergence：以相邻两次参数向量的欧氏距离作为停止
准则，对数似然只作为诊断记录（ES 迭代中它可能下降）。
"""

import math
from pathlib import Path
from typing import Callable, Dict, Optional, Sequence, Tuple, Union

import numpy as np
from loguru import logger
from scipy.special import logsumexp

from ..covariance.limit_covariance import ase_covariances, empirical_moments, lse_covariances
from ..embedding.spectral_embedding import EmbeddingKind
from ..graph.block_model import LatentConfig
from ..utils.errors import ComponentCollapseError, EsClustError
from ..utils.linalg import psd_floor
from ..utils.rng import SeedLike, make_rng
from .gaussian import cholesky_factor, component_log_densities
from .kmeans import kmeans
from .state import MixtureState, Responsibilities, RunReport

COLLAPSE_TOL = 1e-10
RIDGE_SCALE = 1e-10
DEFAULT_TOL_ASE = 1e-5
DEFAULT_TOL_LSE = 1e-6
DEFAULT_MAX_ITER = 10000

VarianceFunction = Callable[[np.ndarray], np.ndarray]


# ==================== E 步 / S 步 / M 步 ====================

def _weighted_log_densities(points: np.ndarray, state: MixtureState) -> np.ndarray:
    log_dens = component_log_densities(points, state.component_means(), state.sigmas)
    with np.errstate(divide="ignore"):
        return log_dens + np.log(state.pi)[None, :]


def e_step(points, state: MixtureState) -> Responsibilities:
    """
    后验责任 Z*_ik = π_k φ(x_i | μ_k, Σ_k) / Σ_j π_j φ(x_i | μ_j, Σ_j)

    全部在对数空间计算并用 log-sum-exp 归一化。某一行所有分量密度都下溢
    时，该行取均匀责任并计入 underflow。

    :param points: n×d 数据
    :param state: 当前参数
    :return: Responsibilities
    """
    X = _as_points(points)
    weighted = _weighted_log_densities(X, state)
    log_norm = logsumexp(weighted, axis=1)
    bad = ~np.isfinite(log_norm)
    z = np.empty_like(weighted)
    good = ~bad
    z[good] = np.exp(weighted[good] - log_norm[good, None])
    z[bad] = 1.0 / state.K
    underflow = int(bad.sum())
    if underflow:
        logger.warning(f"E 步中有 {underflow} 个点的分量密度全部下溢，取均匀责任")
    z[good] /= z[good].sum(axis=1, keepdims=True)
    return Responsibilities(z=z, underflow=underflow, log_likelihood=float(log_norm[good].sum()))


def mixture_log_likelihood(points, state: MixtureState) -> float:
    """混合对数似然 Σ_i log Σ_k π_k φ(x_i | μ_k, Σ_k)；只作诊断用"""
    return float(logsumexp(_weighted_log_densities(_as_points(points), state), axis=1).sum())


def _weighted_update(points: np.ndarray, resp: Responsibilities) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    z = resp.z
    if z.shape[0] != points.shape[0]:
        raise EsClustError(f"责任矩阵行数 {z.shape[0]} 与点数 {points.shape[0]} 不一致")
    mass = z.sum(axis=0)
    collapsed = np.flatnonzero(mass < COLLAPSE_TOL)
    if collapsed.size:
        raise ComponentCollapseError(f"分量 {(collapsed + 1).tolist()} 的责任之和低于 {COLLAPSE_TOL}")
    pi = mass / mass.sum()
    means = (z.T @ points) / mass[:, None]
    return pi, means, mass


def _floor_all(sigmas: np.ndarray) -> Tuple[np.ndarray, int]:
    out = np.empty_like(sigmas)
    floored = 0
    for k in range(sigmas.shape[0]):
        out[k], hit = psd_floor(sigmas[k])
        floored += int(hit)
    if floored:
        logger.warning(f"{floored} 个协方差矩阵被截断到 PSD 下界")
    return out, floored


def s_step_cgmm(points, resp: Responsibilities,
                variance_functions: Union[VarianceFunction, Sequence[VarianceFunction]]) -> MixtureState:
    """
    曲线 GMM 的 S 步：π̂_k = Σ_i Z*_ik / n，μ̂_k = Σ_i Z*_ik x_i / Σ_i Z*_ik，
    Σ_k 取方差函数在 μ̂_k 处的值

    :param points: n×d 数据
    :param resp: 责任矩阵
    :param variance_functions: 单个方差函数（各分量共用）或每个分量一个
    :return: 新的 MixtureState
    """
    X = _as_points(points)
    pi, means, _ = _weighted_update(X, resp)
    K = means.shape[0]
    if callable(variance_functions):
        variance_functions = [variance_functions] * K
    if len(variance_functions) != K:
        raise EsClustError(f"方差函数个数 {len(variance_functions)} 与 K={K} 不一致")
    raw = np.stack([np.atleast_2d(np.asarray(f(means[k]), dtype=float))
                    for k, f in enumerate(variance_functions)])
    sigmas, floored = _floor_all(raw)
    return MixtureState(pi=pi, nu=means, sigmas=sigmas, info={"floored": floored})


def m_step_full_gmm(points, resp: Responsibilities) -> MixtureState:
    """
    完全 GMM 的 M 步：加权均值与加权协方差
    Σ̂_k = Σ_i Z*_ik (x_i - μ̂_k)(x_i - μ̂_k)^T / Σ_i Z*_ik

    Σ̂_k 不能做 Cholesky 分解时加上 1e-10·tr(Σ̂_k)/d 的脊（迹为 0 时用 1e-10·I）。

    :param points: n×d 数据
    :param resp: 责任矩阵
    :return: 新的 MixtureState
    """
    X = _as_points(points)
    pi, means, mass = _weighted_update(X, resp)
    K, d = means.shape
    sigmas = np.empty((K, d, d))
    ridged = 0
    for k in range(K):
        diff = X - means[k]
        S = (resp.z[:, k, None] * diff).T @ diff / mass[k]
        S = 0.5 * (S + S.T)
        try:
            cholesky_factor(S)
        except EsClustError:
            trace = float(np.trace(S))
            scale = trace / d if trace > 0 else 1.0
            S = S + RIDGE_SCALE * scale * np.eye(d)
            ridged += 1
        sigmas[k] = S
    if ridged:
        logger.warning(f"{ridged} 个分量协方差退化，已加脊正则")
    return MixtureState(pi=pi, nu=means, sigmas=sigmas, info={"ridge": ridged})


# ==================== ES 协方差 ====================

def ase_component_covariances(x: np.ndarray, pi: np.ndarray, n: int,
                              delta: Optional[np.ndarray] = None) -> Tuple[np.ndarray, Dict]:
    """
    ES∘ASE 的 E 步协方差 Σ(ν_k | x, π)/n，经过 PSD 截断

    :param x: K×d 当前潜在位置
    :param pi: 当前混合比例
    :param n: 样本量
    :param delta: 经验矩变体中固定的 Δ̂
    :return: (K×d×d 协方差, 诊断信息)
    """
    config = LatentConfig(x, pi, strict=False)
    raw, diag = ase_covariances(config, delta=delta, clamp=True)
    if diag.clamped:
        logger.warning(f"有 {diag.clamped} 个潜在位置点积越出 (0, 1)，已在方差项中截断")
    sigmas, floored = _floor_all(raw / n)
    return sigmas, {"condition": diag.condition, "clamped": diag.clamped, "floored": floored}


def lse_component_covariances(x: np.ndarray, pi: np.ndarray, n: int,
                              mu: Optional[np.ndarray] = None,
                              delta_tilde: Optional[np.ndarray] = None) -> Tuple[np.ndarray, Dict]:
    """
    ES∘LSE 的 E 步协方差 Σ̃(ν_k | x, π)/n²，对称化并经过 PSD 截断

    :param x: K×d 当前潜在位置
    :param pi: 当前混合比例
    :param n: 样本量
    :param mu: 经验矩变体中固定的 μ̂
    :param delta_tilde: 经验矩变体中固定的 Δ̃̂
    :return: (K×d×d 协方差, 诊断信息)
    """
    config = LatentConfig(x, pi, strict=False)
    raw, diag = lse_covariances(config, mu=mu, delta_tilde=delta_tilde, clamp=True)
    if diag.clamped:
        logger.warning(f"有 {diag.clamped} 个潜在位置点积越出 (0, 1)，已在方差项中截断")
    sigmas, floored = _floor_all(raw / float(n) ** 2)
    return sigmas, {"condition": diag.condition, "clamped": diag.clamped,
                    "floored": floored, "asymmetry": diag.asymmetry}


def es_ase_iteration(ase_points, state: MixtureState,
                     delta: Optional[np.ndarray] = None) -> Tuple[Responsibilities, MixtureState]:
    """
    ES∘ASE 的一次迭代

    E 步使用 state.sigmas（即当前 (x, π) 下的 Σ/n），S 步更新 π 与 ν，
    并用新的 (x̂, π̂) 重新计算下一次 E 步的协方差。

    :param ase_points: n×d ASE 点
    :param state: 当前参数
    :param delta: 经验矩变体中固定的 Δ̂
    :return: (责任矩阵, 新参数)
    """
    X = _as_points(ase_points)
    resp = e_step(X, state)
    pi, x, _ = _weighted_update(X, resp)
    sigmas, info = ase_component_covariances(x, pi, X.shape[0], delta=delta)
    return resp, MixtureState(pi=pi, nu=x, sigmas=sigmas, info=info)


def es_lse_iteration(lse_points, ase_points, state: MixtureState,
                     mu: Optional[np.ndarray] = None,
                     delta_tilde: Optional[np.ndarray] = None) -> Tuple[Responsibilities, MixtureState]:
    """
    ES∘LSE 的一次迭代

    E 步在 LSE 点上进行，均值为 ν_k / sqrt(Σ_l n_l ν_l^T ν_k)；S 步在 ASE 点上
    更新 ν 与 π，块计数更新为 n·π̂。

    :param lse_points: n×d LSE 点
    :param ase_points: n×d ASE 点（与 lse_points 逐行对应）
    :param state: 当前参数，counts 必须为正
    :param mu: 经验矩变体中固定的 μ̂
    :param delta_tilde: 经验矩变体中固定的 Δ̃̂
    :return: (责任矩阵, 新参数)
    """
    L = _as_points(lse_points)
    X = _as_points(ase_points)
    if L.shape != X.shape:
        raise EsClustError(f"LSE 点 {L.shape} 与 ASE 点 {X.shape} 形状不一致")
    if state.counts is None:
        raise EsClustError("ES∘LSE 需要块计数 counts")
    n = X.shape[0]
    resp = e_step(L, state)
    pi, x, _ = _weighted_update(X, resp)
    sigmas, info = lse_component_covariances(x, pi, n, mu=mu, delta_tilde=delta_tilde)
    return resp, MixtureState(pi=pi, nu=x, sigmas=sigmas, counts=n * pi, info=info)


# ==================== 引擎 ====================

class MixtureEngine:
    """引擎基类：持有数据，提供 prepare / iterate / parameter_vector"""

    name = "engine"
    default_tol = DEFAULT_TOL_ASE

    def __init__(self, points):
        self.points = _as_points(points)
        self.n = self.points.shape[0]

    def prepare(self, state: MixtureState) -> MixtureState:
        """迭代开始前整理初始状态"""
        return state

    def iterate(self, state: MixtureState) -> Tuple[Responsibilities, MixtureState]:
        raise NotImplementedError

    def responsibilities(self, state: MixtureState) -> Responsibilities:
        return e_step(self.points, state)

    def parameter_vector(self, state: MixtureState) -> np.ndarray:
        """(π_1..π_{K-1}, 分量均值的全部元素)"""
        return np.concatenate([state.pi[:-1], state.component_means().ravel()])


class FullGmmEngine(MixtureEngine):
    """完全协方差 GMM 的 EM"""

    name = "em"

    def __init__(self, points, flavor: Union[str, EmbeddingKind] = EmbeddingKind.ASE):
        super().__init__(points)
        self.flavor = EmbeddingKind(flavor)
        self.default_tol = DEFAULT_TOL_LSE if self.flavor is EmbeddingKind.LSE else DEFAULT_TOL_ASE

    def iterate(self, state):
        resp = e_step(self.points, state)
        return resp, m_step_full_gmm(self.points, resp)


class CurvedGmmEngine(MixtureEngine):
    """
    一般曲线 GMM 的 ES 迭代

    variance_functions 为单个函数 μ -> Σ(μ)（各分量共用）或每个分量一个函数。
    """

    name = "cgmm"

    def __init__(self, points, variance_functions: Union[VarianceFunction, Sequence[VarianceFunction]]):
        super().__init__(points)
        self.variance_functions = variance_functions

    def prepare(self, state):
        functions = self.variance_functions
        if callable(functions):
            functions = [functions] * state.K
        raw = np.stack([np.atleast_2d(np.asarray(f(state.nu[k]), dtype=float))
                        for k, f in enumerate(functions)])
        sigmas, floored = _floor_all(raw)
        return MixtureState(pi=state.pi, nu=state.nu, sigmas=sigmas, info={"floored": floored})

    def iterate(self, state):
        resp = e_step(self.points, state)
        return resp, s_step_cgmm(self.points, resp, self.variance_functions)


def _check_moments(moments: str) -> str:
    if moments not in ("model", "empirical"):
        raise EsClustError(f"moments 只能是 model 或 empirical: {moments}")
    return moments


class EsAseEngine(MixtureEngine):
    """
    ASE 上的 ES 迭代

    moments="empirical" 时 Δ 在整个运行中固定为 ASE 点的经验矩 Δ̂。
    """

    name = "es_ase"

    def __init__(self, ase_points, moments: str = "model"):
        super().__init__(ase_points)
        self.moments = _check_moments(moments)
        self.delta = None
        if self.moments == "empirical":
            self.delta, _, _ = empirical_moments(self.points)

    def prepare(self, state):
        sigmas, info = ase_component_covariances(state.nu, state.pi, self.n, delta=self.delta)
        return MixtureState(pi=state.pi, nu=state.nu, sigmas=sigmas, info=info)

    def iterate(self, state):
        return es_ase_iteration(self.points, state, delta=self.delta)


class EsLseEngine(MixtureEngine):
    """
    LSE 上做 E 步、ASE 上做 S 步的 ES 迭代

    moments="empirical" 时 μ 与 Δ̃ 在整个运行中固定为 ASE 点的经验矩 μ̂、Δ̃̂。
    """

    name = "es_lse"
    default_tol = DEFAULT_TOL_LSE

    def __init__(self, lse_points, ase_points, moments: str = "model"):
        super().__init__(lse_points)
        self.ase_points = _as_points(ase_points)
        if self.ase_points.shape != self.points.shape:
            raise EsClustError(f"LSE 点 {self.points.shape} 与 ASE 点 {self.ase_points.shape} 形状不一致")
        self.moments = _check_moments(moments)
        self.mu = self.delta_tilde = None
        if self.moments == "empirical":
            _, self.mu, self.delta_tilde = empirical_moments(self.ase_points)

    def prepare(self, state):
        counts = state.counts if state.counts is not None else self.n * state.pi
        sigmas, info = lse_component_covariances(state.nu, state.pi, self.n,
                                                 mu=self.mu, delta_tilde=self.delta_tilde)
        prepared = MixtureState(pi=state.pi, nu=state.nu, sigmas=sigmas, counts=counts, info=info)
        prepared.check_counts(self.n)
        return prepared

    def iterate(self, state):
        return es_lse_iteration(self.points, self.ase_points, state,
                                mu=self.mu, delta_tilde=self.delta_tilde)


# ==================== 驱动与辅助 ====================

def run_to_convergence(engine: MixtureEngine, init: MixtureState, tol: Optional[float] = None,
                       max_iter: int = DEFAULT_MAX_ITER
                       ) -> Tuple[MixtureState, Optional[Responsibilities], RunReport]:
    """
    重复迭代，直到相邻参数向量的欧氏距离小于 tol 或达到 max_iter

    引擎抛出的数值错误会终止运行，此时 converged=False，reason 为错误代码，
    返回最后一个有效状态及其责任矩阵（第一次迭代就失败时责任矩阵为 None）。

    :param engine: 拟合引擎（持有数据）
    :param init: 初始参数
    :param tol: 停止阈值，None 表示使用引擎默认值 (ASE/EM 1e-5，LSE 1e-6)
    :param max_iter: 最大迭代次数
    :return: (最终参数, 最终责任矩阵, 运行报告)
    """
    tol = engine.default_tol if tol is None else float(tol)
    if not tol > 0:
        raise EsClustError(f"收敛阈值必须为正: {tol}")
    if max_iter < 1:
        raise EsClustError(f"max_iter 必须至少为 1: {max_iter}")

    report = RunReport()
    resp = None
    try:
        state = engine.prepare(init)
        previous = engine.parameter_vector(state)
    except EsClustError as e:
        logger.error(f"[{engine.name}] 初始状态无效: {e}")
        report.reason = e.reason
        return init, None, report

    for iteration in range(1, max_iter + 1):
        try:
            step_resp, new_state = engine.iterate(state)
            current = engine.parameter_vector(new_state)
        except EsClustError as e:
            logger.warning(f"[{engine.name}] 第 {iteration} 次迭代失败: {e}")
            report.reason = e.reason
            break
        step = float(np.linalg.norm(current - previous))
        resp = step_resp
        report.iterations = iteration
        report.trace.append(step)
        report.loglik_trace.append(resp.log_likelihood)
        report.diagnostics.append({**new_state.info, "underflow": resp.underflow})
        report.final_step_norm = step
        state, previous = new_state, current
        if step < tol:
            report.converged = True
            break

    if report.reason is None:
        try:
            resp = engine.responsibilities(state)
        except EsClustError as e:
            logger.warning(f"[{engine.name}] 终态 E 步失败，保留上一次的责任矩阵: {e}")

    logger.debug(f"[{engine.name}] 迭代 {report.iterations} 次, 收敛={report.converged}, "
                 f"末步长 {report.final_step_norm:.3e}")
    return state, resp, report


def cluster_assign(resp: Responsibilities) -> np.ndarray:
    """按后验概率最大分配簇标签 (1..K)，并列时取下标最小者"""
    return np.argmax(resp.z, axis=1) + 1


def parameter_count(model_kind: str, K: int, d: int) -> int:
    """
    自由参数个数

    :param model_kind: "cgmm" 或 "full_gmm"
    :param K: 分量数
    :param d: 维数
    :return: cgmm 为 (d+1)K-1，full_gmm 另加 K(d + d(d-1)/2)
    """
    if K < 1 or d < 1:
        raise EsClustError(f"K 与 d 必须至少为 1: K={K}, d={d}")
    base = (d + 1) * K - 1
    if model_kind == "cgmm":
        return base
    if model_kind == "full_gmm":
        return base + K * (d + math.comb(d, 2))
    raise EsClustError(f"未知的模型类型: {model_kind}")


def initial_state(config: LatentConfig, n: int, flavor: Union[str, EmbeddingKind],
                  counts=None, engine: str = "es") -> MixtureState:
    """
    以真实参数构造初始状态

    - ASE: ν = x，Σ_k = Σ(ν_k | x, π)/n
    - LSE + es: ν = x，counts 默认 n·π，Σ_k = Σ̃(ν_k | x, π)/n²
    - LSE + em: EM 的无约束均值直接取缩放均值，Σ_k 同上

    :param config: 真实潜在位置配置
    :param n: 样本量
    :param flavor: ASE 或 LSE
    :param counts: LSE 的块计数
    :param engine: "es" 或 "em"
    :return: MixtureState
    """
    flavor = EmbeddingKind(flavor)
    if engine not in ("es", "em"):
        raise EsClustError(f"engine 只能是 es 或 em: {engine}")
    x, pi = config.x, config.pi
    if flavor is EmbeddingKind.ASE:
        sigmas, info = ase_component_covariances(x, pi, n)
        return MixtureState(pi=pi, nu=x, sigmas=sigmas, info=info)
    counts = n * pi if counts is None else np.asarray(counts, dtype=float)
    sigmas, info = lse_component_covariances(x, pi, n)
    state = MixtureState(pi=pi, nu=x, sigmas=sigmas, counts=counts, info=info)
    if engine == "em":
        return MixtureState(pi=pi, nu=state.component_means(), sigmas=sigmas, info=info)
    return state


def kmeans_initial_state(points, K: int, seed: SeedLike) -> MixtureState:
    """
    K-means 初始化：随机选取 K 个不同的点作为初始中心，用收敛后的硬分配
    做一次完全 GMM 的 M 步得到 (π, ν, Σ)

    ES 引擎的 prepare 会用各自的方差函数替换 Σ，ES∘LSE 还会把 counts 设为 n·π。
    ES 引擎应在 ASE 点上调用本函数。

    :param points: n×d 数据
    :param K: 分量数
    :param seed: 随机种子
    :return: MixtureState
    """
    X = _as_points(points)
    rng = make_rng(seed)
    start = rng.choice(X.shape[0], size=K, replace=False)
    result = kmeans(X, K, X[start])
    z = np.zeros((X.shape[0], K))
    z[np.arange(X.shape[0]), result.labels - 1] = 1.0
    return m_step_full_gmm(X, Responsibilities(z=z))


def write_state(state: MixtureState, path: Union[str, Path], delimiter: str = ",") -> Path:
    """
    以分隔文本保存参数：第一行 π，随后 K 行 ν，再后 K 个 d×d 协方差块依次堆叠

    :param state: 参数状态
    :param path: 输出文件
    :param delimiter: 分隔符
    :return: 输出路径
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        np.savetxt(f, state.pi.reshape(1, -1), fmt="%.17g", delimiter=delimiter)
        np.savetxt(f, state.nu, fmt="%.17g", delimiter=delimiter)
        np.savetxt(f, state.sigmas.reshape(-1, state.d), fmt="%.17g", delimiter=delimiter)
    return path


def _as_points(points) -> np.ndarray:
    X = np.asarray(points, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    return X
