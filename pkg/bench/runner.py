"""
Replication runner.

Every (n, replication) pair is an independent task whose random stream is
derived from (seed, n, replication, attempt), so results do not depend on
the number of worker processes or on scheduling order.
"""

import hashlib
import math
import multiprocessing
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np
from loguru import logger

from esclust.covariance import ase_covariances, lse_scaled_means
from esclust.embedding import Embedding, EmbeddingKind, ase, ase_to_lse, procrustes_align
from esclust.evaluation import PairedResult, adjusted_rand_index, parameter_squared_error
from esclust.graph import LatentConfig, balanced_labels, expand_latent_positions, sample_sbm
from esclust.mixture import (
    EsAseEngine,
    EsLseEngine,
    FullGmmEngine,
    cluster_assign,
    initial_state,
    kmeans,
    run_to_convergence,
)
from esclust.mixture.gaussian import cholesky_factor
from esclust.utils.errors import EsClustError, InvalidScalingError
from esclust.utils.linalg import psd_floor
from esclust.utils.rng import derive_seed, make_rng

from .config_loader import ExperimentConfig


@dataclass
class ReplicationData:
    """Everything the methods of one replication share"""
    ase: Embedding
    lse: Embedding
    tau: np.ndarray
    counts: np.ndarray
    seed: int
    resamples: int = 0


def digest(*arrays: np.ndarray) -> str:
    """SHA-256 prefix over every matrix a method consumes, in order"""
    h = hashlib.sha256()
    for array in arrays:
        h.update(np.ascontiguousarray(array, dtype=np.float64).tobytes())
    return h.hexdigest()[:16]


# ==================== Sampling ====================

def sample_mixture_replication(truth: LatentConfig, n: int, rng: np.random.Generator
                               ) -> Tuple[Embedding, Embedding, np.ndarray]:
    """
    Draw X̂ from Σ_k π_k N(ν_k, Σ(ν_k | x, π)/n) with i.i.d. component labels,
    then X̌ = diag(A 1)^{-1/2} X̂ with A = X̂ X̂^T (self-loops included).
    """
    tau = rng.choice(truth.K, size=n, p=truth.pi) + 1
    raw, _ = ase_covariances(truth)
    X = np.empty((n, truth.d))
    for k in range(truth.K):
        members = np.flatnonzero(tau == k + 1)
        cov, _ = psd_floor(raw[k] / n)
        L = cholesky_factor(cov)
        X[members] = truth.x[k] + rng.standard_normal((members.size, truth.d)) @ L.T
    degrees = X @ X.sum(axis=0)
    if np.any(degrees <= 0):
        raise InvalidScalingError(f"{int(np.sum(degrees <= 0))} nonpositive mixture-only degrees",
                                  reason="nonpositive degree")
    ase_embedding = Embedding(points=X, kind=EmbeddingKind.ASE, degrees=degrees)
    return ase_embedding, ase_to_lse(ase_embedding, degrees), tau


def sample_sbm_replication(config: ExperimentConfig, truth: LatentConfig, n: int,
                           rng: np.random.Generator) -> Tuple[Embedding, Embedding, np.ndarray]:
    """Sample a graph, embed it, rotate the ASE onto the true positions, derive the LSE"""
    model = config.block_model()
    fixed = balanced_labels(model.pi, n) if config.label_mode() == "fixed" else None
    graph = sample_sbm(model, n, rng, fixed_labels=fixed)
    embedding = ase(graph.adjacency, truth.d)
    target = expand_latent_positions(truth.x, graph.tau)
    W = procrustes_align(embedding.points, target)
    aligned = Embedding(points=embedding.points @ W, kind=EmbeddingKind.ASE, degrees=graph.degrees())
    return aligned, ase_to_lse(aligned, graph.degrees()), np.asarray(graph.tau)


def simulate_replication(config: ExperimentConfig, truth: LatentConfig, n: int,
                         replication: int) -> ReplicationData:
    """
    Sample one replication, resampling with the next derived stream when the
    draw cannot be embedded.
    """
    last_error: Optional[EsClustError] = None
    for attempt in range(config.max_resamples + 1):
        seed = derive_seed(config.seed, n, replication, attempt)
        rng = make_rng(seed)
        try:
            if config.family == "mixture_only":
                ase_emb, lse_emb, tau = sample_mixture_replication(truth, n, rng)
            else:
                ase_emb, lse_emb, tau = sample_sbm_replication(config, truth, n, rng)
            counts = np.bincount(tau - 1, minlength=truth.K).astype(float)
            if np.any(counts == 0):
                raise EsClustError(f"empty block in draw: counts={counts.astype(int).tolist()}",
                                   reason="empty block")
        except EsClustError as e:
            last_error = e
            logger.warning(f"n={n} rep={replication} attempt={attempt} resampled: {e.reason} ({e})")
            continue
        if attempt:
            logger.info(f"n={n} rep={replication} succeeded after {attempt} resamples")
        return ReplicationData(ase=ase_emb, lse=lse_emb, tau=tau, counts=counts,
                               seed=seed, resamples=attempt)
    raise EsClustError(f"resampling exhausted after {config.max_resamples + 1} attempts: {last_error}",
                       reason=f"resample exhausted: {last_error.reason if last_error else 'unknown'}")


# ==================== Methods ====================

def _run_method(method: str, config: ExperimentConfig, truth: LatentConfig,
                data: ReplicationData, result: PairedResult) -> None:
    family, flavor_name = method.split("_")
    flavor = EmbeddingKind(flavor_name.upper())
    n = data.ase.n
    points = data.ase.points if flavor is EmbeddingKind.ASE else data.lse.points
    tol = config.tol_ase if flavor is EmbeddingKind.ASE else config.tol_lse

    if family == "kmeans":
        centers = truth.x if flavor is EmbeddingKind.ASE else lse_scaled_means(truth.x, n * truth.pi)
        fit = kmeans(points, truth.K, centers)
        result.input_digest_by_method[method] = digest(points)
        result.ari_by_method[method] = adjusted_rand_index(data.tau, fit.labels)
        result.converged_by_method[method] = fit.converged
        result.iterations_by_method[method] = fit.iterations
        if fit.empty_clusters:
            result.flags.append(f"{method}:empty clusters {fit.empty_clusters}")
        return

    if family == "em":
        engine = FullGmmEngine(points, flavor)
        init = initial_state(truth, n, flavor, engine="em")
        result.input_digest_by_method[method] = digest(engine.points)
    elif flavor is EmbeddingKind.ASE:
        engine = EsAseEngine(points, moments=config.moments)
        init = initial_state(truth, n, flavor)
        result.input_digest_by_method[method] = digest(engine.points)
    else:
        engine = EsLseEngine(points, data.ase.points, moments=config.moments)
        init = initial_state(truth, n, flavor)
        result.input_digest_by_method[method] = digest(engine.points, engine.ase_points)

    state, resp, report = run_to_convergence(engine, init, tol=tol, max_iter=config.max_iter)
    result.converged_by_method[method] = report.converged
    result.iterations_by_method[method] = report.iterations
    if report.reason is not None:
        result.flags.append(f"{method}:{report.reason}")
    elif not report.converged:
        result.flags.append(f"{method}:max_iter reached")
    totals = report.flag_totals()
    if totals["clamped"]:
        result.flags.append(f"{method}:clamped {totals['clamped']}")

    result.ari_by_method[method] = (adjusted_rand_index(data.tau, cluster_assign(resp))
                                    if resp is not None else math.nan)
    truth_state = initial_state(truth, n, flavor,
                                counts=data.counts if flavor is EmbeddingKind.LSE else None)
    result.param_err_by_method[method] = parameter_squared_error(state, truth_state, flavor)


def run_replication(config: ExperimentConfig, n: int, replication: int) -> PairedResult:
    """Sample one replication and score every requested method on the same data"""
    truth = config.truth()
    try:
        data = simulate_replication(config, truth, n, replication)
    except EsClustError as e:
        logger.error(f"n={n} rep={replication}: {e}")
        return PairedResult(replication=replication, n=n, seed=derive_seed(config.seed, n, replication, 0),
                            resamples=config.max_resamples, flags=[e.reason])

    result = PairedResult(replication=replication, n=n, seed=data.seed, resamples=data.resamples)
    for method in config.methods:
        try:
            _run_method(method, config, truth, data, result)
        except EsClustError as e:
            logger.error(f"n={n} rep={replication} {method} failed: {e}")
            result.flags.append(f"{method}:{e.reason}")
    return result


def _run_task(task: Tuple[ExperimentConfig, int, int]) -> PairedResult:
    config, n, replication = task
    return run_replication(config, n, replication)


def run_experiment(config: ExperimentConfig) -> List[PairedResult]:
    """
    Run every (n, replication) task of the experiment.

    :param config: experiment configuration
    :return: results ordered by (n, replication)
    """
    tasks = [(config, n, rep) for n in dict.fromkeys(config.n_grid) for rep in range(config.replications)]
    logger.info(f"Running '{config.name}': {len(tasks)} replications, methods={config.methods}, "
                f"jobs={config.jobs}")
    results: List[PairedResult] = []
    done_by_n: Dict[int, int] = {}
    if config.jobs == 1:
        iterator = map(_run_task, tasks)
        pool = None
    else:
        pool = multiprocessing.Pool(processes=config.jobs)
        iterator = pool.imap_unordered(_run_task, tasks)
    try:
        for result in iterator:
            results.append(result)
            done_by_n[result.n] = done_by_n.get(result.n, 0) + 1
            if done_by_n[result.n] == config.replications:
                logger.info(f"n={result.n}: {config.replications} replications finished")
    finally:
        if pool is not None:
            pool.close()
            pool.join()

    results.sort(key=lambda r: (r.n, r.replication))
    flagged = sum(1 for r in results if r.flags)
    if flagged:
        logger.warning(f"{flagged} of {len(results)} replications carry flags")
    return results
