"""
esclust: 随机块模型的谱聚类与 ES (Expectation-Solution) 算法
"""

__version__ = "0.1.0"

from .covariance import ase_covariance, lse_covariance
from .embedding import Embedding, EmbeddingKind, ase, ase_to_lse, lse, procrustes_align
from .evaluation import PairedResult, adjusted_rand_index, median_ci, paired_difference_table
from .graph import BlockModel, Graph, LatentConfig, canonical_latent_positions, sample_sbm
from .mixture import (
    EsAseEngine,
    EsLseEngine,
    FullGmmEngine,
    MixtureState,
    cluster_assign,
    kmeans,
    run_to_convergence,
)
from .utils.errors import EsClustError
