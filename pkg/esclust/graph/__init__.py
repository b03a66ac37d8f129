from .block_model import (
    BlockModel,
    LatentConfig,
    Graph,
    balanced_labels,
    canonical_latent_positions,
    check_labels,
    check_proportions,
    edge_probability_matrix,
    expand_latent_positions,
    sample_sbm,
)
