from .spectral_embedding import (
    Embedding,
    EmbeddingKind,
    ase,
    ase_to_lse,
    lse,
    normalized_laplacian,
    principal_angles,
    procrustes_align,
    write_embedding,
)
