from .metrics import (
    PairedResult,
    adjusted_rand_index,
    best_permutation,
    median_ci,
    paired_difference_table,
    paired_differences,
    parameter_squared_error,
)
