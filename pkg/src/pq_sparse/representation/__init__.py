"""Dictionaries, Group Lasso solver and dataset encoding"""

from .atoms import (
    PRESETS,
    AtomIndex,
    Dictionary,
    DictionaryBlock,
    DictionaryConfig,
    DictionaryKind,
    GroupSlice,
    build_dictionary,
    build_gabor,
    build_harmonics,
    build_mhwt,
    build_stockwell,
    concat,
    from_matrix,
    load_or_build,
    normalize_columns,
)
from .encoding import SPARSE_MODES, EncodedDataset, encode_dataset, read_encoded, write_encoded
from .group_lasso import (
    Coefficients,
    GroupLassoSolver,
    SolveReport,
    SolverConfig,
    compute_s_g,
    group_lasso_reference,
    group_lasso_shooting,
    group_soft_threshold,
    least_squares_fit,
    objective,
    reconstruct,
    sparsity_fraction,
)
