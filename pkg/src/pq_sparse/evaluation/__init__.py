"""Repeated experiments, statistics and result reports"""

from .experiment import (
    DictionaryStore,
    ExperimentConfig,
    ExperimentResult,
    SweepResult,
    parse_snr,
    run_experiment,
    snr_sweep,
)
from .statistics import (
    ConfusionMatrix,
    RankSumResult,
    accuracy,
    confusion,
    mean_std,
    pooled_confusion,
    split_stratified,
    wilcoxon_rank_sum,
)
