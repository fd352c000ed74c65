from .disturbances import (
    LABELED_CLASSES,
    DisturbanceClass,
    DisturbanceParams,
    DisturbanceRanges,
    SamplingGrid,
    Signal,
    add_awgn,
    generate_disturbance,
    generate_pure,
    sample_params,
)
from .dataset import Dataset, DatasetConfig, add_noise_to_dataset, generate_dataset, read_dataset, write_dataset
