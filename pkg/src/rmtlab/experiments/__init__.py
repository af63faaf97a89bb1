from .config import ConfigError, EnsembleConfig, ExperimentConfig, config_from_dict, load_config
from .runner import (
    CoverageError,
    NumericalFailure,
    ResumeError,
    fit_samples,
    read_samples,
    run_fit,
    run_report,
    run_sampling,
    run_theory_table,
)
from .seeding import derive_seed, splitmix64
