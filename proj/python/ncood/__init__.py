"""Post-hoc out-of-distribution scoring from penultimate features and a linear head."""

from ._core import (
    ClassifierHead,
    ConsistencyError,
    ContractError,
    FitError,
    FormatError,
    GenerationError,
    IoError,
    LengthError,
    NcoodError,
    NumericalError,
    TrainStats,
    auroc,
    collapse_run,
    compute_train_stats,
    cos_score,
    detector_names,
    dist_score,
    energy_score,
    fpr_at_tpr,
    knn_score,
    load_tensor,
    make_synth_world,
    msp_score,
    nc_metrics,
    nc_score,
    p_score,
    read_bundle,
    save_tensor,
    score,
    simplex_etf,
    sweep_alpha,
    write_bundle,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
