"""Flexible (early-exit) ensemble classification."""

from ._core import (
    CalibrationObjective,
    CascadeTrace,
    EnsembleDataset,
    EvaluationReport,
    FlexensError,
    MarginHistogram,
    SweepRow,
    SynthConfig,
    average_logits,
    calibrate,
    ensemble_size_sweep,
    evaluate_objective,
    generate,
    import_csv,
    load_dataset,
    margin_histogram,
    predict,
    report,
    run_dataset,
    run_sample,
    save_dataset,
    score_margin,
    softmax,
)

__all__ = [name for name in dir() if not name.startswith("_")]
