"""Selectable Kolmogorov-Arnold networks."""

from ._skan import (
    BasisDescriptor,
    BasisKind,
    ContractError,
    Dataset,
    EpochMetrics,
    FormatError,
    Model,
    SelectionRecord,
    TrainingAborted,
    TrainSchedule,
    base_pool,
    build_classifier,
    build_fit_model,
    default_pool,
    eval_basis,
    eval_fit_function,
    evaluate,
    fit_functions,
    gen_fit_dataset,
    load_image_set,
    load_model,
    load_results,
    pretrain_select,
    run_protocol,
    run_suite,
    subsample,
    train,
)

__all__ = [name for name in dir() if not name.startswith("_")]
