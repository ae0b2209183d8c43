"""Multi-kernel binary classification that directly optimizes
multivariate performance measures (error rate, F1, PR-BEP, MCC, AUC)
with a cutting-plane constraint generator and alternating dual /
kernel-weight steps."""

from .dataio import Dataset, FoldPlan, parse_dense_csv, parse_sparse, stratified_folds
from .errors import (
    DataError,
    KernelError,
    MkperfError,
    ModelFormatError,
    OracleExhausted,
    ParseError,
    QPError,
    SolverError,
)
from .kernels import KernelBank, KernelSpec, default_specs
from .measures import ContingencyTable, MeasureKind, delta, delta_auc, evaluate
from .model import Model, load, predict_scores, save
from .solver import TrainConfig, train

__all__ = [
    "ContingencyTable",
    "DataError",
    "Dataset",
    "FoldPlan",
    "KernelBank",
    "KernelError",
    "KernelSpec",
    "MeasureKind",
    "MkperfError",
    "Model",
    "ModelFormatError",
    "OracleExhausted",
    "ParseError",
    "QPError",
    "SolverError",
    "TrainConfig",
    "default_specs",
    "delta",
    "delta_auc",
    "evaluate",
    "load",
    "parse_dense_csv",
    "parse_sparse",
    "predict_scores",
    "save",
    "stratified_folds",
    "train",
]

__version__ = "0.1.0"
