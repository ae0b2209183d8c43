"""Trained-model artifact: prediction, persistence, reload.

The weight vector is never materialized; prediction goes through the
dual expansion over the stored constraint coefficients.  A model keeps
its training features and recomputes cross-kernels at prediction time
(files stay O(n d), and test-time kernels need the training
normalization factors anyway).

Persisted documents are JSON with an explicit ``format_version``;
numbers are written in full round-trip precision.
"""

from __future__ import annotations

import json
import typing
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, ModelFormatError
from .kernels import KernelSpec, combined_cross, parse_kernel_specs
from .measures import MeasureKind, decisions

if typing.TYPE_CHECKING:  # pragma: no cover
    from .solver import TrainConfig

FORMAT_VERSION = 1

_REQUIRED_FIELDS = (
    "format_version",
    "measure",
    "kernel_specs",
    "tau",
    "alpha",
    "constraint_coeffs",
    "training_features",
    "normalization_factors",
    "trained_config",
)

_CONFIG_FIELDS = (
    "measure",
    "C",
    "epsilon",
    "max_outer_iters",
    "qp_tolerance",
    "tau_step_iters",
    "seed",
)


@dataclass
class Model:
    measure: MeasureKind
    kernel_specs: list[KernelSpec]
    tau: np.ndarray
    alpha: np.ndarray
    constraint_coeffs: np.ndarray
    training_features: np.ndarray
    normalization_factors: list[np.ndarray]
    trained_config: "TrainConfig"
    iterations: int = 0
    converged: bool = False
    history: list = field(default_factory=list, repr=False)

    def __post_init__(self):
        self.tau = np.asarray(self.tau, dtype=np.float64)
        self.alpha = np.asarray(self.alpha, dtype=np.float64)
        self.constraint_coeffs = np.asarray(self.constraint_coeffs, dtype=np.float64)
        self.training_features = np.asarray(self.training_features, dtype=np.float64)
        if self.constraint_coeffs.shape[0] != self.alpha.shape[0]:
            raise ModelFormatError(
                "constraint_coeffs row count %d does not match alpha length %d"
                % (self.constraint_coeffs.shape[0], self.alpha.shape[0])
            )
        if abs(float(self.tau.sum()) - 1.0) > 1e-9 or (self.tau < -1e-12).any():
            raise ModelFormatError("tau must be nonnegative and sum to 1")
        if (self.alpha < -1e-12).any():
            raise ModelFormatError("alpha must be nonnegative")
        if float(self.alpha.sum()) > self.trained_config.C + 1e-9:
            raise ModelFormatError("alpha exceeds the C budget")

    @property
    def feature_dim(self) -> int:
        return self.training_features.shape[0]

    def predict_scores(self, X_new) -> np.ndarray:
        return predict_scores(self, X_new)

    def predict(self, X_new) -> np.ndarray:
        return decisions(self.predict_scores(X_new))


def predict_scores(model: Model, X_new) -> np.ndarray:
    """Dual-expansion scores for new samples (columns of X_new)."""
    X_new = np.asarray(X_new, dtype=np.float64)
    if X_new.ndim != 2 or X_new.shape[0] != model.feature_dim:
        raise DataError(
            "feature dimension mismatch: model expects %d, data has %s"
            % (model.feature_dim, X_new.shape)
        )
    if model.alpha.size == 0:
        return np.zeros(X_new.shape[1])
    cross = combined_cross(
        model.kernel_specs,
        model.tau,
        model.normalization_factors,
        model.training_features,
        X_new,
    )
    return (model.alpha @ model.constraint_coeffs) @ cross


def _document(model: Model) -> dict:
    config = model.trained_config
    return {
        "format_version": FORMAT_VERSION,
        "measure": model.measure.value,
        "kernel_specs": [spec.to_string() for spec in model.kernel_specs],
        "tau": model.tau.tolist(),
        "alpha": model.alpha.tolist(),
        "constraint_coeffs": model.constraint_coeffs.tolist(),
        "training_features": model.training_features.tolist(),
        "normalization_factors": [f.tolist() for f in model.normalization_factors],
        "trained_config": {
            "measure": config.measure.value,
            "C": config.C,
            "epsilon": config.epsilon,
            "max_outer_iters": config.max_outer_iters,
            "qp_tolerance": config.qp_tolerance,
            "tau_step_iters": config.tau_step_iters,
            "seed": config.seed,
        },
    }


def save(model: Model, sink) -> None:
    """Write the model document to a path or a writable text stream."""
    text = json.dumps(_document(model), sort_keys=True, indent=1, allow_nan=False)
    if hasattr(sink, "write"):
        sink.write(text + "\n")
    else:
        with open(sink, "w", encoding="ascii") as handle:
            handle.write(text + "\n")


def _reject_constant(token):
    raise ModelFormatError("non-finite number %r in model document" % token)


def _finite_array(doc, name, dtype=np.float64):
    try:
        array = np.asarray(doc[name], dtype=dtype)
    except (TypeError, ValueError):
        raise ModelFormatError("field %r is not numeric" % name) from None
    if array.size and not np.isfinite(array).all():
        raise ModelFormatError("field %r contains a non-finite value" % name)
    return array


def load(source) -> Model:
    """Read a model document from a path or a readable text stream."""
    if hasattr(source, "read"):
        text = source.read()
    else:
        with open(source, "r", encoding="ascii") as handle:
            text = handle.read()
    try:
        doc = json.loads(text, parse_constant=_reject_constant)
    except json.JSONDecodeError as exc:
        raise ModelFormatError("model document is not valid JSON: %s" % exc) from None
    if not isinstance(doc, dict):
        raise ModelFormatError("model document must be a JSON object")
    for name in _REQUIRED_FIELDS:
        if name not in doc:
            raise ModelFormatError("missing field: %s" % name)
    version = doc["format_version"]
    if version != FORMAT_VERSION:
        raise ModelFormatError(
            "unsupported format version %r (this build reads version %d)"
            % (version, FORMAT_VERSION)
        )
    config_doc = doc["trained_config"]
    if not isinstance(config_doc, dict):
        raise ModelFormatError("trained_config must be an object")
    for name in _CONFIG_FIELDS:
        if name not in config_doc:
            raise ModelFormatError("missing field: trained_config.%s" % name)
    from .solver import TrainConfig

    try:
        measure = MeasureKind.from_name(doc["measure"])
        config = TrainConfig(
            measure=MeasureKind.from_name(config_doc["measure"]),
            C=float(config_doc["C"]),
            epsilon=float(config_doc["epsilon"]),
            max_outer_iters=int(config_doc["max_outer_iters"]),
            qp_tolerance=float(config_doc["qp_tolerance"]),
            tau_step_iters=int(config_doc["tau_step_iters"]),
            seed=int(config_doc["seed"]),
        )
        specs = []
        for item in doc["kernel_specs"]:
            parsed = parse_kernel_specs(item)
            if len(parsed) != 1:
                raise ValueError("expected one kernel per item, got %r" % item)
            specs.append(parsed[0])
    except ValueError as exc:
        raise ModelFormatError(str(exc)) from None
    tau = _finite_array(doc, "tau")
    alpha = _finite_array(doc, "alpha")
    coeffs = _finite_array(doc, "constraint_coeffs")
    features = _finite_array(doc, "training_features")
    factor_rows = _finite_array(doc, "normalization_factors")
    if coeffs.size == 0:
        coeffs = coeffs.reshape(0, features.shape[1] if features.ndim == 2 else 0)
    if coeffs.ndim != 2 or features.ndim != 2:
        raise ModelFormatError("constraint_coeffs and training_features must be matrices")
    if tau.shape[0] != len(specs):
        raise ModelFormatError("tau length does not match kernel_specs")
    if factor_rows.ndim != 2 or factor_rows.shape != (len(specs), features.shape[1]):
        raise ModelFormatError("normalization_factors must be one length-n row per kernel")
    if coeffs.shape[0] and coeffs.shape[1] != features.shape[1]:
        raise ModelFormatError("constraint_coeffs width does not match sample count")
    return Model(
        measure=measure,
        kernel_specs=specs,
        tau=tau,
        alpha=alpha,
        constraint_coeffs=coeffs,
        training_features=features,
        normalization_factors=[row for row in factor_rows],
        trained_config=config,
    )
