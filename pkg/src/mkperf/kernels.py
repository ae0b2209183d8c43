"""Base kernels, Gram matrices, and their weighted combination.

A kernel bank holds M precomputed n x n Gram matrices and a weight
vector tau on the probability simplex; the effective kernel is
``sum_m tau_m^2 * K_m``.  All base Grams are normalized to unit
diagonal before entering a bank: kernel families have incomparable
scales, and the weight step compares them directly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, KernelError

KERNEL_KINDS = ("linear", "polynomial", "rbf")


@dataclass(frozen=True)
class KernelSpec:
    """One base kernel: ``linear``, ``polynomial`` or ``rbf``.

    Parameters must be present exactly for the declared kind:
    polynomial takes ``degree`` (>= 1) and ``offset``; rbf takes
    ``gamma`` (> 0); linear takes none.
    """

    kind: str
    degree: int | None = None
    offset: float | None = None
    gamma: float | None = None

    def __post_init__(self):
        if self.kind not in KERNEL_KINDS:
            raise ValueError("unknown kernel kind %r" % (self.kind,))
        if self.kind == "linear":
            if not (self.degree is None and self.offset is None and self.gamma is None):
                raise ValueError("linear kernel takes no parameters")
        elif self.kind == "polynomial":
            if self.degree is None or self.offset is None or self.gamma is not None:
                raise ValueError("polynomial kernel needs degree and offset only")
            if int(self.degree) != self.degree or self.degree < 1:
                raise ValueError("polynomial degree must be an integer >= 1")
        else:
            if self.gamma is None or self.degree is not None or self.offset is not None:
                raise ValueError("rbf kernel needs gamma only")
            if not self.gamma > 0:
                raise ValueError("rbf gamma must be positive")

    @classmethod
    def linear(cls):
        return cls("linear")

    @classmethod
    def polynomial(cls, degree, offset):
        return cls("polynomial", degree=int(degree), offset=float(offset))

    @classmethod
    def rbf(cls, gamma):
        return cls("rbf", gamma=float(gamma))

    def to_string(self) -> str:
        if self.kind == "linear":
            return "linear"
        if self.kind == "polynomial":
            return "poly:degree=%d,offset=%s" % (self.degree, repr(float(self.offset)))
        return "rbf:gamma=%s" % repr(float(self.gamma))


def parse_kernel_specs(text: str) -> list[KernelSpec]:
    """Parse a comma-separated bank string.

    Items are ``linear``, ``poly:degree=2,offset=1`` and
    ``rbf:gamma=0.1``; parameter fragments after a ``poly:``/``rbf:``
    item belong to that item.
    """
    items: list[list[str]] = []
    for segment in text.split(","):
        segment = segment.strip()
        if not segment:
            raise ValueError("empty item in kernel specification %r" % text)
        head = segment.split(":", 1)[0]
        if head in ("linear", "poly", "polynomial", "rbf"):
            items.append([segment])
        elif "=" in segment and items:
            items[-1].append(segment)
        else:
            raise ValueError("cannot parse kernel item %r" % segment)
    specs = []
    for parts in items:
        head, _, first_param = parts[0].partition(":")
        params = {}
        for fragment in ([first_param] if first_param else []) + parts[1:]:
            key, sep, value = fragment.partition("=")
            if not sep:
                raise ValueError("expected key=value, got %r" % fragment)
            params[key.strip()] = value.strip()
        try:
            if head == "linear":
                if params:
                    raise ValueError("linear kernel takes no parameters")
                specs.append(KernelSpec.linear())
            elif head in ("poly", "polynomial"):
                specs.append(
                    KernelSpec.polynomial(int(params.pop("degree")), float(params.pop("offset")))
                )
                if params:
                    raise ValueError("unknown polynomial parameters %s" % sorted(params))
            else:
                specs.append(KernelSpec.rbf(float(params.pop("gamma"))))
                if params:
                    raise ValueError("unknown rbf parameters %s" % sorted(params))
        except KeyError as exc:
            raise ValueError("missing kernel parameter %s in %r" % (exc, text)) from None
    return specs


def default_specs(feature_dim: int) -> list[KernelSpec]:
    """Default bank spanning scales: linear, quadratic, and four rbf widths.

    The rbf gammas {0.01, 0.1, 1, 10} are divided by the feature
    dimension so the bank is usable without per-dataset tuning.
    """
    if feature_dim < 1:
        raise DataError("cannot build a default kernel bank for 0 features")
    d = float(feature_dim)
    return [
        KernelSpec.linear(),
        KernelSpec.polynomial(2, 1.0),
        KernelSpec.rbf(0.01 / d),
        KernelSpec.rbf(0.1 / d),
        KernelSpec.rbf(1.0 / d),
        KernelSpec.rbf(10.0 / d),
    ]


def _check_finite(matrix, label):
    if not np.isfinite(matrix).all():
        i, j = np.argwhere(~np.isfinite(matrix))[0]
        raise KernelError(
            "non-finite %s value for sample pair (%d, %d)" % (label, i, j)
        )


def gram(spec: KernelSpec, X) -> np.ndarray:
    """n x n Gram matrix of one base kernel over the columns of X (d x n)."""
    X = np.asarray(X, dtype=np.float64)
    inner = X.T @ X
    if spec.kind == "linear":
        K = inner
    elif spec.kind == "polynomial":
        K = (inner + spec.offset) ** spec.degree
    else:
        sq = np.einsum("ij,ij->j", X, X)
        dist = np.maximum(sq[:, None] + sq[None, :] - 2.0 * inner, 0.0)
        K = np.exp(-spec.gamma * dist)
    K = 0.5 * (K + K.T)
    _check_finite(K, "kernel")
    return K


def gram_cross(spec: KernelSpec, X1, X2) -> np.ndarray:
    """n1 x n2 cross-kernel block between the columns of X1 and X2."""
    X1 = np.asarray(X1, dtype=np.float64)
    X2 = np.asarray(X2, dtype=np.float64)
    if X1.shape[0] != X2.shape[0]:
        raise DataError(
            "feature dimension mismatch: %d vs %d" % (X1.shape[0], X2.shape[0])
        )
    inner = X1.T @ X2
    if spec.kind == "linear":
        K = inner
    elif spec.kind == "polynomial":
        K = (inner + spec.offset) ** spec.degree
    else:
        sq1 = np.einsum("ij,ij->j", X1, X1)
        sq2 = np.einsum("ij,ij->j", X2, X2)
        dist = np.maximum(sq1[:, None] + sq2[None, :] - 2.0 * inner, 0.0)
        K = np.exp(-spec.gamma * dist)
    _check_finite(K, "cross-kernel")
    return K


def self_kernel(spec: KernelSpec, X) -> np.ndarray:
    """K(x, x) for each column of X; the raw normalization diagonal."""
    X = np.asarray(X, dtype=np.float64)
    sq = np.einsum("ij,ij->j", X, X)
    if spec.kind == "linear":
        return sq
    if spec.kind == "polynomial":
        return (sq + spec.offset) ** spec.degree
    return np.ones(X.shape[1])


def normalize_unit_diagonal(K) -> np.ndarray:
    """Rescale a PSD Gram matrix to unit diagonal: K_ij / sqrt(K_ii K_jj)."""
    K = np.asarray(K, dtype=np.float64)
    diag = np.diagonal(K)
    if (diag <= 0).any():
        i = int(np.flatnonzero(diag <= 0)[0])
        raise KernelError(
            "cannot normalize: non-positive diagonal entry %r at index %d"
            % (float(diag[i]), i)
        )
    factors = np.sqrt(diag)
    out = K / np.outer(factors, factors)
    np.fill_diagonal(out, 1.0)
    return out


def combine_grams(grams, tau) -> np.ndarray:
    """Weighted combination ``sum_m tau_m^2 * K_m`` (no simplex check)."""
    tau = np.asarray(tau, dtype=np.float64)
    out = np.zeros_like(np.asarray(grams[0], dtype=np.float64))
    for weight, K in zip(tau, grams):
        out += (weight * weight) * np.asarray(K, dtype=np.float64)
    return out


def _check_simplex(tau, M):
    tau = np.asarray(tau, dtype=np.float64)
    if tau.shape != (M,):
        raise ValueError("tau must have one weight per kernel")
    if (tau < -1e-12).any() or abs(float(tau.sum()) - 1.0) > 1e-9:
        raise ValueError("tau must be nonnegative and sum to 1")
    return tau


@dataclass
class KernelBank:
    """M Gram matrices plus simplex weights tau.

    Immutable after construction except for ``tau``, which is replaced
    wholesale between solver iterations.  ``factors`` holds the raw
    per-kernel sqrt(K(x, x)) used to normalize; ``None`` means the
    grams were left unnormalized.
    """

    specs: list[KernelSpec]
    grams: list[np.ndarray]
    tau: np.ndarray
    factors: list[np.ndarray] | None = field(default=None)

    @classmethod
    def build(cls, specs, X, normalize: bool = True, tau=None) -> "KernelBank":
        specs = list(specs)
        if not specs:
            raise DataError("kernel bank needs at least one kernel")
        raw = [gram(spec, X) for spec in specs]
        factors = None
        if normalize:
            factors = []
            grams = []
            for K in raw:
                grams.append(normalize_unit_diagonal(K))
                factors.append(np.sqrt(np.diagonal(K).copy()))
        else:
            grams = raw
        if tau is None:
            tau = np.full(len(specs), 1.0 / len(specs))
        tau = _check_simplex(tau, len(specs))
        return cls(specs=specs, grams=grams, tau=tau.copy(), factors=factors)

    @property
    def size(self) -> int:
        return len(self.specs)

    def replace_tau(self, tau) -> None:
        self.tau = _check_simplex(tau, self.size).copy()


def combine(bank: KernelBank) -> np.ndarray:
    """The bank's combined n x n kernel matrix."""
    return combine_grams(bank.grams, bank.tau)


def combined_cross(specs, tau, factors, X_train, X_test) -> np.ndarray:
    """n_train x n_test combined cross-kernel.

    ``factors`` are the training-side normalization factors recorded
    when the bank was built (``None`` for an unnormalized bank); test
    columns are normalized by their own sqrt(K(x, x)).  A test point
    with K(x, x) = 0 has an all-zero column for any PSD kernel, so its
    factor is treated as 1.
    """
    tau = np.asarray(tau, dtype=np.float64)
    out = None
    for m, spec in enumerate(specs):
        block = gram_cross(spec, X_train, X_test)
        if factors is not None:
            test_diag = np.maximum(self_kernel(spec, X_test), 0.0)
            test_factors = np.sqrt(test_diag)
            test_factors[test_factors == 0.0] = 1.0
            block = block / np.outer(factors[m], test_factors)
        term = (tau[m] * tau[m]) * block
        out = term if out is None else out + term
    return out


def combine_cross(bank: KernelBank, X_train, X_test) -> np.ndarray:
    """Cross-kernel between the bank's training matrix and new samples."""
    return combined_cross(bank.specs, bank.tau, bank.factors, X_train, X_test)
