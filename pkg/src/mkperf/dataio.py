"""Dataset parsing, serialization and stratified cross-validation splits.

Two text formats are supported:

* sparse ``<label> <index>:<value> ...`` lines with 1-based, strictly
  increasing indices per line (label token ``+1``, ``1`` or ``-1``);
* a minimal dense CSV (no quoting) with one numeric row per sample and
  a designated label column holding +1/-1 or 0/1 values.

Sparse features are densified on load: the solver holds dense n x n
Gram matrices anyway, so the kernel storage dominates memory at the
dataset sizes this package targets.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np

from .errors import DataError, ParseError

_LABEL_TOKENS = {"+1": 1, "1": 1, "-1": -1}
_TOKEN_RE = re.compile(r"\S+")


@dataclass(frozen=True)
class Dataset:
    """Feature matrix (d x n, one column per sample) plus +-1 labels."""

    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        feats = np.ascontiguousarray(np.asarray(self.features, dtype=np.float64))
        labs = np.asarray(self.labels)
        if feats.ndim != 2:
            raise DataError("features must be a 2-d matrix (features x samples)")
        if labs.ndim != 1 or labs.shape[0] != feats.shape[1]:
            raise DataError(
                "label count %d does not match sample count %d"
                % (labs.shape[0] if labs.ndim == 1 else -1, feats.shape[1])
            )
        if not np.isin(labs, (-1, 1)).all():
            raise DataError("every label must be exactly +1 or -1")
        if not np.isfinite(feats).all():
            raise DataError("features contain a non-finite value")
        labs = labs.astype(np.int8)
        feats.setflags(write=False)
        labs.setflags(write=False)
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "labels", labs)

    @property
    def feature_dim(self) -> int:
        return self.features.shape[0]

    @property
    def sample_count(self) -> int:
        return self.features.shape[1]

    def subset(self, indices) -> "Dataset":
        """Dataset restricted to the given sample indices (in order)."""
        idx = np.asarray(indices, dtype=np.intp)
        return Dataset(self.features[:, idx], self.labels[idx])


def require_trainable(dataset: Dataset) -> None:
    """Reject datasets that cannot be trained on.

    Training (and the ranking-loss oracle in particular) requires both
    classes present and at least two samples.
    """
    if dataset.sample_count < 2:
        raise DataError("training requires at least 2 samples")
    labs = dataset.labels
    if not ((labs == 1).any() and (labs == -1).any()):
        raise DataError("training requires both classes present in the labels")


@dataclass(frozen=True)
class FoldPlan:
    """Assignment of every sample to one of ``fold_count`` folds."""

    fold_count: int
    assignments: np.ndarray

    def __post_init__(self):
        assign = np.asarray(self.assignments, dtype=np.int64)
        if self.fold_count < 2:
            raise DataError("fold_count must be at least 2")
        if assign.ndim != 1 or ((assign < 0) | (assign >= self.fold_count)).any():
            raise DataError("fold assignments out of range")
        assign.setflags(write=False)
        object.__setattr__(self, "assignments", assign)

    def split(self, fold: int):
        """(train_indices, held_out_indices) for one fold."""
        if not 0 <= fold < self.fold_count:
            raise DataError("fold index %d out of range" % fold)
        held = np.flatnonzero(self.assignments == fold)
        train = np.flatnonzero(self.assignments != fold)
        return train, held


def _iter_lines(source):
    if isinstance(source, str):
        return source.splitlines()
    return [line.rstrip("\r\n") for line in source]


def parse_sparse(source) -> Dataset:
    """Parse the sparse ``<label> <index>:<value> ...`` format.

    ``source`` is a string or an iterable of lines (e.g. an open file).
    The feature dimension is the largest index seen; absent indices are
    zero.  Column order equals line order.
    """
    labels = []
    rows = []
    dim = 0
    for lineno, raw in enumerate(_iter_lines(source), start=1):
        if not raw.strip():
            continue
        tokens = _TOKEN_RE.finditer(raw)
        first = next(tokens)
        label = _LABEL_TOKENS.get(first.group())
        if label is None:
            raise ParseError(
                "line %d, column %d: unknown label token %r"
                % (lineno, first.start() + 1, first.group())
            )
        entries = []
        prev_index = 0
        for match in tokens:
            token = match.group()
            col = match.start() + 1
            index_text, sep, value_text = token.partition(":")
            if not sep:
                raise ParseError(
                    "line %d, column %d: expected index:value, got %r"
                    % (lineno, col, token)
                )
            try:
                index = int(index_text)
            except ValueError:
                raise ParseError(
                    "line %d, column %d: bad feature index %r"
                    % (lineno, col, index_text)
                ) from None
            if index < 1:
                raise ParseError(
                    "line %d, column %d: feature indices are 1-based, got %d"
                    % (lineno, col, index)
                )
            if index <= prev_index:
                raise ParseError(
                    "line %d, column %d: non-increasing index %d after %d"
                    % (lineno, col, index, prev_index)
                )
            try:
                value = float(value_text)
            except ValueError:
                raise ParseError(
                    "line %d, column %d: bad feature value %r"
                    % (lineno, col, value_text)
                ) from None
            if not math.isfinite(value):
                raise ParseError(
                    "line %d, column %d: non-finite feature value %r"
                    % (lineno, col, value_text)
                )
            entries.append((index, value))
            prev_index = index
        dim = max(dim, prev_index)
        labels.append(label)
        rows.append(entries)
    if not rows:
        raise ParseError("empty input")
    features = np.zeros((dim, len(rows)), dtype=np.float64)
    for j, entries in enumerate(rows):
        for index, value in entries:
            features[index - 1, j] = value
    return Dataset(features, np.asarray(labels, dtype=np.int8))


def dump_sparse(dataset: Dataset) -> str:
    """Serialize back to the sparse format; re-parsing reproduces X and y."""
    lines = []
    for j in range(dataset.sample_count):
        parts = ["+1" if dataset.labels[j] > 0 else "-1"]
        column = dataset.features[:, j]
        for i in np.flatnonzero(column != 0.0):
            parts.append("%d:%s" % (i + 1, repr(float(column[i]))))
        lines.append(" ".join(parts))
    return "\n".join(lines) + "\n"


def parse_dense_csv(source, label_column: int = 0) -> Dataset:
    """Parse comma-separated numeric rows, one sample per row.

    The label column must contain only +1/-1, or only 0/1 (mapped to
    -1/+1).  All other columns become features, in file order.
    """
    raw_rows = []
    width = None
    for lineno, raw in enumerate(_iter_lines(source), start=1):
        if not raw.strip():
            continue
        cells = raw.split(",")
        if width is None:
            width = len(cells)
            if not -width <= label_column < width:
                raise DataError(
                    "label column %d out of range for %d columns"
                    % (label_column, width)
                )
        elif len(cells) != width:
            raise ParseError(
                "line %d: ragged row with %d cells, expected %d"
                % (lineno, len(cells), width)
            )
        values = []
        for col, cell in enumerate(cells):
            try:
                value = float(cell.strip())
            except ValueError:
                raise ParseError(
                    "line %d, column %d: non-numeric cell %r" % (lineno, col + 1, cell)
                ) from None
            if not math.isfinite(value):
                raise ParseError(
                    "line %d, column %d: non-finite cell %r" % (lineno, col + 1, cell)
                )
            values.append(value)
        raw_rows.append(values)
    if not raw_rows:
        raise ParseError("empty input")
    table = np.asarray(raw_rows, dtype=np.float64)
    label_index = label_column % width
    raw_labels = table[:, label_index]
    distinct = set(raw_labels.tolist())
    if not distinct <= {-1.0, 0.0, 1.0}:
        bad = sorted(distinct - {-1.0, 0.0, 1.0})[0]
        raise DataError("label value %r outside the allowed set {-1, 0, +1}" % bad)
    if 0.0 in distinct:
        if -1.0 in distinct:
            raise DataError("labels mix the 0/1 and -1/+1 schemes")
        labels = np.where(raw_labels == 0.0, -1, 1)
    else:
        labels = raw_labels.astype(np.int64)
    feature_cols = [c for c in range(width) if c != label_index]
    features = table[:, feature_cols].T
    return Dataset(features, labels)


def stratified_folds(labels, fold_count: int, seed: int) -> FoldPlan:
    """Deterministic class-stratified fold assignment.

    Shuffles each class with a seeded generator, then deals samples
    round-robin to folds, so per-fold class counts differ by at most
    one sample from perfect proportionality.
    """
    labs = np.asarray(labels)
    if fold_count < 2:
        raise DataError("fold_count must be at least 2")
    rng = np.random.default_rng(seed)
    assignments = np.full(labs.shape[0], -1, dtype=np.int64)
    for cls in (-1, 1):
        members = np.flatnonzero(labs == cls)
        if members.shape[0] < fold_count:
            raise DataError(
                "class %+d has %d samples, too few for %d folds"
                % (cls, members.shape[0], fold_count)
            )
        shuffled = rng.permutation(members)
        assignments[shuffled] = np.arange(shuffled.shape[0]) % fold_count
    return FoldPlan(fold_count, assignments)
