"""Multivariate performance measures and their losses.

Each contingency measure has a loss ``delta`` in [0, 1] that is zero
exactly on the true labeling:

* error rate: (fp + fn) / n
* F1:         1 - 2 tp / (2 tp + fp + fn)
* PR-BEP:     1 - tp / (tp + fn), defined only when fp == fn
              (predicted positives equal actual positives)
* MCC:        (1 - mcc) / 2, with mcc = 0 on a zero denominator

The ranking loss (AUC) is pairwise, not a contingency function: it is
the fraction of (positive, negative) pairs ranked in the wrong order,
ties counting one half.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np


class MeasureKind(enum.Enum):
    ERROR_RATE = "err"
    F1 = "f1"
    PRBEP = "prbep"
    MCC = "mcc"
    AUC = "auc"

    @classmethod
    def from_name(cls, name: str) -> "MeasureKind":
        for member in cls:
            if member.value == name:
                return member
        raise ValueError(
            "unknown measure %r; valid names: %s"
            % (name, ", ".join(m.value for m in cls))
        )


CONTINGENCY_KINDS = (
    MeasureKind.ERROR_RATE,
    MeasureKind.F1,
    MeasureKind.PRBEP,
    MeasureKind.MCC,
)


@dataclass(frozen=True)
class ContingencyTable:
    tp: int
    fp: int
    tn: int
    fn: int

    def __post_init__(self):
        for name in ("tp", "fp", "tn", "fn"):
            count = getattr(self, name)
            if int(count) != count or count < 0:
                raise ValueError("%s must be a nonnegative integer" % name)

    @property
    def n(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


def contingency(y_true, y_pred) -> ContingencyTable:
    """Standard 2x2 cross-tabulation of +-1 predictions against truth."""
    yt = np.asarray(y_true)
    yp = np.asarray(y_pred)
    if yt.shape != yp.shape:
        raise ValueError("length mismatch: %s vs %s" % (yt.shape, yp.shape))
    return ContingencyTable(
        tp=int(((yt == 1) & (yp == 1)).sum()),
        fp=int(((yt == -1) & (yp == 1)).sum()),
        tn=int(((yt == -1) & (yp == -1)).sum()),
        fn=int(((yt == 1) & (yp == -1)).sum()),
    )


def mcc_coefficient(ct: ContingencyTable) -> float:
    """Matthews correlation; 0 when the denominator vanishes."""
    den = (
        (ct.tp + ct.fp) * (ct.tp + ct.fn) * (ct.tn + ct.fp) * (ct.tn + ct.fn)
    )
    if den == 0:
        return 0.0
    return (ct.tp * ct.tn - ct.fp * ct.fn) / math.sqrt(den)


def delta(kind: MeasureKind, ct: ContingencyTable) -> float:
    """Loss in [0, 1] for a contingency measure."""
    if kind == MeasureKind.ERROR_RATE:
        return (ct.fp + ct.fn) / ct.n
    if kind == MeasureKind.F1:
        return 1.0 - 2 * ct.tp / (2 * ct.tp + ct.fp + ct.fn)
    if kind == MeasureKind.PRBEP:
        if ct.fp != ct.fn:
            raise ValueError(
                "PR-BEP needs predicted positives == actual positives "
                "(fp=%d, fn=%d)" % (ct.fp, ct.fn)
            )
        return 1.0 - ct.tp / (ct.tp + ct.fn)
    if kind == MeasureKind.MCC:
        return (1.0 - mcc_coefficient(ct)) / 2.0
    raise ValueError("the %s loss is pairwise; use delta_auc" % kind.value)


def delta_auc(y_true, scores) -> float:
    """Fraction of swapped (positive, negative) pairs, ties as one half."""
    yt = np.asarray(y_true)
    s = np.asarray(scores, dtype=np.float64)
    if yt.shape != s.shape:
        raise ValueError("length mismatch: %s vs %s" % (yt.shape, s.shape))
    pos = s[yt == 1]
    neg = s[yt == -1]
    if pos.size == 0 or neg.size == 0:
        raise ValueError("ranking loss needs at least one sample of each class")
    diff = pos[:, None] - neg[None, :]
    swapped = (diff < 0).sum() + 0.5 * (diff == 0).sum()
    return float(swapped) / (pos.size * neg.size)


def decisions(scores) -> np.ndarray:
    """Elementwise sign with the sign(0) = +1 convention."""
    s = np.asarray(scores, dtype=np.float64)
    return np.where(s >= 0, 1, -1).astype(np.int8)


def _top_count_positive(scores, count) -> np.ndarray:
    """Labeling with the ``count`` best-scored samples positive.

    Ties broken by score descending then index ascending, matching the
    oracle's ordering.
    """
    s = np.asarray(scores, dtype=np.float64)
    order = np.argsort(-s, kind="stable")
    labeling = np.full(s.shape[0], -1, dtype=np.int8)
    labeling[order[:count]] = 1
    return labeling


def evaluate(kind: MeasureKind, y_true, scores) -> float:
    """The reported (goodness) metric for one measure.

    ``err`` reports accuracy, ``f1``/``mcc`` their coefficients from
    sign(scores), ``prbep`` the precision with the top-n_pos scores
    predicted positive, and ``auc`` one minus the ranking loss.
    """
    yt = np.asarray(y_true)
    s = np.asarray(scores, dtype=np.float64)
    if kind == MeasureKind.AUC:
        return 1.0 - delta_auc(yt, s)
    if kind == MeasureKind.PRBEP:
        n_pos = int((yt == 1).sum())
        if n_pos == 0:
            raise ValueError("PR-BEP needs at least one actual positive")
        ct = contingency(yt, _top_count_positive(s, n_pos))
        return ct.tp / n_pos
    ct = contingency(yt, decisions(s))
    if kind == MeasureKind.ERROR_RATE:
        return 1.0 - (ct.fp + ct.fn) / ct.n
    if kind == MeasureKind.F1:
        return 2 * ct.tp / (2 * ct.tp + ct.fp + ct.fn)
    if kind == MeasureKind.MCC:
        return mcc_coefficient(ct)
    raise ValueError("unknown measure %r" % kind)
