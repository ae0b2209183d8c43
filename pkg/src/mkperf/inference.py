"""Constraint-generation oracles: loss-augmented argmax over labelings.

The trainer repeatedly needs the labeling that maximizes
``loss(y, y'') + sum_i score_i * y''_i`` over all candidate labelings,
excluding the truth and everything already in the working set.

For contingency losses the maximizer is found without enumerating
2^n labelings: the loss depends only on (a, b) = (true positives
predicted +1, true negatives predicted +1), and inside one (a, b) cell
the linear term is maximized by flipping the a best-scored positives
and the b best-scored negatives to +1.  Walking cells in descending
objective order and emitting only that canonical labeling per cell
makes exclusion a set-membership check.

The ranking loss (AUC) lives on (positive, negative) pairs instead:
each pair independently chooses swapped or not, so the maximizer is a
per-pair max, and runners-up are enumerated best-first by total flip
cost.  A pair assignment enters the working set as an n-vector of net
pair coefficients, which lets the dual machinery treat both families
of constraints identically.

``brute_force_argmax`` is the exhaustive reference used by the tests;
it shares nothing with the fast path except the loss definitions in
:mod:`mkperf.measures`.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass

import numpy as np

from .errors import OracleExhausted
from .measures import CONTINGENCY_KINDS, ContingencyTable, MeasureKind, delta


@dataclass
class AugmentedObjective:
    """A candidate constraint: labeling, objective value, loss, and the
    coefficient vector the dual machinery needs.

    ``labeling`` is a +-1 vector for contingency measures and a boolean
    (positives x negatives) swapped-pair matrix for the ranking loss.
    ``key`` is the canonical byte identity used for exclusion checks.
    """

    labeling: np.ndarray
    value: float
    loss: float
    coeff: np.ndarray
    key: bytes


def labeling_key(labeling) -> bytes:
    """Canonical byte identity of a labeling or pair assignment."""
    return np.asarray(labeling, dtype=np.int8).tobytes()


def scores_from_dual(alpha, coeffs, kernel_matrix) -> np.ndarray:
    """Per-sample scores of the implicit weight vector.

    ``coeffs`` holds one constraint coefficient vector per row; the
    score of sample i is ``sum_l alpha_l sum_j coeffs[l, j] K[j, i]``.
    """
    K = np.asarray(kernel_matrix, dtype=np.float64)
    alpha = np.asarray(alpha, dtype=np.float64)
    if alpha.size == 0:
        return np.zeros(K.shape[1])
    coeffs = np.asarray(coeffs, dtype=np.float64)
    if coeffs.shape[0] != alpha.shape[0] or coeffs.shape[1] != K.shape[0]:
        raise ValueError(
            "shape mismatch: alpha %s, coeffs %s, kernel %s"
            % (alpha.shape, coeffs.shape, K.shape)
        )
    return (coeffs.T @ alpha) @ K


def _split_classes(y):
    y = np.asarray(y)
    pos = np.flatnonzero(y == 1)
    neg = np.flatnonzero(y == -1)
    if pos.size == 0 or neg.size == 0:
        raise ValueError("the oracle needs both classes present")
    return pos, neg


def _ranked_by_score(indices, scores):
    # score descending, ties by sample index ascending (stable sort)
    return indices[np.argsort(-scores[indices], kind="stable")]


def _loss_grid(kind, n_pos, n_neg):
    """delta for every cell (a, b): tp=a, fn=n_pos-a, fp=b, tn=n_neg-b."""
    a = np.arange(n_pos + 1, dtype=np.float64)[:, None]
    b = np.arange(n_neg + 1, dtype=np.float64)[None, :]
    n = n_pos + n_neg
    if kind == MeasureKind.ERROR_RATE:
        return ((n_pos - a) + b) / n
    if kind == MeasureKind.F1:
        return 1.0 - 2.0 * a / (a + b + n_pos)
    if kind == MeasureKind.PRBEP:
        return np.broadcast_to(1.0 - a / n_pos, (n_pos + 1, n_neg + 1)).copy()
    if kind == MeasureKind.MCC:
        num = a * (n_neg - b) - b * (n_pos - a)
        den_sq = (a + b) * (n - a - b) * n_pos * n_neg
        mcc = np.zeros((n_pos + 1, n_neg + 1))
        valid = den_sq > 0
        mcc[valid] = num[valid] / np.sqrt(den_sq[valid])
        return (1.0 - mcc) / 2.0
    raise ValueError("not a contingency measure: %r" % kind)


def argmax_contingency(kind, y, scores, excluded=frozenset()) -> AugmentedObjective:
    """Exact loss-augmented argmax for a contingency measure.

    Emits the best non-excluded canonical labeling; raises
    :class:`OracleExhausted` when every admissible cell is excluded.
    The truth is always excluded.
    """
    if kind not in CONTINGENCY_KINDS:
        raise ValueError("use argmax_auc for the ranking loss")
    y = np.asarray(y, dtype=np.int8)
    s = np.asarray(scores, dtype=np.float64)
    if y.shape != s.shape:
        raise ValueError("length mismatch: %s vs %s" % (y.shape, s.shape))
    pos, neg = _split_classes(y)
    n_pos, n_neg = pos.size, neg.size
    pos_ranked = _ranked_by_score(pos, s)
    neg_ranked = _ranked_by_score(neg, s)
    pos_prefix = np.concatenate(([0.0], np.cumsum(s[pos_ranked])))
    neg_prefix = np.concatenate(([0.0], np.cumsum(s[neg_ranked])))
    total = float(s.sum())

    loss_grid = _loss_grid(kind, n_pos, n_neg)
    linear = 2.0 * (pos_prefix[:, None] + neg_prefix[None, :]) - total
    objective = loss_grid + linear
    if kind == MeasureKind.PRBEP:
        a = np.arange(n_pos + 1)[:, None]
        b = np.arange(n_neg + 1)[None, :]
        objective[a + b != n_pos] = -np.inf

    flat = objective.ravel()
    order = np.argsort(-flat, kind="stable")  # ties: (a, b) lexicographic
    y_key = labeling_key(y)
    for cell in order:
        if not np.isfinite(flat[cell]):
            break
        a, b = divmod(int(cell), n_neg + 1)
        labeling = np.full(y.shape[0], -1, dtype=np.int8)
        labeling[pos_ranked[:a]] = 1
        labeling[neg_ranked[:b]] = 1
        key = labeling.tobytes()
        if key == y_key or key in excluded:
            continue
        return AugmentedObjective(
            labeling=labeling,
            value=float(flat[cell]),
            loss=float(loss_grid[a, b]),
            coeff=(y - labeling).astype(np.float64),
            key=key,
        )
    raise OracleExhausted("all admissible labelings are excluded")


def _pair_differences(y, scores):
    pos, neg = _split_classes(np.asarray(y, dtype=np.int8))
    s = np.asarray(scores, dtype=np.float64)
    return pos, neg, s[pos][:, None] - s[neg][None, :]


def _pair_constraint(pos, neg, swapped, n, value):
    count = int(swapped.sum())
    coeff = np.zeros(n)
    coeff[pos] = swapped.sum(axis=1)
    coeff[neg] = -swapped.sum(axis=0)
    return AugmentedObjective(
        labeling=swapped,
        value=float(value),
        loss=count / swapped.size,
        coeff=coeff,
        key=labeling_key(swapped),
    )


def argmax_auc(y, scores, excluded=frozenset()) -> AugmentedObjective:
    """Exact loss-augmented argmax over pairwise orderings.

    Pair (i, j) contributes ``1/N - (s_i - s_j)/2`` when swapped and
    ``(s_i - s_j)/2`` otherwise (N = number of pairs); the assignment
    maximizing the total is the per-pair max, and runners-up follow in
    best-first order of summed flip costs.  Ties pick the unswapped
    ordering.  Unlike the contingency oracle, the all-unswapped (true)
    assignment may be returned: the trainer reads its zero violation
    as convergence.
    """
    pos, neg, diff = _pair_differences(y, scores)
    n = np.asarray(y).shape[0]
    n_pairs = diff.size
    swap_gain = 1.0 / n_pairs - diff
    base = swap_gain > 0
    base_value = 0.5 * float(diff.sum()) + float(swap_gain[base].sum())
    costs = np.abs(swap_gain).ravel()
    by_cost = np.argsort(costs, kind="stable")
    sorted_costs = costs[by_cost]
    base_flat = base.ravel()

    # best-first walk over flip subsets: each heap entry extends or
    # replaces its last flip, enumerating subsets by nondecreasing cost
    heap = [(0.0, ())]
    while heap:
        cost, subset = heapq.heappop(heap)
        if subset:
            last = subset[-1]
            if last + 1 < n_pairs:
                heapq.heappush(
                    heap, (cost + sorted_costs[last + 1], subset + (last + 1,))
                )
                heapq.heappush(
                    heap,
                    (
                        cost - sorted_costs[last] + sorted_costs[last + 1],
                        subset[:-1] + (last + 1,),
                    ),
                )
        elif n_pairs > 0:
            heapq.heappush(heap, (sorted_costs[0], (0,)))
        flat = base_flat.copy()
        if subset:
            flat[by_cost[list(subset)]] ^= True
        swapped = flat.reshape(diff.shape)
        if labeling_key(swapped) in excluded:
            continue
        return _pair_constraint(pos, neg, swapped, n, base_value - cost)
    raise OracleExhausted("all admissible pair assignments are excluded")


def _enumerate_labelings(n):
    masks = np.arange(2 ** n, dtype=np.uint32)
    bits = (masks[:, None] >> np.arange(n, dtype=np.uint32)) & 1
    return (bits.astype(np.int8) * 2 - 1)


def brute_force_argmax(kind, y, scores, excluded=frozenset()) -> AugmentedObjective:
    """Exhaustive reference oracle for small instances.

    Contingency measures enumerate all 2^n labelings (n <= 20); the
    ranking loss enumerates all 2^(n_pos * n_neg) pair assignments
    (n_pos * n_neg <= 20).  Losses are computed one labeling at a time
    through :func:`mkperf.measures.delta`, independently of the fast
    oracle's grid.
    """
    y = np.asarray(y, dtype=np.int8)
    s = np.asarray(scores, dtype=np.float64)
    if kind == MeasureKind.AUC:
        pos, neg, diff = _pair_differences(y, s)
        n_pairs = diff.size
        if n_pairs > 20:
            raise ValueError("instance too large for brute force: %d pairs" % n_pairs)
        d_flat = diff.ravel()
        bits = ((np.arange(2 ** n_pairs, dtype=np.uint32)[:, None]
                 >> np.arange(n_pairs, dtype=np.uint32)) & 1).astype(bool)
        # value = (#swapped)/N + sum over pairs of +-(s_i - s_j)/2
        values = bits.sum(axis=1) / n_pairs + 0.5 * d_flat.sum()
        for start in range(0, bits.shape[0], 65536):
            block = bits[start:start + 65536]
            values[start:start + 65536] -= block.astype(np.float64) @ d_flat
        order = np.argsort(-values, kind="stable")
        for m in order:
            swapped = bits[m].reshape(diff.shape)
            if labeling_key(swapped) in excluded:
                continue
            return _pair_constraint(pos, neg, swapped, y.shape[0], values[m])
        raise OracleExhausted("all admissible pair assignments are excluded")

    n = y.shape[0]
    if n > 20:
        raise ValueError("instance too large for brute force: n=%d" % n)
    pos, neg = _split_classes(y)
    n_pos, n_neg = pos.size, neg.size
    labelings = _enumerate_labelings(n)
    predicted = labelings == 1
    tp_all = predicted[:, pos].sum(axis=1)
    fp_all = predicted[:, neg].sum(axis=1)
    linear = labelings.astype(np.float64) @ s
    values = np.full(labelings.shape[0], -np.inf)
    losses = np.zeros(labelings.shape[0])
    for m in range(labelings.shape[0]):
        tp, fp = int(tp_all[m]), int(fp_all[m])
        if kind == MeasureKind.PRBEP and tp + fp != n_pos:
            continue
        table = ContingencyTable(tp=tp, fp=fp, tn=n_neg - fp, fn=n_pos - tp)
        losses[m] = delta(kind, table)
        values[m] = losses[m] + linear[m]
    order = np.argsort(-values, kind="stable")
    y_key = labeling_key(y)
    for m in order:
        if not np.isfinite(values[m]):
            break
        labeling = labelings[m]
        key = labeling_key(labeling)
        if key == y_key or key in excluded:
            continue
        return AugmentedObjective(
            labeling=labeling.copy(),
            value=float(values[m]),
            loss=float(losses[m]),
            coeff=(y - labeling).astype(np.float64),
            key=key,
        )
    raise OracleExhausted("all admissible labelings are excluded")
