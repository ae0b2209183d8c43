"""Independent reference implementations used only by the tests.

Nothing here shares code paths with the package's solvers: the QP
reference enumerates active sets, the weight-step reference is a grid
search, and objective recomputations are direct transcriptions of the
definitions.
"""

import itertools

import numpy as np

from mkperf.measures import MeasureKind, contingency, delta


def reference_alpha_qp(G, losses, C):
    """Global max of -1/2 a'Ga + l'a over {a >= 0, sum a <= C}.

    Enumerates every subset of free coordinates, solves the stationarity
    equalities with and without the sum cap, and keeps the best feasible
    candidate.  Exact for full-rank G at the |W| <= 6 scale it is used at.
    """
    G = np.asarray(G, dtype=np.float64)
    losses = np.asarray(losses, dtype=np.float64)
    L = losses.shape[0]
    best_obj, best_a = 0.0, np.zeros(L)  # a = 0 is always feasible
    for size in range(1, L + 1):
        for free in itertools.combinations(range(L), size):
            free = list(free)
            sub = G[np.ix_(free, free)]
            rhs = losses[free]
            scale = max(1.0, float(np.abs(sub).max()))
            candidates = []
            sol = np.linalg.lstsq(sub, rhs, rcond=None)[0]
            if np.abs(sub @ sol - rhs).max() <= 1e-9 * scale * (1 + np.abs(sol).max()):
                candidates.append(sol)
            k = len(free)
            kkt = np.zeros((k + 1, k + 1))
            kkt[:k, :k] = sub
            kkt[:k, k] = 1.0
            kkt[k, :k] = 1.0
            rhs_cap = np.concatenate([rhs, [C]])
            sol_cap = np.linalg.lstsq(kkt, rhs_cap, rcond=None)[0]
            if np.abs(kkt @ sol_cap - rhs_cap).max() <= 1e-9 * scale * (
                1 + np.abs(sol_cap).max()
            ):
                candidates.append(sol_cap[:k])
            for cand in candidates:
                if (cand < -1e-10).any():
                    continue
                a = np.zeros(L)
                a[free] = np.maximum(cand, 0.0)
                total = float(a.sum())
                if total > C * (1 + 1e-10):
                    continue
                if total > C:
                    a *= C / total
                obj = float(-0.5 * a @ G @ a + losses @ a)
                if obj > best_obj:
                    best_obj, best_a = obj, a
    return best_obj, best_a


def working_set_objective(G_list, alpha, losses, C, tau):
    """Direct transcription of the working-set primal objective."""
    theta = [float(t) ** 2 for t in tau]
    reg = 0.0
    for t, Gm in zip(theta, G_list):
        reg += 0.5 * t * float(alpha @ Gm @ alpha)
    worst = 0.0
    for l in range(len(losses)):
        margin = 0.0
        for m, t in enumerate(theta):
            margin += t * float(G_list[m][l] @ alpha)
        worst = max(worst, float(losses[l]) - margin)
    return reg + C * worst if worst > 0 else reg


def grid_min_two_kernels(G_list, alpha, losses, C, spacing=1e-3):
    """Grid search of the weight-step objective over the 1-simplex."""
    assert len(G_list) == 2
    q = [float(alpha @ Gm @ alpha) for Gm in G_list]
    margins = [np.asarray(Gm @ alpha, dtype=np.float64) for Gm in G_list]
    losses = np.asarray(losses, dtype=np.float64)
    points = int(round(1.0 / spacing)) + 1
    t1 = np.linspace(0.0, 1.0, points)
    theta1 = t1 ** 2
    theta2 = (1.0 - t1) ** 2
    reg = 0.5 * (theta1 * q[0] + theta2 * q[1])
    if losses.size:
        slack = (
            losses[None, :]
            - theta1[:, None] * margins[0][None, :]
            - theta2[:, None] * margins[1][None, :]
        )
        hinge = np.maximum(slack.max(axis=1), 0.0)
    else:
        hinge = 0.0
    return float((reg + C * hinge).min())


def recompute_contingency_value(kind, y, scores, labeling):
    """Loss plus linear term of one labeling, from the definitions."""
    ct = contingency(y, labeling)
    return delta(kind, ct) + float(np.asarray(scores, dtype=np.float64) @ labeling)


def recompute_auc_value(y, scores, swapped):
    """Pairwise augmented objective of one swap assignment, loop form."""
    y = np.asarray(y)
    s = np.asarray(scores, dtype=np.float64)
    pos = np.flatnonzero(y == 1)
    neg = np.flatnonzero(y == -1)
    n_pairs = pos.size * neg.size
    total = 0.0
    for i, p in enumerate(pos):
        for j, q in enumerate(neg):
            d = s[p] - s[q]
            if swapped[i, j]:
                total += 1.0 / n_pairs - 0.5 * d
            else:
                total += 0.5 * d
    return total


def auc_baseline(y, scores):
    """Value of the all-unswapped assignment."""
    return recompute_auc_value(y, scores, np.zeros(
        (int((np.asarray(y) == 1).sum()), int((np.asarray(y) == -1).sum())), dtype=bool
    ))


def enumerate_all_constraints(kind, y, kernel):
    """Every admissible constraint (coeff, loss) of a small instance.

    For the one-shot training reference: all labelings except the truth
    (all with the PR-BEP count restriction where it applies).
    """
    y = np.asarray(y, dtype=np.int8)
    n = y.shape[0]
    n_pos = int((y == 1).sum())
    coeffs, losses = [], []
    for mask in range(2 ** n):
        labeling = np.array(
            [1 if mask >> i & 1 else -1 for i in range(n)], dtype=np.int8
        )
        if (labeling == y).all():
            continue
        if kind == MeasureKind.PRBEP and int((labeling == 1).sum()) != n_pos:
            continue
        coeffs.append((y - labeling).astype(np.float64))
        losses.append(delta(kind, contingency(y, labeling)))
    coeffs = np.asarray(coeffs)
    grams = coeffs @ np.asarray(kernel) @ coeffs.T
    return coeffs, np.asarray(losses), 0.5 * (grams + grams.T)


def cvxopt_qp_value(G, losses, C):
    """One-shot dual optimum via cvxopt (independent interior-point)."""
    from cvxopt import matrix, solvers

    L = len(losses)
    P = matrix(np.asarray(G, dtype=np.float64))
    q = matrix(-np.asarray(losses, dtype=np.float64))
    constraints = np.vstack([-np.eye(L), np.ones((1, L))])
    h = np.concatenate([np.zeros(L), [C]])
    options = {
        "show_progress": False,
        "abstol": 1e-12,
        "reltol": 1e-12,
        "feastol": 1e-12,
        "maxiters": 200,
    }
    solution = solvers.qp(P, q, matrix(constraints), matrix(h), options=options)
    alpha = np.asarray(solution["x"]).ravel()
    return float(-0.5 * alpha @ np.asarray(G) @ alpha + np.asarray(losses) @ alpha)
