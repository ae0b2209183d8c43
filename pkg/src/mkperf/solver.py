"""Cutting-plane trainer with alternating dual and kernel-weight steps.

One outer iteration: (i) score every sample through the current dual
expansion, (ii) ask the measure's oracle for the most violated new
labeling, (iii) stop when its violation is within epsilon of the slack,
otherwise (iv) add it to the working set, (v) re-solve the dual QP over
the working set, and (vi) descend the kernel weights tau on the simplex.

The tau step minimizes the working-set primal

    F(tau) = 1/2 sum_m tau_m^2 q_m
             + C * max(0, max_l (loss_l - sum_m tau_m^2 r_{l,m}))

with q_m = alpha' G_m alpha and r_{l,m} = (G_m alpha)_l, i.e. the joint
objective with the weight vector eliminated through its dual expansion.
Both the QP and the tau step can only lower F at a fixed working set,
which gives the per-iteration monotonicity certificate.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import model as model_mod
from .dataio import Dataset, require_trainable
from .errors import OracleExhausted, QPError, SolverError
from .inference import (
    AugmentedObjective,
    argmax_auc,
    argmax_contingency,
    scores_from_dual,
)
from .kernels import KernelBank, combine_grams
from .measures import MeasureKind

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    """Training knobs; every numeric field must be positive."""

    measure: MeasureKind = MeasureKind.ERROR_RATE
    C: float = 100.0
    epsilon: float = 1e-3
    max_outer_iters: int = 500
    qp_tolerance: float = 1e-8
    tau_step_iters: int = 300
    seed: int = 0

    def __post_init__(self):
        for name in ("C", "epsilon", "max_outer_iters", "qp_tolerance", "tau_step_iters"):
            if not getattr(self, name) > 0:
                raise ValueError("%s must be positive" % name)


@dataclass
class DualState:
    """QP solution: coefficients, slack, and the dual objective value."""

    alpha: np.ndarray
    xi: float
    objective: float


class WorkingSet:
    """Ordered constraint list; rejects duplicate labelings."""

    def __init__(self, n: int):
        self.coeffs = np.zeros((0, n))
        self.losses = np.zeros(0)
        self.keys: list[bytes] = []
        self._key_set: set[bytes] = set()
        self.labelings: list[np.ndarray] = []

    def __len__(self) -> int:
        return self.coeffs.shape[0]

    @property
    def key_set(self) -> set[bytes]:
        return self._key_set

    def add(self, candidate: AugmentedObjective) -> None:
        if candidate.key in self._key_set:
            raise SolverError("duplicate constraint added to the working set")
        self.coeffs = np.vstack([self.coeffs, candidate.coeff[None, :]])
        self.losses = np.append(self.losses, candidate.loss)
        self.keys.append(candidate.key)
        self._key_set.add(candidate.key)
        self.labelings.append(candidate.labeling)


class GramProducts:
    """Per-kernel constraint Gram matrices G_m[l,k] = c_l' K_m c_k.

    Extended one row/column at a time as constraints arrive; the
    cached K_m c_l products make each extension O(|W| n).
    """

    def __init__(self, kernel_grams):
        self._kernel_grams = [np.asarray(K, dtype=np.float64) for K in kernel_grams]
        n = self._kernel_grams[0].shape[0]
        self.products = [np.zeros((0, n)) for _ in self._kernel_grams]
        self.matrices = [np.zeros((0, 0)) for _ in self._kernel_grams]

    @property
    def size(self) -> int:
        return self.matrices[0].shape[0]

    def add(self, coeff) -> None:
        coeff = np.asarray(coeff, dtype=np.float64)
        for m, K in enumerate(self._kernel_grams):
            u = K @ coeff
            cross = self.products[m] @ coeff
            old = self.matrices[m]
            size = old.shape[0]
            grown = np.empty((size + 1, size + 1))
            grown[:size, :size] = old
            grown[:size, size] = cross
            grown[size, :size] = cross
            grown[size, size] = float(coeff @ u)
            self.matrices[m] = grown
            self.products[m] = np.vstack([self.products[m], u[None, :]])

    def combined(self, tau) -> np.ndarray:
        return combine_grams(self.matrices, tau)


def gram_products(working_set: WorkingSet, bank: KernelBank) -> list[np.ndarray]:
    """Direct (non-incremental) computation of the per-kernel G_m."""
    if len(working_set) == 0:
        raise ValueError("working set is empty")
    out = []
    for K in bank.grams:
        G = working_set.coeffs @ K @ working_set.coeffs.T
        out.append(0.5 * (G + G.T))
    return out


def project_to_simplex(v) -> np.ndarray:
    """Euclidean projection onto {x >= 0, sum x = 1} (sort-based)."""
    v = np.asarray(v, dtype=np.float64)
    u = np.sort(v)[::-1]
    css = np.cumsum(u)
    j = np.arange(1, v.size + 1)
    rho = np.flatnonzero(u + (1.0 - css) / j > 0)[-1]
    shift = (1.0 - css[rho]) / (rho + 1.0)
    return np.maximum(v + shift, 0.0)


def _null_ascent(sub, rhs, capped):
    """Ascent direction in the flat subspace of the face, if any.

    Directions v with sub @ v = 0 (and sum v = 0 on the cap face) leave
    the quadratic term unchanged, so the slope is exactly rhs' v.  The
    stationarity system of the face is consistent precisely when rhs is
    orthogonal to this null space (the system matrix is symmetric), so
    a nonzero projection doubles as the inconsistency certificate.
    """
    k = sub.shape[0]
    stacked = np.vstack([sub, np.ones((1, k))]) if capped else sub
    _, singular, vt = np.linalg.svd(stacked)
    cutoff = (singular[0] if singular.size else 0.0) * 1e-10
    null_rows = vt[np.sum(singular > cutoff):]
    if null_rows.shape[0] == 0:
        return None
    v = null_rows.T @ (null_rows @ rhs)
    norm = float(np.linalg.norm(v))
    if norm <= 1e-9 * (1.0 + float(np.linalg.norm(rhs))):
        return None
    return v / norm


def _face_polish(G, losses, C, alpha0):
    """Monotone exact ascent on the face spanned by the current support.

    Each round either returns the stationary point of the active face,
    walks toward it until a coordinate (or the sum cap) blocks, or, when
    the face is flat along some direction, ascends that direction until
    blocked.  Every move increases the dual objective and shrinks the
    support or activates the cap, so the loop is bounded.
    """
    L = losses.shape[0]
    a = np.maximum(np.asarray(alpha0, dtype=np.float64).copy(), 0.0)
    capped = float(a.sum()) >= C * (1.0 - 1e-12)
    for _ in range(L + 3):
        selected = np.flatnonzero(a > 0.0)
        k = selected.size
        if k == 0:
            return a
        sub = G[np.ix_(selected, selected)]
        rhs = losses[selected]
        current = a[selected]

        flat = _null_ascent(sub, rhs, capped)
        if flat is not None:
            if float(rhs @ flat) < 0.0:
                flat = -flat
            direction = flat
            limit = np.inf
        else:
            if capped:
                system = np.zeros((k + 1, k + 1))
                system[:k, :k] = sub
                system[:k, k] = 1.0
                system[k, :k] = 1.0
                solution = np.linalg.lstsq(
                    system, np.concatenate([rhs, [C]]), rcond=None
                )[0]
                target = solution[:k]
            else:
                target = np.linalg.lstsq(sub, rhs, rcond=None)[0]
            direction = target - current
            limit = 1.0

        blocking_cap = False
        negatives = direction < 0.0
        if negatives.any():
            coordinate_limit = float((current[negatives] / -direction[negatives]).min())
            if coordinate_limit < limit:
                limit = coordinate_limit
        if not capped:
            drift = float(direction.sum())
            if drift > 0.0:
                cap_limit = (C - float(current.sum())) / drift
                if cap_limit < limit:
                    limit = cap_limit
                    blocking_cap = True
        if not np.isfinite(limit):
            return a  # a flat unbounded ray cannot happen on a bounded face
        if flat is None and limit >= 1.0:
            a = np.zeros(L)
            a[selected] = np.maximum(target, 0.0)
            if capped and a.sum() > 0:
                a *= C / float(a.sum())
            return a
        current = np.maximum(current + limit * direction, 0.0)
        current[current < 1e-14 * max(1.0, C)] = 0.0
        a = np.zeros(L)
        a[selected] = current
        if blocking_cap:
            capped = True
            total = float(a.sum())
            if total > 0.0:
                a *= C / total
    return a


def solve_alpha_qp(G, losses, C, qp_tolerance, warm_start=None,
                   max_iters: int = 200_000) -> DualState:
    """Maximize -1/2 a'Ga + loss'a over {a >= 0, sum a <= C}.

    Conditional gradient with away steps over the vertex set
    {0, C e_l}, exact line search, warm-started from the previous
    solution, plus a periodic fully-corrective jump to the exact
    optimum of the current active face (dual working sets are often
    degenerate, and pure away steps crawl on ill-conditioned faces).
    Convergence is the per-coordinate KKT residual: with g = loss - G a
    and mu the cap multiplier estimate, every active coordinate needs
    |g_l - mu| and every inactive one max(0, g_l - mu) at most
    ``qp_tolerance * max(1, C)``.
    """
    G = np.asarray(G, dtype=np.float64)
    losses = np.asarray(losses, dtype=np.float64)
    L = losses.shape[0]
    if G.shape != (L, L):
        raise ValueError("G must be %d x %d, got %s" % (L, L, G.shape))
    if L == 0:
        return DualState(np.zeros(0), 0.0, 0.0)
    # vertex weights: index 0 is the origin, index l+1 is C e_l
    lam = np.zeros(L + 1)
    if warm_start is None:
        lam[0] = 1.0
    else:
        start = np.maximum(np.asarray(warm_start, dtype=np.float64), 0.0)
        total = float(start.sum())
        if total > C:
            start = start * (C / total)
        lam[1:] = start / C
        lam[0] = max(0.0, 1.0 - float(lam[1:].sum()))
        lam /= lam.sum()
    tolerance = qp_tolerance * max(1.0, C)
    curvature_scale = max(1.0, float(np.abs(G).max())) * C * C
    stall_scale = 1e-15 * max(1.0, C) * max(1.0, float(np.abs(losses).max()))
    galpha = G @ (C * lam[1:])  # maintained incrementally, refreshed periodically
    residual = math.inf
    converged = False

    for iteration in range(max_iters):
        if 0.0 < lam[0] < 1e-14:
            lam[0] = 0.0
            total = lam.sum()
            lam /= total
            galpha /= total
        if iteration % 64 == 0:
            alpha = C * lam[1:]
            if (alpha > 0.0).any():
                candidate = _face_polish(G, losses, C, alpha)
                cand_obj = (-0.5 * float(candidate @ G @ candidate)
                            + float(losses @ candidate))
                cur_obj = -0.5 * float(alpha @ galpha) + float(losses @ alpha)
                if cand_obj > cur_obj + 1e-12 * max(1.0, abs(cur_obj)):
                    lam[1:] = candidate / C
                    lam[0] = max(0.0, 1.0 - float(lam[1:].sum()))
                    lam /= lam.sum()
                    galpha = G @ (C * lam[1:])
        elif iteration % 64 == 32:
            galpha = G @ (C * lam[1:])
        alpha = C * lam[1:]
        g = losses - galpha

        active = lam[1:] > 0.0
        at_cap = lam[0] <= 0.0
        mu = max(0.0, float(g[active].max())) if (at_cap and active.any()) else 0.0
        residual = 0.0
        if active.any():
            residual = float(np.abs(g[active] - mu).max())
        if not active.all():
            residual = max(residual, float((g[~active] - mu).max()), 0.0)
        if residual <= tolerance:
            converged = True
            break

        g_alpha = float(g @ alpha)
        alpha_g_alpha = float(alpha @ galpha)
        best = int(np.argmax(g))
        if C * g[best] > 0.0:
            fw_vertex = best + 1
            fw_gain = C * float(g[best]) - g_alpha
        else:
            fw_vertex = 0
            fw_gain = -g_alpha
        away_values = np.where(active, C * g, np.inf)
        away_index = int(np.argmin(away_values))
        away_value = float(away_values[away_index])
        if lam[0] > 0.0 and away_value >= 0.0:
            away_vertex, away_value = 0, 0.0
        else:
            away_vertex = away_index + 1
        away_gain = g_alpha - away_value

        if fw_gain >= away_gain:
            vertex, towards, gain = fw_vertex, True, fw_gain
            gamma_max = 1.0
        else:
            vertex, towards, gain = away_vertex, False, away_gain
            gamma_max = lam[vertex] / max(1.0 - lam[vertex], 1e-18)
        if gain <= stall_scale:
            break

        # directional curvature from cached products; the direction is
        # +-(C e_j - alpha) for a coordinate vertex and -+alpha for the origin
        if vertex > 0:
            j = vertex - 1
            curvature = C * C * float(G[j, j]) - 2.0 * C * float(galpha[j]) + alpha_g_alpha
        else:
            curvature = alpha_g_alpha
        if curvature <= 0.0:
            if curvature < -1e-12 * curvature_scale:
                raise QPError(
                    "working-set matrix is not positive semidefinite "
                    "(directional curvature %r)" % curvature
                )
            gamma = gamma_max
        else:
            gamma = min(gamma_max, gain / curvature)
        if gamma <= 0.0:
            break

        if towards:
            lam *= 1.0 - gamma
            galpha *= 1.0 - gamma
            lam[vertex] += gamma
            if vertex > 0:
                galpha += (gamma * C) * G[:, vertex - 1]
        else:
            lam *= 1.0 + gamma
            galpha *= 1.0 + gamma
            lam[vertex] -= gamma
            if vertex > 0:
                galpha -= (gamma * C) * G[:, vertex - 1]
            if lam[vertex] < 1e-15:
                lam[vertex] = 0.0
        np.maximum(lam, 0.0, out=lam)
        total = lam.sum()
        if abs(total - 1.0) > 1e-12:
            lam /= total
            galpha /= total

    if not converged and residual > tolerance:
        raise QPError(
            "QP did not reach tolerance %r within %d iterations "
            "(KKT residual %r)" % (tolerance, max_iters, residual)
        )
    alpha = C * lam[1:]
    margins = G @ alpha
    xi = max(0.0, float((losses - margins).max()))
    objective = -0.5 * float(alpha @ margins) + float(losses @ alpha)
    return DualState(alpha=alpha, xi=xi, objective=objective)


def _primal_terms(G_list, alpha):
    q = np.array([float(alpha @ Gm @ alpha) for Gm in G_list])
    margins_per_kernel = np.column_stack([Gm @ alpha for Gm in G_list])
    return q, margins_per_kernel


def restricted_primal(G_list, alpha, losses, C, tau):
    """(objective, slack) of the working-set primal F at given weights."""
    q, R = _primal_terms(G_list, np.asarray(alpha, dtype=np.float64))
    theta = np.asarray(tau, dtype=np.float64) ** 2
    losses = np.asarray(losses, dtype=np.float64)
    xi = max(0.0, float((losses - R @ theta).max())) if losses.size else 0.0
    return 0.5 * float(q @ theta) + C * xi, xi


def _project_rows_to_simplex(V):
    rows, M = V.shape
    U = np.sort(V, axis=1)[:, ::-1]
    css = np.cumsum(U, axis=1)
    j = np.arange(1, M + 1)
    positive = U + (1.0 - css) / j > 0
    rho = M - 1 - np.argmax(positive[:, ::-1], axis=1)
    shift = (1.0 - css[np.arange(rows), rho]) / (rho + 1.0)
    return np.maximum(V + shift[:, None], 0.0)


def solve_tau_step(G_list, alpha, losses, C, tau_current, tau_step_iters) -> np.ndarray:
    """Descend F(tau) on the simplex; never returns a worse point.

    Projected subgradient steps with normalized directions and a
    1/sqrt(t) schedule, restarted over a few step scales and from a
    few fixed starting points (current tau, uniform, each vertex) so
    nonconvex instances do not strand the iterate in a poor basin.
    All starts advance in lockstep as rows of one matrix.  The best
    iterate seen, including ``tau_current`` itself, wins.
    """
    M = len(G_list)
    tau_current = np.asarray(tau_current, dtype=np.float64)
    if M == 1:
        return np.ones(1)
    alpha = np.asarray(alpha, dtype=np.float64)
    losses = np.asarray(losses, dtype=np.float64)
    q, R = _primal_terms(G_list, alpha)
    L = losses.size

    def values(T):
        theta = T * T
        out = 0.5 * (theta @ q)
        if L:
            hinge = (losses[None, :] - theta @ R.T).max(axis=1)
            out += C * np.maximum(hinge, 0.0)
        return out

    def subgradients(T):
        grad = T * q[None, :]
        if L:
            slack = losses[None, :] - (T * T) @ R.T
            worst = slack.argmax(axis=1)
            hot = slack[np.arange(T.shape[0]), worst] > 0.0
            if hot.any():
                grad[hot] -= 2.0 * C * T[hot] * R[worst[hot]]
        return grad

    best = np.vstack([tau_current, np.full(M, 1.0 / M), np.eye(M)])
    best_values = values(best)
    scales = (0.5, 0.05, 0.005)
    per_stage = max(1, tau_step_iters // len(scales))
    for scale in scales:
        T = best.copy()
        for t in range(1, per_stage + 1):
            grad = subgradients(T)
            norms = np.maximum(np.linalg.norm(grad, axis=1), 1e-15)
            T = _project_rows_to_simplex(
                T - (scale / math.sqrt(t)) * grad / norms[:, None]
            )
            trial = values(T)
            improved = trial < best_values
            best[improved] = T[improved]
            best_values[improved] = trial[improved]
    winner = int(np.argmin(best_values))
    return best[winner].copy()


def _auc_baseline(y, scores):
    pos = scores[y == 1]
    neg = scores[y == -1]
    return 0.5 * (neg.size * float(pos.sum()) - pos.size * float(neg.sum()))


def train(dataset: Dataset, bank: KernelBank, config: TrainConfig) -> "model_mod.Model":
    """Run the alternating cutting-plane loop and return the trained model."""
    require_trainable(dataset)
    if bank.factors is None:
        raise ValueError("training expects a unit-diagonal normalized kernel bank")
    if bank.grams[0].shape[0] != dataset.sample_count:
        raise ValueError("kernel bank size does not match the dataset")
    y = dataset.labels
    kind = config.measure
    M = bank.size
    tau = np.full(M, 1.0 / M)
    working = WorkingSet(dataset.sample_count)
    products = GramProducts(bank.grams)
    alpha = np.zeros(0)
    xi = 0.0
    k_tau = combine_grams(bank.grams, tau)
    history: list[dict] = []
    converged = False
    iterations = 0

    for iteration in range(1, config.max_outer_iters + 1):
        scores = scores_from_dual(alpha, working.coeffs, k_tau)
        try:
            if kind == MeasureKind.AUC:
                candidate = argmax_auc(y, scores, working.key_set)
                baseline = _auc_baseline(y, scores)
            else:
                candidate = argmax_contingency(kind, y, scores, working.key_set)
                baseline = float(scores @ y)
        except OracleExhausted:
            converged = True
            break
        violation = candidate.value - baseline
        if violation <= xi + config.epsilon:
            converged = True
            break

        iterations = iteration
        working.add(candidate)
        products.add(candidate.coeff)
        combined = products.combined(tau)
        dual = solve_alpha_qp(
            combined,
            working.losses,
            config.C,
            config.qp_tolerance,
            warm_start=np.append(alpha, 0.0),
        )
        alpha = dual.alpha
        objective_qp, _ = restricted_primal(
            products.matrices, alpha, working.losses, config.C, tau
        )
        tau = solve_tau_step(
            products.matrices, alpha, working.losses, config.C, tau,
            config.tau_step_iters,
        )
        objective, xi = restricted_primal(
            products.matrices, alpha, working.losses, config.C, tau
        )
        if objective > objective_qp + 1e-6:
            raise SolverError(
                "weight step increased the working-set objective "
                "(%r -> %r)" % (objective_qp, objective)
            )
        k_tau = combine_grams(bank.grams, tau)
        record = {
            "iteration": iteration,
            "constraints": len(working),
            "xi": xi,
            "violation": violation,
            "objective": objective,
            "objective_qp": objective_qp,
            "tau": [float(t) for t in tau],
        }
        history.append(record)
        logger.info("%s", json.dumps(record, sort_keys=True))

    return model_mod.Model(
        measure=kind,
        kernel_specs=list(bank.specs),
        tau=tau,
        alpha=alpha,
        constraint_coeffs=working.coeffs,
        training_features=dataset.features,
        normalization_factors=[f.copy() for f in bank.factors],
        trained_config=config,
        iterations=iterations,
        converged=converged,
        history=history,
    )
