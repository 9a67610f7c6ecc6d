"""Constellation-constraint detection on top of the DF-RLS stage filters.

Per user, the soft estimate u is classified against a QPSK-specific geometry:
inside the square whose corners are the four constellation points, u is
unreliable when its distance d = |u - Q(u)| to the nearest point exceeds
d_th; outside that square it is unreliable when min(|Re u|, |Im u|) falls
below sigma_s/sqrt(2) - d_th (the band hugging the decision axes). For an
unreliable user the M nearest points are each "rolled out": the remaining
users are detected by plain quantized decision feedback with frozen filters,
and the candidate whose completed vector minimizes ||r - H_hat b||^2 is kept.
Detection then continues with the refined decision; filters adapt once per
vector, after all users are decided.

Multi-branch operation runs one detector per user-ordering (branch 1 is the
column-norm order, further branches cyclically shift the reversed order) with
independent filter states, and keeps the branch whose final vector minimizes
the same selection metric.
"""

from __future__ import annotations

import itertools
from typing import NamedTuple

import numpy as np

from .dfdet import concat_regressor, filter_output, rls_step
from .modem import Constellation, nearest_list, quantize

__all__ = [
    "reliability_check",
    "rollout_candidate",
    "select_best",
    "TentativeVector",
    "CcResult",
    "detect_vector_cc",
    "branch_codebook",
    "MbResult",
    "multibranch_detect",
]


def reliability_check(u: complex, const: Constellation, d_th: float, counter=None) -> bool:
    """True when the soft estimate u counts as reliable.

    The unreliable region is: {d > d_th} inside the square through the four
    points, union {min(|Re u|, |Im u|) < sigma_s/sqrt(2) - d_th} outside it.
    Defined for the square QPSK alphabet only.
    """
    if not const.is_square_qpsk:
        raise ValueError("reliability region is defined for the square QPSK alphabet")
    if d_th < 0:
        raise ValueError(f"d_th must be >= 0, got {d_th}")
    if counter is not None:
        counter.count_quantize(const.size)
    t = np.sqrt(const.symbol_power / 2.0)
    re, im = abs(u.real), abs(u.imag)
    if re <= t and im <= t:
        pt, _ = quantize(u, const)
        return bool(abs(u - pt) <= d_th)
    return bool(min(re, im) >= t - d_th)


def rollout_candidate(states, r, prefix, cand_point, const, counter=None):
    """Complete a decision vector from prefix + candidate, filters frozen.

    Remaining stages use plain quantized decision feedback (no nested
    reliability checks, no adaptation). Returns the full vector in detection
    order.
    """
    n_users = len(states)
    k = len(prefix)
    dec = np.empty(n_users, dtype=complex)
    dec[:k] = prefix
    dec[k] = cand_point
    for j in range(k + 1, n_users):
        x = concat_regressor(r, dec[:j])
        u = filter_output(states[j], x, counter)
        if counter is not None:
            counter.count_quantize(const.size)
        pt, _ = quantize(u, const)
        dec[j] = pt
    return dec


def select_best(vectors, r, h_hat, counter=None):
    """Index of the vector minimizing ||r - H_hat b||^2, plus all metrics.

    Ties resolve to the lowest index (the candidate nearest to u, since
    callers pass vectors in nearest-first order).
    """
    metrics = np.empty(len(vectors))
    for i, b in enumerate(vectors):
        metrics[i] = np.sum(np.abs(r - h_hat @ b) ** 2)
        if counter is not None:
            counter.count_metric(h_hat.shape[0], h_hat.shape[1])
    return int(np.argmin(metrics)), metrics


class TentativeVector(NamedTuple):
    """One rolled-out candidate vector (original user order) and its origin."""

    vector: np.ndarray
    user: int        # original index of the user whose check fired
    cand_rank: int   # 0 = nearest candidate (the plain DF choice)
    cand_index: int  # constellation point index of the candidate
    metric: float


class CcResult(NamedTuple):
    s_hat: np.ndarray
    soft: np.ndarray
    tentatives: list
    cc_fires: int


def detect_vector_cc(
    states,
    r,
    h_hat,
    order,
    const: Constellation,
    d_th: float = 0.5,
    m_cand: int = 4,
    counter=None,
    chan_est=None,
    cc_enabled: bool = True,
) -> CcResult:
    """Decision-directed detection with constellation constraints.

    Same walk as detect_vector_df, but every unreliable soft estimate opens
    an M-candidate rollout resolved by the ML-style selection metric. All
    rolled-out vectors are returned (IDD list material) together with the
    number of reliability-check firings. With cc_enabled=False the rollout
    machinery is bypassed and the walk reduces exactly to plain DF detection.
    Filter adaptation (and, when given, the channel-estimator update) happens
    once per vector using the refined decisions.
    """
    n_users = len(order)
    if len(states) != n_users:
        raise ValueError(f"{len(states)} filter states for {n_users} users")
    dec = np.empty(n_users, dtype=complex)
    soft = np.empty(n_users, dtype=complex)
    regs = []
    tentatives: list = []
    fires = 0
    for k in range(n_users):
        x = concat_regressor(r, dec[:k])
        regs.append(x)
        u = filter_output(states[k], x, counter)
        soft[k] = u
        if counter is not None:
            counter.count_quantize(const.size)
        if not cc_enabled or reliability_check(u, const, d_th, counter):
            pt, _ = quantize(u, const)
            dec[k] = pt
            continue
        fires += 1
        cand_idx = nearest_list(u, const, m_cand)
        if counter is not None:
            counter.count_quantize(const.size)  # nearest-list distances
        rolled = []
        for ci in cand_idx:
            b_det = rollout_candidate(states, r, dec[:k], const.points[ci], const, counter)
            b_user = np.empty_like(b_det)
            b_user[order] = b_det
            rolled.append(b_user)
        best_m, metrics = select_best(rolled, r, h_hat, counter)
        for rank, (ci, b_user) in enumerate(zip(cand_idx, rolled)):
            tentatives.append(
                TentativeVector(b_user, int(order[k]), rank, int(ci), float(metrics[rank]))
            )
        dec[k] = const.points[cand_idx[best_m]]
    for k in range(n_users):
        rls_step(states[k], regs[k], dec[k], counter)
    s_hat = np.empty_like(dec)
    u_out = np.empty_like(soft)
    s_hat[order] = dec
    u_out[order] = soft
    if chan_est is not None:
        chan_est.update(s_hat, r, counter)
    return CcResult(s_hat, u_out, tentatives, fires)


def branch_codebook(base_order, n_branches: int, exhaustive: bool = False):
    """Detection-order codebook for multi-branch operation.

    Branch 1 is the given (column-norm) order; branches 2..L are the cyclic
    shifts of the reversed order, duplicates dropped. With exhaustive=True all
    K! permutations are returned (allowed up to K = 4).
    """
    base = np.asarray(base_order)
    k = base.size
    if exhaustive:
        if k > 4:
            raise ValueError(f"exhaustive codebook limited to K <= 4, got K={k}")
        return [np.array(p) for p in itertools.permutations(range(k))]
    if n_branches < 1:
        raise ValueError(f"need at least one branch, got {n_branches}")
    cands = [base]
    rev = base[::-1]
    for shift in range(k):
        cands.append(np.roll(rev, -shift))
    seen, out = set(), []
    for c in cands:
        key = tuple(int(v) for v in c)
        if key not in seen:
            seen.add(key)
            out.append(np.array(key))
    if n_branches > len(out):
        raise ValueError(
            f"{n_branches} branches requested but only {len(out)} distinct "
            f"cyclic orderings exist for K={k}"
        )
    return out[:n_branches]


class MbResult(NamedTuple):
    s_hat: np.ndarray
    soft: np.ndarray
    tentatives: list
    cc_fires: int
    best_branch: int
    branch_metrics: np.ndarray


def multibranch_detect(
    branch_states,
    r,
    h_hat,
    codebook,
    const: Constellation,
    d_th: float = 0.5,
    m_cand: int = 4,
    counter=None,
    chan_est=None,
) -> MbResult:
    """Run one constraint detector per ordering and keep the best final vector.

    Every branch adapts its own filters on its own decisions, so adding
    branches never perturbs existing ones. The pooled tentative list holds
    each branch's rollouts and final vector (deduplication is left to the
    soft demapper). The channel estimator, when given, is updated once with
    the winning decisions.
    """
    finals, metrics, pooled = [], np.empty(len(codebook)), []
    softs = []
    fires = 0
    for l, (states_l, order_l) in enumerate(zip(branch_states, codebook)):
        res = detect_vector_cc(
            states_l, r, h_hat, order_l, const, d_th, m_cand, counter=counter
        )
        finals.append(res.s_hat)
        softs.append(res.soft)
        pooled.extend(res.tentatives)
        pooled.append(TentativeVector(res.s_hat, -1, -1, -1, np.nan))
        fires += res.cc_fires
        metrics[l] = np.sum(np.abs(r - h_hat @ res.s_hat) ** 2)
        if counter is not None:
            counter.count_metric(h_hat.shape[0], h_hat.shape[1])
    best = int(np.argmin(metrics))
    if chan_est is not None:
        chan_est.update(finals[best], r, counter)
    return MbResult(finals[best], softs[best], pooled, fires, best, metrics)
