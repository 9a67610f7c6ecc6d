"""Adaptive decision-feedback multi-user detection with RLS updates.

Users are detected successively in a norm-based order. The stage-k filter
(zero based) has n_rx + k taps: n_rx feedforward taps on the received vector
and k feedback taps on the already-decided symbols. Feedback enters through
the concatenated regressor [r; -s_prev], so a single inner product
u = w^H x yields feedforward combining minus interference cancellation.

Per symbol vector the detector first walks all users (decide), then performs
one RLS step per user with the regressors recorded during the walk. In
training mode decisions are replaced by the known pilot symbols, which also
drive the feedback and the updates.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .modem import Constellation, quantize

__all__ = [
    "FilterState",
    "init_filter_states",
    "column_norm_order",
    "concat_regressor",
    "filter_output",
    "rls_step",
    "detect_vector_df",
]


@dataclass
class FilterState:
    """Weights and inverse input-correlation matrix of one adaptive filter."""

    weights: np.ndarray
    p: np.ndarray
    lam: float
    n_updates: int = field(default=0)

    @classmethod
    def initial(cls, n_taps: int, lam: float = 0.998, delta: float = 0.01):
        if not 0.0 < lam <= 1.0:
            raise ValueError(f"forgetting factor lam={lam} outside (0, 1]")
        if delta <= 0:
            raise ValueError(f"delta must be positive, got {delta}")
        return cls(
            weights=np.zeros(n_taps, dtype=complex),
            p=np.eye(n_taps, dtype=complex) / delta,
            lam=lam,
        )

    @property
    def n_taps(self) -> int:
        return self.weights.size


def init_filter_states(
    n_users: int, n_rx: int, lam: float = 0.998, delta: float = 0.01
) -> list:
    """Fresh per-stage filter states; stage k has n_rx + k taps."""
    if n_users < 1 or n_rx < n_users:
        raise ValueError(f"need n_rx >= n_users >= 1, got n_rx={n_rx}, n_users={n_users}")
    return [FilterState.initial(n_rx + k, lam, delta) for k in range(n_users)]


def column_norm_order(h_hat: np.ndarray) -> np.ndarray:
    """Detection order: descending column norm, ties by ascending column index."""
    norms = np.linalg.norm(np.asarray(h_hat), axis=0)
    return np.argsort(-norms, kind="stable")


def concat_regressor(r: np.ndarray, prev_decisions: np.ndarray) -> np.ndarray:
    """Stack [r; -s_prev]; the minus sign folds cancellation into one dot product."""
    return np.concatenate((r, -np.asarray(prev_decisions)))


def filter_output(state: FilterState, regressor: np.ndarray, counter=None) -> complex:
    """Soft symbol estimate u = w^H x."""
    if counter is not None:
        counter.count_filter_output(state.n_taps)
    return np.vdot(state.weights, regressor)


def rls_step(state: FilterState, regressor: np.ndarray, desired: complex, counter=None):
    """One exponentially-weighted RLS update; returns the a-priori error.

    Gain and inverse-correlation recursion:

        q   = P x
        g   = q / (lam + x^H q)
        P  <- (P - g q^H) / lam          (re-symmetrized)
        w  <- w + g * conj(d - w^H x)
    """
    x = regressor
    p = state.p
    q = p @ x
    denom = state.lam + float(np.real(np.vdot(x, q)))
    g = q / denom
    xi = desired - np.vdot(state.weights, x)
    state.weights += g * np.conj(xi)
    p = (p - np.outer(g, q.conj())) / state.lam
    state.p = 0.5 * (p + p.conj().T)
    state.n_updates += 1
    if counter is not None:
        counter.count_rls_step(state.n_taps)
    return xi


def detect_vector_df(
    states: list,
    r: np.ndarray,
    order: np.ndarray,
    const: Constellation,
    pilots: np.ndarray | None = None,
    counter=None,
):
    """Detect one received vector and adapt every stage filter once.

    Walks users in `order`, forming each stage regressor from the decisions
    already made this vector. With `pilots` given (original user order) the
    known symbols replace the decisions both in the feedback and as the RLS
    desired response. Returns (decisions, soft outputs), both mapped back to
    original user order.
    """
    n_users = len(order)
    if len(states) != n_users:
        raise ValueError(f"{len(states)} filter states for {n_users} users")
    dec = np.empty(n_users, dtype=complex)
    soft = np.empty(n_users, dtype=complex)
    regs = []
    for k in range(n_users):
        x = concat_regressor(r, dec[:k])
        regs.append(x)
        u = filter_output(states[k], x, counter)
        soft[k] = u
        if pilots is None:
            if counter is not None:
                counter.count_quantize(const.size)
            pt, _ = quantize(u, const)
            dec[k] = pt
        else:
            dec[k] = pilots[order[k]]
    for k in range(n_users):
        rls_step(states[k], regs[k], dec[k], counter)
    s_hat = np.empty_like(dec)
    u_out = np.empty_like(soft)
    s_hat[order] = dec
    u_out[order] = soft
    return s_hat, u_out
