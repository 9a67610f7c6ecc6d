"""Fading channel models, transmission, and channel estimation.

Two channel models are provided: per-frame block fading (one i.i.d. draw per
frame) and a time-varying flat-fading model built from sums of sinusoids whose
sample autocorrelation approximates J0(2*pi*fdT*tau). Estimation is a pilot
least-squares fit optionally tracked by an exponentially-windowed RLS update
driven by detected symbol vectors.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "gen_block_fading",
    "JakesParams",
    "gen_jakes_sequence",
    "gen_jakes_channel",
    "transmit",
    "ls_channel_estimate",
    "RlsChannelEstimator",
    "rls_channel_update",
    "sample_autocorrelation",
]


def gen_block_fading(n_rx: int, n_users: int, rng: np.random.Generator) -> np.ndarray:
    """One (n_rx, n_users) matrix of i.i.d. unit-variance circular Gaussians."""
    return (
        rng.standard_normal((n_rx, n_users)) + 1j * rng.standard_normal((n_rx, n_users))
    ) / np.sqrt(2.0)


@dataclass(frozen=True)
class JakesParams:
    """Doppler model parameters.

    normalized_doppler is f_d * T_s (Doppler frequency times symbol period);
    the oscillator count trades accuracy of the J0 autocorrelation shape
    against generation cost. The autocorrelation contract, not the oscillator
    count, is what the tests pin down.
    """

    normalized_doppler: float
    seed: int = 0
    n_oscillators: int = 16


def gen_jakes_sequence(
    fdt: float, length: int, rng: np.random.Generator, n_oscillators: int = 16
) -> np.ndarray:
    """Unit-power complex fading gain sequence with J0-shaped autocorrelation.

    Sum-of-sinusoids construction: N oscillators at arrival angles
    alpha_n = (2*pi*n - pi + theta) / (4N) with theta and the per-oscillator
    phases drawn uniformly, in-phase and quadrature rails using cos(alpha) and
    sin(alpha) Doppler shifts respectively. Both rails have unit variance; the
    complex gain is (I + jQ)/sqrt(2), so E|h|^2 = 1. fdt = 0 degenerates to a
    constant sequence.
    """
    if not 0.0 <= fdt < 0.5:
        raise ValueError(f"normalized Doppler fdt={fdt} outside [0, 0.5)")
    if length < 1:
        raise ValueError(f"length must be positive, got {length}")
    n = int(n_oscillators)
    theta = rng.uniform(-np.pi, np.pi)
    phi = rng.uniform(-np.pi, np.pi, size=n)
    psi = rng.uniform(-np.pi, np.pi, size=n)
    alpha = (2.0 * np.pi * np.arange(1, n + 1) - np.pi + theta) / (4.0 * n)
    wt = 2.0 * np.pi * fdt * np.arange(length)
    gi = np.zeros(length)
    gq = np.zeros(length)
    # accumulate per oscillator to keep memory at O(length)
    for k in range(n):
        gi += np.cos(wt * np.cos(alpha[k]) + phi[k])
        gq += np.cos(wt * np.sin(alpha[k]) + psi[k])
    scale = np.sqrt(2.0 / n)
    return (scale * gi + 1j * scale * gq) / np.sqrt(2.0)


def gen_jakes_channel(
    length: int,
    n_rx: int,
    n_users: int,
    fdt: float,
    seed_seq: np.random.SeedSequence,
    n_oscillators: int = 16,
) -> np.ndarray:
    """(length, n_rx, n_users) channel trajectory with independent entries.

    Each (rx, user) path gets its own RNG substream spawned from seed_seq, so
    trajectories are reproducible and mutually independent.
    """
    children = seed_seq.spawn(n_rx * n_users)
    h = np.empty((length, n_rx, n_users), dtype=complex)
    for m in range(n_rx):
        for k in range(n_users):
            rng = np.random.default_rng(children[m * n_users + k])
            h[:, m, k] = gen_jakes_sequence(fdt, length, rng, n_oscillators)
    return h


def transmit(h: np.ndarray, s: np.ndarray, noise_var: float, rng: np.random.Generator):
    """r = H s + v with v circular Gaussian of total per-entry variance noise_var.

    s may be a (K,) vector or a (K, T) frame; the same H applies to every
    column. noise_var = 0 gives the noise-free observation.
    """
    if noise_var < 0:
        raise ValueError(f"noise_var must be >= 0, got {noise_var}")
    r = h @ s
    if noise_var > 0:
        sig = np.sqrt(noise_var / 2.0)
        r = r + sig * (rng.standard_normal(r.shape) + 1j * rng.standard_normal(r.shape))
    return r


def ls_channel_estimate(r_pilots: np.ndarray, s_pilots: np.ndarray) -> np.ndarray:
    """Least-squares channel fit H_hat = R S^H (S S^H)^-1 from pilot columns.

    r_pilots is (n_rx, P), s_pilots is (K, P). Raises if the pilot Gram matrix
    is singular (too few or degenerate pilot vectors).
    """
    r_pilots = np.asarray(r_pilots)
    s_pilots = np.asarray(s_pilots)
    if r_pilots.shape[1] != s_pilots.shape[1]:
        raise ValueError(
            f"pilot column mismatch: r has {r_pilots.shape[1]}, s has {s_pilots.shape[1]}"
        )
    gram = s_pilots @ s_pilots.conj().T
    rhs = r_pilots @ s_pilots.conj().T
    cond = np.linalg.cond(gram)
    if not np.isfinite(cond) or cond > 1e12:
        raise ValueError(
            f"pilot Gram matrix is singular or near-singular (cond={cond:.3g}); "
            "need at least K linearly independent pilot vectors"
        )
    return np.linalg.solve(gram, rhs.conj().T).conj().T


@dataclass
class RlsChannelEstimator:
    """Exponentially-windowed RLS tracker for the channel matrix.

    Solves, recursively in i,

        H[i] = argmin_H  sum_tau lam^(i-tau) ||r[tau] - H s[tau]||^2
               (+ lam^i * delta ridge anchored at the initial estimate)

    via the inverse input-correlation matrix P. Typically seeded from the
    pilot LS fit and then fed decided symbol vectors during data.
    """

    h_hat: np.ndarray
    lam: float = 0.998
    delta: float = 0.01
    p: np.ndarray = field(init=False)
    n_updates: int = field(init=False, default=0)

    def __post_init__(self):
        if not 0.0 < self.lam <= 1.0:
            raise ValueError(f"forgetting factor lam={self.lam} outside (0, 1]")
        if self.delta <= 0:
            raise ValueError(f"delta must be positive, got {self.delta}")
        self.h_hat = np.array(self.h_hat, dtype=complex)
        k = self.h_hat.shape[1]
        self.p = np.eye(k, dtype=complex) / self.delta

    def update(self, s_hat: np.ndarray, r: np.ndarray, counter=None) -> np.ndarray:
        """One tracking step with decisions s_hat and observation r.

        Returns the a-priori innovation e = r - H_hat s_hat. A zero innovation
        leaves the estimate unchanged.
        """
        s_hat = np.asarray(s_hat).reshape(-1)
        q = self.p @ s_hat
        denom = self.lam + float(np.real(s_hat.conj() @ q))
        g = q / denom
        e = r - self.h_hat @ s_hat
        self.h_hat = self.h_hat + np.outer(e, g.conj())
        self.p = (self.p - np.outer(g, q.conj())) / self.lam
        self.p = 0.5 * (self.p + self.p.conj().T)
        self.n_updates += 1
        if counter is not None:
            counter.count_channel_rls(s_hat.size, r.size)
        return e


def rls_channel_update(state: RlsChannelEstimator, s_hat, r, counter=None):
    """Functional alias for :meth:`RlsChannelEstimator.update`."""
    return state.update(s_hat, r, counter=counter)


def sample_autocorrelation(x: np.ndarray, max_lag: int) -> np.ndarray:
    """Normalized sample autocorrelation r[tau] for tau = 0..max_lag."""
    x = np.asarray(x).reshape(-1)
    if max_lag >= x.size:
        raise ValueError(f"max_lag {max_lag} >= sequence length {x.size}")
    power = np.mean(np.abs(x) ** 2)
    out = np.empty(max_lag + 1, dtype=complex)
    for tau in range(max_lag + 1):
        if tau:
            out[tau] = np.mean(x[:-tau] * x[tau:].conj()) / power
        else:
            out[tau] = 1.0
    return out
