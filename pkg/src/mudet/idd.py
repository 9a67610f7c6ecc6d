"""Iterative detection and decoding support.

Per-user rate-1/2 convolutional coding with random interleaving, a
log-domain BCJR decoder, and list-based soft demapping of the joint
detector output.  LLR convention throughout: positive means bit 1.

The detector side works on a candidate list per received vector.  The
list and the Euclidean metrics are computed once; turbo iterations only
re-weight the list with updated bit priors, so feedback never touches
the adaptive filters.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

L_MAX = 50.0


@dataclass(frozen=True)
class ConvCode:
    """Feed-forward rate-1/2 code with octal generators (7, 5), memory 2.

    State is (s1, s2) packed as ``s1 * 2 + s2`` with s1 the most recent
    input bit.  Two zero tail bits drive the trellis back to state 0.
    """

    next_state: np.ndarray = field(init=False)
    outputs: np.ndarray = field(init=False)
    n_states: int = 4
    n_out: int = 2
    n_tail: int = 2

    def __post_init__(self):
        nxt = np.zeros((4, 2), dtype=np.int64)
        out = np.zeros((4, 2, 2), dtype=np.int64)
        for st in range(4):
            s1, s2 = (st >> 1) & 1, st & 1
            for x in (0, 1):
                out[st, x, 0] = x ^ s1 ^ s2
                out[st, x, 1] = x ^ s2
                nxt[st, x] = (x << 1) | s1
        object.__setattr__(self, "next_state", nxt)
        object.__setattr__(self, "outputs", out)

    @property
    def rate(self):
        return 0.5


def conv_encode(info_bits, code=None):
    """Encode info bits and append the zero tail; returns 2*(n+2) coded bits."""
    if code is None:
        code = ConvCode()
    bits = np.asarray(info_bits, dtype=np.int64)
    if bits.ndim != 1 or not np.isin(bits, (0, 1)).all():
        raise ValueError("info bits must be a 1-D array of 0/1")
    coded = np.empty(2 * (bits.size + code.n_tail), dtype=np.int64)
    st = 0
    for t, x in enumerate(np.concatenate([bits, np.zeros(code.n_tail, np.int64)])):
        coded[2 * t : 2 * t + 2] = code.outputs[st, x]
        st = code.next_state[st, x]
    return coded


def make_interleaver(n_bits, rng):
    return rng.permutation(n_bits)


def interleave(x, perm):
    return np.asarray(x)[perm]


def deinterleave(y, perm):
    out = np.empty_like(np.asarray(y))
    out[perm] = y
    return out


def siso_decode(llr_in, code=None, l_max=L_MAX):
    """Exact log-MAP BCJR on a terminated trellis.

    Parameters
    ----------
    llr_in : coded-bit LLRs in decoder order, length 2*T.
    code : trellis description, defaults to the (7, 5) code.
    l_max : clip bound applied to the coded extrinsic output.

    Returns ``(coded_extrinsic, info_hard, info_llr)`` where the hard
    decisions cover the T - n_tail information positions.
    """
    if code is None:
        code = ConvCode()
    llr = np.asarray(llr_in, dtype=float)
    if llr.ndim != 1 or llr.size % code.n_out:
        raise ValueError("coded LLR length must be a multiple of 2")
    t_len = llr.size // 2
    if t_len <= code.n_tail:
        raise ValueError("frame too short for trellis termination")
    lam = llr.reshape(t_len, 2)
    out = code.outputs
    nxt = code.next_state

    # gamma[t, st, x]: only the bit-dependent part survives the LLR ratio
    gamma = lam[:, 0, None, None] * out[None, :, :, 0] + lam[:, 1, None, None] * out[None, :, :, 1]

    # each target state has exactly two predecessors (free oldest memory bit)
    pred_s = np.zeros((4, 2), dtype=np.int64)
    pred_x = np.zeros((4, 2), dtype=np.int64)
    for st in range(4):
        b1, b0 = (st >> 1) & 1, st & 1
        pred_s[st] = [(b0 << 1) | 0, (b0 << 1) | 1]
        pred_x[st] = b1

    alpha = np.full((t_len + 1, 4), -np.inf)
    alpha[0, 0] = 0.0
    for t in range(t_len):
        cand = alpha[t][pred_s] + gamma[t][pred_s, pred_x]
        alpha[t + 1] = np.logaddexp(cand[:, 0], cand[:, 1])

    beta = np.full((t_len + 1, 4), -np.inf)
    beta[t_len, 0] = 0.0
    for t in range(t_len - 1, -1, -1):
        cand = gamma[t] + beta[t + 1][nxt]
        beta[t] = np.logaddexp(cand[:, 0], cand[:, 1])

    scores = (alpha[:-1, :, None] + gamma + beta[1:][:, nxt]).reshape(t_len, 8)
    flat_out = out.reshape(8, 2)
    post = np.empty((t_len, 2))
    for j in (0, 1):
        hot = flat_out[:, j] == 1
        post[:, j] = logsumexp(scores[:, hot], axis=1) - logsumexp(scores[:, ~hot], axis=1)

    info_llr = logsumexp(scores[:, 1::2], axis=1) - logsumexp(scores[:, 0::2], axis=1)
    info_hard = (info_llr[: t_len - code.n_tail] > 0).astype(np.int64)
    extrinsic = np.clip(post - lam, -l_max, l_max).ravel()
    return extrinsic, info_hard, info_llr


def detector_extrinsic_llr(cand_bits, base_metrics, prior, noise_var, l_max=L_MAX):
    """Extrinsic bit LLRs from a candidate list of joint symbol vectors.

    cand_bits has shape (n_cand, K, 2), base_metrics (n_cand,) holds the
    squared Euclidean distances, prior (K, 2) the a-priori LLRs.  A side
    of the list with no representative is scored at the clip bound.
    """
    if noise_var <= 0:
        raise ValueError("noise_var must be positive for soft demapping")
    bits = np.asarray(cand_bits, dtype=np.int64)
    n_cand, k, _ = bits.shape
    pri = np.asarray(prior, dtype=float)
    scores = -np.asarray(base_metrics, dtype=float) / noise_var
    scores = scores + (bits.reshape(n_cand, -1) - 0.5) @ pri.ravel()
    le = np.empty((k, 2))
    for u in range(k):
        for j in (0, 1):
            hot = bits[:, u, j] == 1
            if not hot.any():
                le[u, j] = -l_max
            elif hot.all():
                le[u, j] = l_max
            else:
                le[u, j] = logsumexp(scores[hot]) - logsumexp(scores[~hot]) - pri[u, j]
    return np.clip(le, -l_max, l_max)


def idd_run(inst_bits, inst_metrics, noise_var, perms, code=None, n_iter=3, l_max=L_MAX):
    """Turbo loop over one frame of stored candidate lists.

    Parameters
    ----------
    inst_bits : sequence over data instants of (n_cand_i, K, 2) bit arrays.
    inst_metrics : matching sequence of (n_cand_i,) metric arrays.
    noise_var : receiver noise variance used in the list weighting.
    perms : (K, n_coded) per-user interleaver permutations.
    n_iter : decoder activations; the first runs on zero priors.

    Returns a list with one (K, n_info) hard info-bit array per iteration.
    """
    if code is None:
        code = ConvCode()
    n_inst = len(inst_bits)
    if n_inst == 0:
        raise ValueError("empty frame")
    k = inst_bits[0].shape[1]
    perms = np.asarray(perms)
    if perms.shape != (k, 2 * n_inst):
        raise ValueError("interleaver shape must be (K, 2 * n_instants)")
    n_info = n_inst - code.n_tail
    prior = np.zeros((n_inst, k, 2))
    per_iteration = []
    for _ in range(n_iter):
        ext = np.empty((n_inst, k, 2))
        for i in range(n_inst):
            ext[i] = detector_extrinsic_llr(
                inst_bits[i], inst_metrics[i], prior[i], noise_var, l_max
            )
        hard = np.empty((k, n_info), dtype=np.int64)
        for u in range(k):
            stream = ext[:, u, :].ravel()  # transmission order
            la = deinterleave(stream, perms[u])
            e_coded, info_hard, _ = siso_decode(la, code, l_max)
            prior[:, u, :] = interleave(e_coded, perms[u]).reshape(n_inst, 2)
            hard[u] = info_hard
        per_iteration.append(hard)
    return per_iteration
