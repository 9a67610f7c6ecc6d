"""Monte-Carlo experiment harness.

One frame = pilot block + decision-directed data block over a fresh channel
draw.  Frames are independent and own their RNG substreams, so results are
reproducible bit-for-bit regardless of worker count.  Records map 1:1 onto
the CSV contract used by the plotting side.
"""

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .ccdet import branch_codebook, detect_vector_cc, multibranch_detect
from .channel import (
    RlsChannelEstimator,
    gen_block_fading,
    gen_jakes_channel,
    ls_channel_estimate,
    transmit,
)
from .dfdet import column_norm_order, detect_vector_df, init_filter_states
from .flops import FlopCounter
from .idd import ConvCode, conv_encode, idd_run, interleave, make_interleaver
from .modem import build_qpsk
from .refdet import MlBank, ml_exhaustive, sphere_decode, vblast_detect

DETECTORS = ("dfrls", "amudfcc", "vblast", "ml", "sd")
CHANNELS = ("block", "jakes")
CHAN_EST_MODES = ("perfect", "ls", "ls+rls")

CSV_HEADER = (
    "detector,K,NR,snr_db,fdT,frames,ber,ber_ci_lo,ber_ci_hi,ser,"
    "mse_final,cc_rate,flops_per_symbol,analytic_flops,seed"
)
MSE_CSV_HEADER = "detector,K,NR,snr_db,fdT,frames,iteration,mse,train_len,seed"

STEADY_WINDOW = 100  # data instants pooled into the steady-state MSE figure


@dataclass
class SimConfig:
    detector: str = "amudfcc"
    n_users: int = 4
    n_rx: int = 4
    snr_db: float = 12.0
    channel: str = "block"
    fdt: float = 0.0
    chan_est: str = "ls"
    n_frames: int = 100
    frame_len: int = 500  # total vectors per frame, training included
    train_len: int = 10
    lam: float = 0.998
    delta: float = 0.01
    d_th: float = 0.5
    d_th_alpha: float = None  # when set, d_th = alpha * sigma_v
    m_cand: int = 4
    n_branches: int = 1
    coded: bool = False
    turbo_iters: int = 3
    seed: int = 1

    def validate(self):
        if self.detector not in DETECTORS:
            raise ValueError(f"detector must be one of {DETECTORS}, got {self.detector!r}")
        if self.channel not in CHANNELS:
            raise ValueError(f"channel must be one of {CHANNELS}, got {self.channel!r}")
        if self.chan_est not in CHAN_EST_MODES:
            raise ValueError(f"chan_est must be one of {CHAN_EST_MODES}, got {self.chan_est!r}")
        if not (self.n_rx >= self.n_users >= 1):
            raise ValueError(f"need n_rx >= n_users >= 1, got n_rx={self.n_rx} n_users={self.n_users}")
        if self.train_len < self.n_users:
            raise ValueError(f"train_len must be >= n_users, got train_len={self.train_len}")
        if self.frame_len <= self.train_len:
            raise ValueError(f"frame_len must exceed train_len, got frame_len={self.frame_len}")
        if self.n_frames < 1:
            raise ValueError(f"n_frames must be >= 1, got {self.n_frames}")
        if not 0.0 < self.lam <= 1.0:
            raise ValueError(f"lam must be in (0, 1], got {self.lam}")
        if self.delta <= 0:
            raise ValueError(f"delta must be positive, got {self.delta}")
        if self.d_th < 0:
            raise ValueError(f"d_th must be non-negative, got {self.d_th}")
        if self.d_th_alpha is not None and self.d_th_alpha <= 0:
            raise ValueError(f"d_th_alpha must be positive, got {self.d_th_alpha}")
        if not 1 <= self.m_cand <= 4:
            raise ValueError(f"m_cand must be in 1..4 for QPSK, got {self.m_cand}")
        if self.n_branches < 1:
            raise ValueError(f"n_branches must be >= 1, got {self.n_branches}")
        if self.turbo_iters < 1:
            raise ValueError(f"turbo_iters must be >= 1, got {self.turbo_iters}")
        if not 0.0 <= self.fdt < 0.5:
            raise ValueError(f"fdt must be in [0, 0.5), got {self.fdt}")
        if self.coded:
            if self.frame_len - self.train_len < 3:
                raise ValueError("frame_len leaves no room for coded data after train_len")
            if math.isinf(self.snr_db):
                raise ValueError("coded runs need a finite snr_db")
        if self.seed < 0:
            raise ValueError(f"seed must be non-negative, got {self.seed}")


@dataclass
class MetricsRecord:
    detector: str
    k: int
    n_rx: int
    snr_db: float
    fdt: float
    frames: int
    ber: float
    ber_ci_lo: float
    ber_ci_hi: float
    ser: float
    mse_final: float
    cc_rate: float
    flops_per_symbol: float
    analytic_flops: float
    seed: int


def snr_to_noise_variance(snr_db, const, code_rate=1.0):
    """Map per-user Eb/N0 in dB to receiver noise variance.

    sigma_v^2 = sigma_s^2 / (log2(C) * code_rate * 10^(snr/10)); an infinite
    SNR gives exactly zero noise.
    """
    if not 0.0 < code_rate <= 1.0:
        raise ValueError(f"code_rate must be in (0, 1], got {code_rate}")
    if math.isinf(snr_db) and snr_db > 0:
        return 0.0
    bits = math.log2(const.size)
    return const.symbol_power / (bits * code_rate * 10.0 ** (snr_db / 10.0))


def analytic_complexity(k, m=4):
    """Closed-form complex-multiplication counts per detected symbol.

    The itemized CC overhead sums the ordering comparisons and per-candidate
    rollout work stage by stage; it is reported alongside the closed form
    rather than reconciled with it.
    """
    if k < 1 or m < 1:
        raise ValueError("k and m must be >= 1")
    itemized = k * (k - 1) / 2 + m * sum(
        j for kk in range(1, k + 1) for j in range(1, k - kk + 1)
    )
    return {
        "vblast": 2 * k**3 + k**2 + k,
        "dfrls": 28 * k**2 / 3 - 4 / 3,
        "cc_overhead_worst": m * (5 * k**2 / 2 - 3 * k / 2),
        "cc_overhead_itemized": itemized,
    }


def analytic_flops_per_symbol(detector, k, m=4):
    """Weighted analytic FLOPs (6 per multiplication); nan for ml and sd."""
    c = analytic_complexity(k, m)
    if detector == "vblast":
        return 6.0 * c["vblast"]
    if detector == "dfrls":
        return 6.0 * c["dfrls"]
    if detector == "amudfcc":
        return 6.0 * (c["dfrls"] + c["cc_overhead_worst"])
    return math.nan


def wilson_interval(errors, trials, z=1.959963984540054):
    if trials == 0:
        return (math.nan, math.nan)
    p = errors / trials
    z2 = z * z
    denom = 1.0 + z2 / trials
    center = (p + z2 / (2.0 * trials)) / denom
    half = z * math.sqrt(p * (1.0 - p) / trials + z2 / (4.0 * trials * trials)) / denom
    return (max(0.0, center - half), min(1.0, center + half))


def _nearest_indices(s_hat, const):
    return np.argmin(np.abs(s_hat[:, None] - const.points[None, :]), axis=1)


def _dedup_candidate_lists(res, final_idx, const):
    """Unique candidate index rows, detected vector first."""
    rows = [tuple(final_idx)]
    seen = {rows[0]}
    for tv in res.tentatives:
        row = tuple(_nearest_indices(tv.vector, const))
        if row not in seen:
            seen.add(row)
            rows.append(row)
    return np.array(rows, dtype=np.int64)


def _run_frame(cfg: SimConfig, frame_idx: int):
    const = build_qpsk()
    code = ConvCode()
    k, n_rx = cfg.n_users, cfg.n_rx
    data_len = cfg.frame_len - cfg.train_len
    nv = snr_to_noise_variance(cfg.snr_db, const, code.rate if cfg.coded else 1.0)
    d_th = cfg.d_th if cfg.d_th_alpha is None else cfg.d_th_alpha * math.sqrt(nv)

    ss = np.random.SeedSequence((cfg.seed, frame_idx))
    ss_chan, ss_noise, ss_sym, ss_il = ss.spawn(4)
    rng_noise = np.random.default_rng(ss_noise)
    rng_sym = np.random.default_rng(ss_sym)

    if cfg.channel == "jakes":
        h_traj = gen_jakes_channel(cfg.frame_len, n_rx, k, cfg.fdt, ss_chan)
        h_at = lambda t: h_traj[t]
    else:
        h_block = gen_block_fading(n_rx, k, np.random.default_rng(ss_chan))
        h_at = lambda t: h_block

    pilot_idx = rng_sym.integers(0, const.size, (cfg.train_len, k))
    pilots = const.points[pilot_idx]
    r_pilots = np.empty((cfg.train_len, n_rx), dtype=complex)
    for t in range(cfg.train_len):
        r_pilots[t] = transmit(h_at(t), pilots[t], nv, rng_noise)

    # channel knowledge for ordering, selection metrics and references
    if cfg.chan_est == "perfect":
        h_det0 = h_at(cfg.train_len)
        chan_est = None
    else:
        h_ls = ls_channel_estimate(r_pilots.T, pilots.T)
        h_det0 = h_ls
        if cfg.chan_est == "ls+rls":
            # seed weight ~ pilot Gram so the tracker continues the LS fit
            chan_est = RlsChannelEstimator(
                h_ls.copy(), lam=cfg.lam, delta=float(cfg.train_len)
            )
        else:
            chan_est = None
    order = column_norm_order(h_det0)

    # data symbol streams
    if cfg.coded:
        n_info = data_len - code.n_tail
        rng_il = np.random.default_rng(ss_il)
        perms = np.array([make_interleaver(2 * data_len, rng_il) for _ in range(k)])
        info = rng_sym.integers(0, 2, (k, n_info))
        tx_idx = np.empty((data_len, k), dtype=np.int64)
        for u in range(k):
            stream = interleave(conv_encode(info[u], code), perms[u])
            pairs = stream.reshape(data_len, 2)
            tx_idx[:, u] = 2 * pairs[:, 0] + pairs[:, 1]
    else:
        tx_idx = rng_sym.integers(0, const.size, (data_len, k))
    tx_syms = const.points[tx_idx]

    # adaptive filter training on the pilot block; soft outputs before each
    # update feed the training-region part of the MSE curve
    mse_curve = np.full(cfg.frame_len, math.nan)
    multibranch = cfg.detector == "amudfcc" and cfg.n_branches > 1
    if cfg.detector in ("dfrls", "amudfcc"):
        if multibranch:
            codebook = branch_codebook(order, cfg.n_branches)
            branch_states = [
                init_filter_states(k, n_rx, cfg.lam, cfg.delta) for _ in codebook
            ]
            for t in range(cfg.train_len):
                for bi, (st, od) in enumerate(zip(branch_states, codebook)):
                    _, u_soft = detect_vector_df(st, r_pilots[t], od, const, pilots=pilots[t])
                    if bi == 0:
                        mse_curve[t] = float(np.sum(np.abs(u_soft - pilots[t]) ** 2))
            states = branch_states[0]
        else:
            states = init_filter_states(k, n_rx, cfg.lam, cfg.delta)
            for t in range(cfg.train_len):
                _, u_soft = detect_vector_df(states, r_pilots[t], order, const, pilots=pilots[t])
                mse_curve[t] = float(np.sum(np.abs(u_soft - pilots[t]) ** 2))

    ml_bank = None
    if cfg.detector == "ml":
        h_fixed = cfg.channel == "block" if cfg.chan_est == "perfect" else cfg.chan_est == "ls"
        if h_fixed:
            ml_bank = MlBank(h_det0, const)

    counter = FlopCounter()
    fires = 0
    sym_err = 0
    bit_err = 0
    inst_idx_rows, inst_metrics = [], []

    for t in range(data_len):
        h_true = h_at(cfg.train_len + t)
        if cfg.chan_est == "perfect":
            h_det = h_true
        elif chan_est is not None:
            h_det = chan_est.h_hat
        else:
            h_det = h_det0
        r = transmit(h_true, tx_syms[t], nv, rng_noise)
        h_snap = np.array(h_det, copy=True) if cfg.coded else h_det

        u_soft = None
        if cfg.detector == "dfrls":
            s_hat, u_soft = detect_vector_df(states, r, order, const, counter=counter)
            if chan_est is not None:
                chan_est.update(s_hat, r, counter)
            res = None
        elif cfg.detector == "amudfcc":
            if multibranch:
                res = multibranch_detect(
                    branch_states, r, h_det, codebook, const, d_th, cfg.m_cand,
                    counter=counter, chan_est=chan_est,
                )
            else:
                res = detect_vector_cc(
                    states, r, h_det, order, const, d_th, cfg.m_cand,
                    counter=counter, chan_est=chan_est,
                )
            s_hat, u_soft = res.s_hat, res.soft
            fires += res.cc_fires
        elif cfg.detector == "vblast":
            s_hat = vblast_detect(r, h_det, const, counter=counter)
            res = None
            if chan_est is not None:
                chan_est.update(s_hat, r, counter)
        else:
            if ml_bank is not None:
                s_hat, _ = ml_bank.detect(r)
            elif cfg.detector == "ml":
                s_hat, _ = ml_exhaustive(r, h_det, const)
            else:
                s_hat = sphere_decode(r, h_det, const).s_hat
            res = None
            if chan_est is not None:
                chan_est.update(s_hat, r, counter)

        idx_hat = _nearest_indices(s_hat, const)
        sym_err += int(np.count_nonzero(idx_hat != tx_idx[t]))
        bit_err += int(
            np.count_nonzero(const.labels[idx_hat] != const.labels[tx_idx[t]])
        )
        if u_soft is not None:
            mse_curve[cfg.train_len + t] = float(np.sum(np.abs(u_soft - tx_syms[t]) ** 2))

        if cfg.coded:
            if res is not None:
                idx_rows = _dedup_candidate_lists(res, idx_hat, const)
            else:
                idx_rows = idx_hat[None, :]
            cands = const.points[idx_rows]
            diffs = r[None, :] - cands @ h_snap.T
            inst_metrics.append(np.sum(np.abs(diffs) ** 2, axis=1))
            inst_idx_rows.append(idx_rows)

    tally = {
        "sym_err": sym_err,
        "n_sym": data_len * k,
        "bit_err": bit_err,
        "n_bits": data_len * k * const.bits_per_symbol,
        "fires": fires,
        "mults": counter.mults,
        "adds": counter.adds,
        "mse_curve": mse_curve,
    }
    if cfg.coded:
        inst_bits = [const.labels[rows] for rows in inst_idx_rows]
        per_iter = idd_run(
            inst_bits, inst_metrics, nv, perms, code, n_iter=cfg.turbo_iters
        )
        tally["info_err"] = np.array(
            [int(np.count_nonzero(hard != info)) for hard in per_iter]
        )
        tally["n_info"] = k * n_info
    return tally


def _frame_star(args):
    return _run_frame(*args)


def _collect_tallies(cfg, jobs):
    cfg.validate()
    tasks = [(cfg, i) for i in range(cfg.n_frames)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_frame_star, tasks, chunksize=8))
    return [_run_frame(cfg, i) for i in range(cfg.n_frames)]


def run_experiment(cfg: SimConfig, jobs: int = 1):
    """Run the configured cell and return one record per reported curve.

    Uncoded runs yield a single record named after the detector; coded runs
    yield one per turbo iteration, tagged detector-idd-itN.
    """
    tallies = _collect_tallies(cfg, jobs)
    data_len = cfg.frame_len - cfg.train_len
    k = cfg.n_users

    sym_err = sum(t["sym_err"] for t in tallies)
    n_sym = sum(t["n_sym"] for t in tallies)
    fires = sum(t["fires"] for t in tallies)
    mults = sum(t["mults"] for t in tallies)
    adds = sum(t["adds"] for t in tallies)

    curve = np.vstack([t["mse_curve"] for t in tallies])
    window = min(STEADY_WINDOW, data_len)
    tail = curve[:, cfg.frame_len - window :]
    mse_final = float(np.mean(tail)) / k if not np.isnan(tail).all() else math.nan

    soft = cfg.detector in ("dfrls", "amudfcc")
    counted = (2.0 * adds + 6.0 * mults) / n_sym if soft or cfg.detector == "vblast" else math.nan
    cc_rate = fires / n_sym if cfg.detector == "amudfcc" else math.nan
    a_flops = analytic_flops_per_symbol(cfg.detector, k, cfg.m_cand)
    ser = sym_err / n_sym

    def record(name, errs, trials):
        lo, hi = wilson_interval(errs, trials)
        return MetricsRecord(
            detector=name, k=k, n_rx=cfg.n_rx, snr_db=cfg.snr_db, fdt=cfg.fdt,
            frames=cfg.n_frames, ber=errs / trials, ber_ci_lo=lo, ber_ci_hi=hi,
            ser=ser, mse_final=mse_final, cc_rate=cc_rate,
            flops_per_symbol=counted, analytic_flops=a_flops, seed=cfg.seed,
        )

    if not cfg.coded:
        bit_err = sum(t["bit_err"] for t in tallies)
        n_bits = sum(t["n_bits"] for t in tallies)
        return [record(cfg.detector, bit_err, n_bits)]

    n_info = sum(t["n_info"] for t in tallies)
    info_err = np.sum([t["info_err"] for t in tallies], axis=0)
    return [
        record(f"{cfg.detector}-idd-it{i + 1}", int(info_err[i]), n_info)
        for i in range(cfg.turbo_iters)
    ]


def mse_curve(cfg: SimConfig, jobs: int = 1):
    """Per-instant MSE averaged over users and frames, training included."""
    if cfg.detector not in ("dfrls", "amudfcc"):
        raise ValueError(f"mse curves need a soft-output detector, got {cfg.detector!r}")
    tallies = _collect_tallies(cfg, jobs)
    curve = np.vstack([t["mse_curve"] for t in tallies])
    return np.mean(curve, axis=0) / cfg.n_users


def _fmt(x):
    if isinstance(x, str):
        return x
    if isinstance(x, (int, np.integer)):
        return str(x)
    if math.isnan(x):
        return "nan"
    return f"{x:.10g}"


def write_csv(records, fh):
    fh.write(CSV_HEADER + "\n")
    for r in records:
        row = [
            r.detector, r.k, r.n_rx, r.snr_db, r.fdt, r.frames, r.ber,
            r.ber_ci_lo, r.ber_ci_hi, r.ser, r.mse_final, r.cc_rate,
            r.flops_per_symbol, r.analytic_flops, r.seed,
        ]
        fh.write(",".join(_fmt(x) for x in row) + "\n")


def write_mse_csv(rows, fh):
    """rows: iterables matching the mse-curve schema."""
    fh.write(MSE_CSV_HEADER + "\n")
    for row in rows:
        fh.write(",".join(_fmt(x) for x in row) + "\n")


def mse_rows(cfg: SimConfig, curve):
    return [
        (cfg.detector, cfg.n_users, cfg.n_rx, cfg.snr_db, cfg.fdt, cfg.n_frames,
         i, float(curve[i]), cfg.train_len, cfg.seed)
        for i in range(curve.size)
    ]
