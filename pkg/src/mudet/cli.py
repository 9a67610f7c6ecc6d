"""Command-line front end for the Monte-Carlo harness.

Every flag can also be supplied through a plain ``key = value`` config file
(--config); explicit flags win over the file, the file wins over built-in
defaults.  BER cells should run long enough to collect at least 100 bit
errors for the Wilson intervals to be meaningful.
"""

import argparse
import sys

import numpy as np

from .harness import (
    DETECTORS,
    SimConfig,
    analytic_complexity,
    mse_curve,
    mse_rows,
    run_experiment,
    write_csv,
    write_mse_csv,
)

# flag spelling -> argparse dest
FLAG_DESTS = {
    "users": "users",
    "rx": "rx",
    "detector": "detector",
    "channel": "channel",
    "fd-ts": "fd_ts",
    "snr-db": "snr_db",
    "frames": "frames",
    "frame-len": "frame_len",
    "train-len": "train_len",
    "lambda": "lam",
    "delta": "delta",
    "dth": "dth",
    "dth-alpha": "dth_alpha",
    "candidates": "candidates",
    "branches": "branches",
    "coded": "coded",
    "turbo-iters": "turbo_iters",
    "seed": "seed",
    "out": "out",
    "chan-est": "chan_est",
    "jobs": "jobs",
}


def _parse_bool(raw):
    if isinstance(raw, bool):
        return raw
    low = str(raw).strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {raw!r}")


def _parse_snr_values(raw):
    """Single value or an inclusive a:step:b range."""
    raw = str(raw)
    if ":" in raw:
        parts = raw.split(":")
        if len(parts) != 3:
            raise ValueError(f"snr range must be a:step:b, got {raw!r}")
        a, step, b = (float(p) for p in parts)
        if step <= 0:
            raise ValueError("snr range step must be positive")
        return [float(x) for x in np.arange(a, b + step / 2, step)]
    return [float(x) for x in raw.split(",")]


def _int_list(raw):
    return [int(x) for x in str(raw).split(",")]


def _float_list(raw):
    return [float(x) for x in str(raw).split(",")]


def _str_list(raw):
    return [x.strip() for x in str(raw).split(",") if x.strip()]


def load_config_file(path):
    vals = {}
    with open(path, encoding="utf-8") as fh:
        for ln, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{ln}: expected 'key = value', got {line!r}")
            key, val = (p.strip() for p in line.split("=", 1))
            key = key.replace("_", "-")
            if key not in FLAG_DESTS:
                raise ValueError(f"{path}:{ln}: unknown config key {key!r}")
            vals[key] = val
    return vals


def _add_common(sp):
    sp.add_argument("--users", help="user count K, or comma list for sweeps")
    sp.add_argument("--rx", help="receive antennas; defaults to K")
    sp.add_argument("--detector", help=f"comma list from {','.join(DETECTORS)}")
    sp.add_argument("--channel", help="block or jakes")
    sp.add_argument("--fd-ts", dest="fd_ts", help="normalized Doppler(s), comma list")
    sp.add_argument("--snr-db", dest="snr_db", help="Eb/N0 in dB, single or a:step:b")
    sp.add_argument("--frames", help="Monte-Carlo frames per cell")
    sp.add_argument("--frame-len", dest="frame_len", help="vectors per frame incl. training")
    sp.add_argument("--train-len", dest="train_len", help="training vectors per frame")
    sp.add_argument("--lambda", dest="lam", help="RLS forgetting factor")
    sp.add_argument("--delta", help="RLS regularization")
    sp.add_argument("--dth", help="reliability distance threshold")
    sp.add_argument("--dth-alpha", dest="dth_alpha", help="noise-scaled threshold factor")
    sp.add_argument("--candidates", help="CC candidate count M")
    sp.add_argument("--branches", help="detection-order branches L")
    sp.add_argument("--coded", action="store_true", default=None, help="rate-1/2 coded frames with IDD")
    sp.add_argument("--turbo-iters", dest="turbo_iters", help="IDD iterations")
    sp.add_argument("--seed", help="master seed")
    sp.add_argument("--out", help="output CSV path, - for stdout")
    sp.add_argument("--chan-est", dest="chan_est", help="perfect, ls, or ls+rls")
    sp.add_argument("--jobs", help="worker processes")
    sp.add_argument("--config", help="key = value file mirroring the flags")


def _resolve(args):
    file_vals = load_config_file(args.config) if args.config else {}
    merged = {}
    for flag, dest in FLAG_DESTS.items():
        cli_val = getattr(args, dest, None)
        merged[dest] = cli_val if cli_val is not None else file_vals.get(flag)
    return merged


def _get(merged, dest, default, conv):
    raw = merged.get(dest)
    if raw is None:
        return default
    return conv(raw)


def _build_cfg(merged, detector, k, nr, snr, fdt, channel_default="block"):
    return SimConfig(
        detector=detector,
        n_users=k,
        n_rx=nr,
        snr_db=snr,
        channel=_get(merged, "channel", channel_default, str),
        fdt=fdt,
        chan_est=_get(merged, "chan_est", "ls", str),
        n_frames=_get(merged, "frames", 100, int),
        frame_len=_get(merged, "frame_len", 500, int),
        train_len=_get(merged, "train_len", 10, int),
        lam=_get(merged, "lam", 0.998, float),
        delta=_get(merged, "delta", 0.01, float),
        d_th=_get(merged, "dth", 0.5, float),
        d_th_alpha=_get(merged, "dth_alpha", None, float),
        m_cand=_get(merged, "candidates", 4, int),
        n_branches=_get(merged, "branches", 1, int),
        coded=_get(merged, "coded", False, _parse_bool),
        turbo_iters=_get(merged, "turbo_iters", 3, int),
        seed=_get(merged, "seed", 1, int),
    )


def _open_out(merged):
    path = _get(merged, "out", "-", str)
    if path == "-":
        return sys.stdout, False
    return open(path, "w", encoding="utf-8", newline="\n"), True


def _run_cells(merged, cells):
    jobs = _get(merged, "jobs", 1, int)
    records = []
    for cfg in cells:
        records.extend(run_experiment(cfg, jobs=jobs))
    fh, close = _open_out(merged)
    try:
        write_csv(records, fh)
    finally:
        if close:
            fh.close()
    return 0


def _cmd_ber_vs_users(args):
    merged = _resolve(args)
    ks = _get(merged, "users", [2, 4, 8], _int_list)
    rx = _get(merged, "rx", None, int)
    dets = _get(merged, "detector", ["dfrls", "amudfcc", "sd"], _str_list)
    snrs = _get(merged, "snr_db", [13.0], _parse_snr_values)
    fdt = _get(merged, "fd_ts", [0.0], _float_list)[0]
    cells = [
        _build_cfg(merged, det, k, rx if rx is not None else k, snrs[0], fdt)
        for k in ks
        for det in dets
    ]
    return _run_cells(merged, cells)


def _cmd_ber_vs_snr(args):
    merged = _resolve(args)
    k = _get(merged, "users", [4], _int_list)[0]
    rx = _get(merged, "rx", k, int)
    dets = _get(merged, "detector", ["dfrls", "amudfcc"], _str_list)
    snrs = _get(merged, "snr_db", [float(x) for x in range(4, 15, 2)], _parse_snr_values)
    fdt = _get(merged, "fd_ts", [0.0], _float_list)[0]
    cells = [_build_cfg(merged, det, k, rx, snr, fdt) for snr in snrs for det in dets]
    return _run_cells(merged, cells)


def _cmd_mse_curve(args):
    merged = _resolve(args)
    k = _get(merged, "users", [4], _int_list)[0]
    rx = _get(merged, "rx", k, int)
    dets = _get(merged, "detector", ["dfrls", "amudfcc"], _str_list)
    snrs = _get(merged, "snr_db", [14.0], _parse_snr_values)
    fdts = _get(merged, "fd_ts", [1e-3], _float_list)
    jobs = _get(merged, "jobs", 1, int)
    rows = []
    for fdt in fdts:
        for det in dets:
            cfg = _build_cfg(merged, det, k, rx, snrs[0], fdt, channel_default="jakes")
            rows.extend(mse_rows(cfg, mse_curve(cfg, jobs=jobs)))
    fh, close = _open_out(merged)
    try:
        write_mse_csv(rows, fh)
    finally:
        if close:
            fh.close()
    return 0


def _cmd_complexity(args):
    merged = _resolve(args)
    ks = _get(merged, "users", [2, 4, 8], _int_list)
    m = _get(merged, "candidates", 4, int)
    fh, close = _open_out(merged)
    try:
        fh.write("K,M,vblast,dfrls,cc_overhead_worst,cc_overhead_itemized\n")
        for k in ks:
            c = analytic_complexity(k, m)
            fh.write(
                f"{k},{m},{c['vblast']:.10g},{c['dfrls']:.10g},"
                f"{c['cc_overhead_worst']:.10g},{c['cc_overhead_itemized']:.10g}\n"
            )
    finally:
        if close:
            fh.close()
    return 0


def quick_validate():
    """Fast self-checks mirroring the offline oracle suites."""
    import io

    from .ccdet import reliability_check
    from .channel import gen_block_fading, transmit
    from .dfdet import FilterState, rls_step
    from .idd import conv_encode
    from .modem import build_qpsk, draw_symbols
    from .refdet import ml_exhaustive, sphere_decode

    const = build_qpsk()
    checks = []

    rng = np.random.default_rng(1)
    lam, delta, n = 0.998, 0.01, 4
    st = FilterState.initial(n, lam, delta)
    xs, ds = [], []
    for _ in range(60):
        x = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        d = complex(rng.standard_normal() + 1j * rng.standard_normal())
        rls_step(st, x, d)
        xs.append(x)
        ds.append(d)
    i = len(xs)
    phi = delta * lam**i * np.eye(n, dtype=complex)
    rhs = np.zeros(n, dtype=complex)
    for tau, (x, d) in enumerate(zip(xs, ds)):
        w = lam ** (i - 1 - tau)
        phi += w * np.outer(x, x.conj())
        rhs += w * x * np.conj(d)
    direct = np.linalg.solve(phi, rhs)
    rel = np.linalg.norm(st.weights - direct) / np.linalg.norm(direct)
    checks.append(("rls-direct-solve", rel < 1e-8, f"rel={rel:.2e}"))

    rng = np.random.default_rng(2)
    agree = True
    for _ in range(200):
        h = gen_block_fading(3, 3, rng)
        s, _ = draw_symbols(const, 3, rng)
        r = transmit(h, s, 0.2, rng)
        if not np.array_equal(sphere_decode(r, h, const).s_hat, ml_exhaustive(r, h, const)[0]):
            agree = False
            break
    checks.append(("sphere-equals-ml", agree, "200 instances, K=3"))

    rng = np.random.default_rng(3)
    t = np.sqrt(const.symbol_power / 2)
    ok = True
    for u in (rng.standard_normal(20000) + 1j * rng.standard_normal(20000)) * 1.2:
        inside = abs(u.real) <= t and abs(u.imag) <= t
        if inside:
            unrel = min(abs(u - p) for p in const.points) > 0.5
        else:
            unrel = min(abs(u.real), abs(u.imag)) < t - 0.5
        if reliability_check(u, const, 0.5) != (not unrel):
            ok = False
            break
    checks.append(("cc-geometry", ok, "20000 points, d_th=0.5"))

    frozen = np.array_equal(conv_encode([1, 0, 0]), [1, 1, 1, 0, 1, 1, 0, 0, 0, 0])
    checks.append(("codec-frozen-vector", frozen, "input 100"))

    ok = True
    detail = ""
    for det in DETECTORS:
        cfg = SimConfig(
            detector=det, n_users=2, n_rx=2, snr_db=float("inf"),
            chan_est="perfect", n_frames=3, frame_len=40, train_len=10, seed=7,
        )
        rec = run_experiment(cfg)[0]
        if rec.ber != 0.0:
            ok = False
            detail = f"{det} ber={rec.ber}"
            break
    checks.append(("noise-free-ber-zero", ok, detail or "5 detectors, 3 frames"))

    cfg = SimConfig(detector="amudfcc", n_users=2, n_rx=2, snr_db=10.0,
                    n_frames=2, frame_len=60, train_len=10, seed=11)
    buf_a, buf_b = io.StringIO(), io.StringIO()
    write_csv(run_experiment(cfg), buf_a)
    write_csv(run_experiment(cfg), buf_b)
    checks.append(("csv-determinism", buf_a.getvalue() == buf_b.getvalue(), "same seed twice"))
    return checks


def _cmd_validate(args):
    checks = quick_validate()
    failed = 0
    for name, ok, detail in checks:
        if ok:
            print(f"PASS {name} ({detail})")
        else:
            print(f"FAIL {name}: {detail}")
            failed += 1
    return 1 if failed else 0


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="mudet",
        description="Multi-user MIMO detection Monte-Carlo harness.",
        epilog="Aim for at least 100 bit errors per cell for stable BER estimates.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn, doc in (
        ("ber-vs-users", _cmd_ber_vs_users, "BER across user counts at one SNR"),
        ("ber-vs-snr", _cmd_ber_vs_snr, "BER across an SNR sweep at one user count"),
        ("mse-curve", _cmd_mse_curve, "symbol-estimation MSE against time"),
        ("complexity", _cmd_complexity, "analytic multiplication counts"),
        ("validate", _cmd_validate, "run the fast self-check suite"),
    ):
        sp = sub.add_parser(name, help=doc)
        _add_common(sp)
        sp.set_defaults(fn=fn)
    args = parser.parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
