"""Small Monte-Carlo comparison of all detectors at one operating point.

Runs each detector through the same frames (same seed, so the channel
and noise realizations match) and prints BER with its confidence
interval plus the measured arithmetic cost.  Also writes the results in
the CSV layout the plotting tools consume.

Frame counts are kept small here; expect wide intervals.  The point is
the ranking, not publication-grade numbers.
"""

import numpy as np

from mudet.harness import SimConfig, run_experiment, write_csv

records = []
for det in ("vblast", "dfrls", "amudfcc", "sd"):
    cfg = SimConfig(
        detector=det,
        n_users=4,
        n_rx=4,
        snr_db=12.0,
        n_frames=80,
        frame_len=300,
        seed=5,
    )
    records.extend(run_experiment(cfg))

print(f"{'detector':10s} {'BER':>10s} {'95% interval':>24s} {'flops/sym':>10s}")
for rec in records:
    fl = "-" if np.isnan(rec.flops_per_symbol) else f"{rec.flops_per_symbol:.0f}"
    print(
        f"{rec.detector:10s} {rec.ber:10.3e} "
        f"[{rec.ber_ci_lo:.3e}, {rec.ber_ci_hi:.3e}] {fl:>10s}"
    )

out = "demos/output/detector_shootout.csv"
with open(out, "w", encoding="utf-8") as fh:
    write_csv(records, fh)
print(f"wrote {out}")
