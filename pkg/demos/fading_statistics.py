"""
Checking the fading generator against theory
============================================

A sum-of-sinusoids simulator should produce a complex gain whose
autocorrelation follows the zeroth-order Bessel function J0(2 pi f_dT tau)
and whose envelope is Rayleigh.  Both are checked here from one long
realization per Doppler rate.
"""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
from scipy.special import j0

from mudet.channel import gen_jakes_sequence, sample_autocorrelation

fig, axes = plt.subplots(1, 2, figsize=(9, 3.6))

lags = np.arange(151)
for fdt in (1e-3, 5e-3):
    rng = np.random.default_rng(7)
    x = gen_jakes_sequence(fdt, 400_000, rng)
    got = sample_autocorrelation(x, 150).real
    want = j0(2 * np.pi * fdt * lags)
    worst = np.abs(got - want).max()
    print(f"f_dT = {fdt}: worst autocorrelation deviation {worst:.4f}")
    axes[0].plot(lags, got, lw=1.0, label=f"sample, f_dT={fdt}")
    axes[0].plot(lags, want, "k--", lw=0.7)

axes[0].set_xlabel("lag (symbols)")
axes[0].set_ylabel("Re autocorrelation")
axes[0].legend(fontsize=8)
axes[0].set_title("dashed: J0(2 pi f_dT tau)")

# envelope distribution from the last realization
env = np.abs(x)
axes[1].hist(env, bins=80, density=True, alpha=0.6)
a = np.linspace(0, env.max(), 300)
axes[1].plot(a, 2 * a * np.exp(-(a**2)), "k-", lw=1.0)
axes[1].set_xlabel("|h|")
axes[1].set_title("envelope vs Rayleigh density")
print(f"mean power {np.mean(env**2):.4f} (target 1.0)")

fig.tight_layout()
out = "demos/output/fading_statistics.png"
fig.savefig(out, dpi=130)
print(f"wrote {out}")
