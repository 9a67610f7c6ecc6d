"""
Where does the detector stop trusting its own decisions?
========================================================

The constraint detector watches each soft estimate u and asks whether
it sits in a trustworthy part of the complex plane.  Inside the square
spanned by the four QPSK points a decision is suspect when u is more
than d_th away from the nearest point.  Outside the square the danger
zone is different: a large estimate is fine as long as it commits to a
quadrant, so only the band hugging the decision axes (within
sigma_s/sqrt(2) - d_th of either axis) is flagged.

This script paints that geometry by brute force classification.
"""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from mudet.ccdet import reliability_check
from mudet.modem import build_qpsk

const = build_qpsk()
d_th = 0.5

grid = np.linspace(-1.8, 1.8, 481)
re, im = np.meshgrid(grid, grid)
pts = re + 1j * im

flags = np.fromiter(
    (reliability_check(complex(u), const, d_th) for u in pts.ravel()),
    dtype=bool,
    count=pts.size,
).reshape(pts.shape)

frac = 1.0 - flags.mean()
print(f"d_th = {d_th}: {frac:.1%} of the plotted window is flagged unreliable")

fig, ax = plt.subplots(figsize=(5.2, 5))
ax.pcolormesh(grid, grid, flags, cmap="RdYlGn", shading="auto", alpha=0.55)
ax.scatter(const.points.real, const.points.imag, c="k", marker="x", s=60, zorder=3)
t = np.sqrt(const.symbol_power / 2)
ax.add_patch(
    plt.Rectangle((-t, -t), 2 * t, 2 * t, fill=False, ls="--", ec="k", lw=0.8)
)
ax.set_xlabel("Re(u)")
ax.set_ylabel("Im(u)")
ax.set_title(f"Reliable (green) vs unreliable (red), d_th = {d_th}")
ax.set_aspect("equal")
fig.tight_layout()
out = "demos/output/reliability_regions.png"
fig.savefig(out, dpi=130)
print(f"wrote {out}")
