"""Rendering of the four standard figure kinds from result CSVs.

Every kind draws one curve per distinct `detector` value, in sorted
order so legends and colors are stable across runs. Values that cannot
sit on the requested axes (nan, or nonpositive on a log scale) are
dropped point-wise; a detector whose points all drop contributes no
curve.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import matplotlib.pyplot as plt


class SchemaError(ValueError):
    """A required CSV column is absent."""


class EmptyInputError(ValueError):
    """The inputs supplied no plottable data."""


@dataclass(frozen=True)
class AxesSpec:
    x: str
    y: str
    xlabel: str
    ylabel: str


KINDS = {
    "ber_vs_users": AxesSpec("K", "ber", "number of users K", "BER"),
    "flops_vs_users": AxesSpec(
        "K", "flops_per_symbol", "number of users K", "FLOPs per detected symbol"
    ),
    "ber_vs_snr": AxesSpec("snr_db", "ber", "Eb/N0 (dB)", "BER"),
    "mse_vs_iter": AxesSpec("iteration", "mse", "iteration (symbol instant)", "symbol MSE"),
}


@dataclass(frozen=True)
class FigureSpec:
    """What to draw: figure kind, input CSVs, output path, axis scales."""

    kind: str
    inputs: tuple
    out: str
    logx: bool = False
    logy: bool = True
    dpi: int = 150

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown figure kind {self.kind!r}; known: {sorted(KINDS)}")
        if not self.inputs:
            raise ValueError("at least one input CSV is required")


def required_columns(kind: str) -> set:
    ax = KINDS[kind]
    cols = {"detector", ax.x, ax.y}
    if kind == "mse_vs_iter":
        cols.add("train_len")
    return cols


def read_table(spec: FigureSpec) -> list:
    """Concatenated rows of all input CSVs, schema-checked per file."""
    need = required_columns(spec.kind)
    rows = []
    for path in spec.inputs:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None:
                raise EmptyInputError(f"{path}: file is empty (no header row)")
            missing = sorted(need - set(reader.fieldnames))
            if missing:
                raise SchemaError(
                    f"{path}: missing column(s) {', '.join(missing)} "
                    f"required by {spec.kind}"
                )
            rows.extend(reader)
    if not rows:
        joined = ", ".join(str(p) for p in spec.inputs)
        raise EmptyInputError(f"no data rows in: {joined}")
    return rows


def _series(rows, xcol: str, ycol: str, logy: bool) -> dict:
    by_det: dict = {}
    for row in rows:
        by_det.setdefault(row["detector"], []).append(
            (float(row[xcol]), float(row[ycol]))
        )
    series = {}
    for det in sorted(by_det):
        pts = [
            (x, y)
            for x, y in sorted(by_det[det])
            if math.isfinite(y) and (not logy or y > 0)
        ]
        if pts:
            series[det] = ([p[0] for p in pts], [p[1] for p in pts])
    return series


def make_figure(spec: FigureSpec, rows=None):
    """Build (fig, ax) without touching the filesystem (rows may be preloaded)."""
    if rows is None:
        rows = read_table(spec)
    axspec = KINDS[spec.kind]
    series = _series(rows, axspec.x, axspec.y, spec.logy)
    if not series:
        raise EmptyInputError(
            f"no finite {axspec.y} values to plot for {spec.kind}"
        )

    fig, ax = plt.subplots(figsize=(6.0, 4.2))
    if spec.logy:
        ax.set_yscale("log")
    if spec.logx:
        ax.set_xscale("log")
    for det, (xs, ys) in series.items():
        ax.plot(xs, ys, marker="o", ms=4, lw=1.1, label=det)

    if spec.kind == "mse_vs_iter":
        switches = sorted({float(row["train_len"]) for row in rows})
        for sw in switches:
            ax.axvline(sw, color="k", ls=":", lw=0.9)
    if spec.kind.endswith("_vs_users") and not spec.logx:
        ticks = sorted({x for xs, _ in series.values() for x in xs})
        ax.set_xticks(ticks)

    ax.set_xlabel(axspec.xlabel)
    ax.set_ylabel(axspec.ylabel)
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    fig.tight_layout()
    return fig, ax


def plot(spec: FigureSpec) -> Path:
    """Render the requested figure and write the image; returns the path."""
    fig, _ = make_figure(spec)
    out = Path(spec.out)
    if out.parent != Path(""):
        out.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out, dpi=spec.dpi)
    plt.close(fig)
    return out
