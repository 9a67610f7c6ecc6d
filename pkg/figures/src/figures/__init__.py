"""CSV-to-figure pipeline for the detection harness results.

The package reads the harness CSV contract (never the simulator itself)
and renders the standard figure shapes: BER against user count or SNR,
arithmetic cost against user count, and symbol MSE against iteration.
"""

from .plotting import EmptyInputError, FigureSpec, KINDS, SchemaError, make_figure, plot

__all__ = [
    "EmptyInputError",
    "FigureSpec",
    "KINDS",
    "SchemaError",
    "make_figure",
    "plot",
]
