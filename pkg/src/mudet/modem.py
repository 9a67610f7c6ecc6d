"""QPSK modem primitives: constellation build, bit mapping, hard decisions.

The constellation is represented explicitly (points plus Gray bit labels) so
that detectors, the soft demapper, and the harness agree on one deterministic
point ordering. Point index i carries label bits (b0, b1) with i = 2*b0 + b1;
bit 0 selects the sign of the real part, bit 1 the sign of the imaginary part
(bit value 0 maps to the positive half-plane). All tie-breaks (equidistant
points) resolve to the lowest point index.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "Constellation",
    "build_qpsk",
    "modulate",
    "quantize",
    "quantize_index",
    "nearest_list",
    "hard_bits",
    "draw_symbols",
]


@dataclass(frozen=True)
class Constellation:
    """Complex symbol alphabet with per-point bit labels.

    Attributes
    ----------
    points : (C,) complex128 ndarray
        Constellation points, index order is the tie-break order.
    labels : (C, J) uint8 ndarray
        Gray bit labels; row i labels points[i], most significant bit first.
    symbol_power : float
        Average symbol energy sigma_s^2 = mean(|points|^2).
    is_square_qpsk : bool
        True for the canonical Gray QPSK built by :func:`build_qpsk`; enables
        exact sign-based hard decisions in hot loops.
    """

    points: np.ndarray
    labels: np.ndarray
    symbol_power: float
    is_square_qpsk: bool = False

    @property
    def size(self) -> int:
        return int(self.points.size)

    @property
    def bits_per_symbol(self) -> int:
        return int(self.labels.shape[1])


def build_qpsk(symbol_power: float = 1.0) -> Constellation:
    """Build the Gray-labelled QPSK alphabet with the given average energy.

    Points sit at (+-sigma_s/sqrt(2)) +- j(sigma_s/sqrt(2)); adjacent points
    (90 degrees apart) differ in exactly one label bit.
    """
    if symbol_power <= 0:
        raise ValueError(f"symbol_power must be positive, got {symbol_power}")
    a = np.sqrt(symbol_power / 2.0)
    points = np.array([a + 1j * a, a - 1j * a, -a + 1j * a, -a - 1j * a])
    labels = np.array([[0, 0], [0, 1], [1, 0], [1, 1]], dtype=np.uint8)
    return Constellation(points, labels, float(symbol_power), True)


def modulate(bits: np.ndarray, const: Constellation) -> np.ndarray:
    """Map a flat bit array (length divisible by J) onto symbols.

    Bits are consumed J at a time, most significant first, and looked up by
    label value, so ``modulate(labels[i], const) == points[i]``.
    """
    bits = np.asarray(bits)
    j = const.bits_per_symbol
    if bits.ndim != 1 or bits.size % j:
        raise ValueError(f"bit array length {bits.size} is not a multiple of {j}")
    if bits.size and (bits.min() < 0 or bits.max() > 1):
        raise ValueError("bits must be 0/1 valued")
    weights = 1 << np.arange(j - 1, -1, -1)
    idx = bits.reshape(-1, j) @ weights
    return const.points[idx]


def quantize_index(u, const: Constellation):
    """Index of the nearest constellation point (lowest index on ties)."""
    u = np.asarray(u)
    if const.is_square_qpsk:
        # Sign decision; boundary (coordinate exactly 0) falls on the positive
        # side, matching the generic argmin-first tie-break below.
        idx = 2 * (u.real < 0).astype(np.intp) + (u.imag < 0)
        return idx if idx.ndim else idx[()]
    d = np.abs(u[..., None] - const.points)
    idx = np.argmin(d, axis=-1)
    return idx if idx.ndim else idx[()]


def quantize(u, const: Constellation):
    """Nearest constellation point and its index, Q(u) of the hard slicer."""
    idx = quantize_index(u, const)
    return const.points[idx], idx


def nearest_list(u: complex, const: Constellation, m: int) -> np.ndarray:
    """Indices of the m nearest points to u, by increasing distance.

    Equidistant points keep ascending index order (stable sort), so the list
    head always agrees with :func:`quantize`.
    """
    if not 1 <= m <= const.size:
        raise ValueError(f"list size m={m} outside [1, {const.size}]")
    d = np.abs(np.asarray(u) - const.points)
    return np.argsort(d, kind="stable")[:m]


def hard_bits(symbols, const: Constellation) -> np.ndarray:
    """Hard-decision bit labels of (possibly noisy) symbols, flattened."""
    idx = quantize_index(np.asarray(symbols).reshape(-1), const)
    return const.labels[idx].reshape(-1)


def draw_symbols(const: Constellation, size, rng: np.random.Generator):
    """Uniform random symbols and their bit labels; returns (symbols, bits)."""
    idx = rng.integers(0, const.size, size=size)
    return const.points[idx], const.labels[idx.reshape(-1)].reshape(-1)
