"""Kernel-level complex-operation accounting.

Detectors report cost by calling one counter method per linear-algebra kernel
they actually execute. Each primitive increments complex multiplications and
additions by a fixed documented amount; the FLOP figure weights one complex
addition as 2 and one complex multiplication as 6 real floating-point
operations. Divisions are counted as multiplications; comparisons and
bookkeeping are not counted.

Primitive conventions (m, n = operand dimensions):

==============  ==========================  =============
kernel          multiplications             additions
==============  ==========================  =============
matvec(m, n)    m*n                         m*(n-1)
dot(n)          n                           n-1
outer(m, n)     m*n                         0
scale(n)        n                           0
axpy(n)         n                           n
addv(n)         0                           n
norm_sq(n)      n                           n-1
inv(n)          n**3                        n**3
==============  ==========================  =============
"""

from __future__ import annotations

ADD_WEIGHT = 2
MUL_WEIGHT = 6


class FlopCounter:
    """Accumulates complex multiply/add counts at kernel granularity."""

    __slots__ = ("mults", "adds")

    def __init__(self):
        self.mults = 0
        self.adds = 0

    # ------------------------------------------------------------------
    # primitives
    # ------------------------------------------------------------------
    def matvec(self, m: int, n: int):
        self.mults += m * n
        self.adds += m * (n - 1)

    def dot(self, n: int):
        self.mults += n
        self.adds += n - 1

    def outer(self, m: int, n: int):
        self.mults += m * n

    def scale(self, n: int):
        self.mults += n

    def axpy(self, n: int):
        self.mults += n
        self.adds += n

    def addv(self, n: int):
        self.adds += n

    def norm_sq(self, n: int):
        self.mults += n
        self.adds += n - 1

    def inv(self, n: int):
        self.mults += n**3
        self.adds += n**3

    # ------------------------------------------------------------------
    # composite counts, written as the primitive sequence the kernels run
    # ------------------------------------------------------------------
    def count_filter_output(self, n: int):
        """u = w^H x."""
        self.dot(n)

    def count_quantize(self, c: int):
        """Distances to all c points; comparisons are free."""
        self.scale(c)

    def count_rls_step(self, n: int):
        """Full RLS update on an n-tap filter.

        Closed form: 4n^2 + 4n multiplications, 3n^2 + 2n additions.
        """
        self.matvec(n, n)            # q = P x
        self.dot(n)                  # x^H q
        self.addv(1)                 # lam + (.)
        self.scale(n)                # gain g = q / denom
        self.dot(n)                  # w^H x
        self.addv(1)                 # a-priori error
        self.axpy(n)                 # w += g * conj(xi)
        self.outer(n, n)             # g q^H
        self.addv(n * n)             # P - (.)
        self.scale(n * n)            # / lam
        self.addv(n * n)             # P + P^H
        self.scale(n * n)            # * 0.5

    def count_metric(self, m: int, k: int):
        """||r - H b||^2: m*k + m mults, m*k + m - 1 adds."""
        self.matvec(m, k)
        self.addv(m)
        self.norm_sq(m)

    def count_channel_rls(self, k: int, m: int):
        """Channel-matrix RLS update, k users, m receive antennas.

        Closed form: 4k^2 + 2k + 2mk mults, 3k^2 + 2mk adds.
        """
        self.matvec(k, k)            # q = P s
        self.dot(k)                  # s^H q
        self.addv(1)                 # lam + (.)
        self.scale(k)                # gain
        self.matvec(m, k)            # H s
        self.addv(m)                 # innovation e = r - H s
        self.outer(m, k)             # e g^H
        self.addv(m * k)             # H += (.)
        self.outer(k, k)             # g q^H
        self.addv(k * k)             # P - (.)
        self.scale(k * k)            # / lam
        self.addv(k * k)             # P + P^H
        self.scale(k * k)            # * 0.5

    def count_vblast_stage(self, m: int, kp: int, c: int):
        """One nulling/cancel stage with kp live users, m antennas."""
        self.outer(kp, kp)
        self.mults += kp * kp * (m - 1)  # Gram product H'^H H'
        self.adds += kp * kp * (m - 1)
        self.inv(kp)                 # Gram inverse
        self.matvec(m, kp)           # w = H' ginv_col
        self.dot(m)                  # u = w^H r
        self.axpy(m)                 # residual cancel
        self.count_quantize(c)

    # ------------------------------------------------------------------
    @property
    def flops(self) -> int:
        return ADD_WEIGHT * self.adds + MUL_WEIGHT * self.mults

    def merge(self, other: "FlopCounter"):
        self.mults += other.mults
        self.adds += other.adds

    def reset(self):
        self.mults = 0
        self.adds = 0

    def __repr__(self):
        return f"FlopCounter(mults={self.mults}, adds={self.adds}, flops={self.flops})"
