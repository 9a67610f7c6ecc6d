"""Reference detectors: V-BLAST (ZF-SIC), exhaustive ML, sphere decoder.

All three take the channel matrix as known (an estimate or the truth) and
detect one received vector at a time. The sphere decoder is exact: it returns
the same symbol vector as exhaustive maximum likelihood, found by depth-first
search with best-first (Schnorr-Euchner) child ordering and radius shrinking,
seeded with the V-BLAST solution.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .dfdet import column_norm_order
from .modem import Constellation, quantize

__all__ = ["vblast_detect", "ml_exhaustive", "MlBank", "sphere_decode", "SphereResult"]

_ML_CANDIDATE_LIMIT = 1_000_000
_index_grid_cache: dict = {}


def _index_grid(c: int, k: int) -> np.ndarray:
    """(c**k, k) grid of point indices, lexicographic, user 0 most significant."""
    key = (c, k)
    grid = _index_grid_cache.get(key)
    if grid is None:
        n = c**k
        shifts = c ** np.arange(k - 1, -1, -1)
        grid = (np.arange(n)[:, None] // shifts) % c
        _index_grid_cache[key] = grid
    return grid


def _zf_sic(r, h, const: Constellation, counter=None):
    """Zero-forcing nulling + cancellation in column-norm order.

    Returns decisions and their point indices, both in user order.
    """
    h = np.asarray(h)
    m, k = h.shape
    order = column_norm_order(h)
    residual = np.array(r, dtype=complex)
    s_hat = np.empty(k, dtype=complex)
    idx = np.empty(k, dtype=np.intp)
    for stage in range(k):
        cols = order[stage:]
        hrem = h[:, cols]
        gram = hrem.conj().T @ hrem
        try:
            ginv = np.linalg.inv(gram)
        except np.linalg.LinAlgError as exc:
            raise ValueError(f"channel matrix is rank deficient at stage {stage}") from exc
        w = hrem @ ginv[:, 0]
        u = np.vdot(w, residual)
        pt, ci = quantize(u, const)
        user = order[stage]
        s_hat[user] = pt
        idx[user] = ci
        residual -= h[:, user] * pt
        if counter is not None:
            counter.count_vblast_stage(m, len(cols), const.size)
    return s_hat, idx


def vblast_detect(r, h, const: Constellation, counter=None) -> np.ndarray:
    """V-BLAST detection: ZF nulling, column-norm ordering, successive cancel."""
    return _zf_sic(r, h, const, counter)[0]


class MlBank:
    """Precomputed candidate images for repeated ML detection under one H.

    Builds the full candidate list once (lexicographic in point indices, so
    argmin tie-breaks resolve to the lexicographically smallest index vector)
    and scores each received vector with a single vectorized pass.
    """

    def __init__(self, h, const: Constellation):
        h = np.asarray(h)
        self.k = h.shape[1]
        c = const.size
        if c**self.k > _ML_CANDIDATE_LIMIT:
            raise ValueError(
                f"exhaustive search over {c}**{self.k} candidates exceeds the "
                f"{_ML_CANDIDATE_LIMIT} safety limit"
            )
        grid = _index_grid(c, self.k)
        self.candidates = const.points[grid]
        self.images = self.candidates @ h.T

    def detect(self, r):
        """Returns (s_hat, metric) minimizing ||r - H s||^2."""
        d = np.abs(self.images - np.asarray(r)[None, :]) ** 2
        metrics = d.sum(axis=1)
        j = int(np.argmin(metrics))
        return self.candidates[j].copy(), float(metrics[j])


def ml_exhaustive(r, h, const: Constellation):
    """Exact maximum-likelihood detection by enumerating all |A|^K vectors."""
    return MlBank(h, const).detect(r)


class SphereResult(NamedTuple):
    s_hat: np.ndarray
    metric: float
    nodes_visited: int


def sphere_decode(r, h, const: Constellation) -> SphereResult:
    """Depth-first sphere decoding, exact ML output.

    QR-reduces the channel (diagonal rotated real-positive), seeds the search
    radius with the V-BLAST candidate, enumerates children best-first per
    level, and prunes on the shrinking radius. The reported metric is
    recomputed as ||r - H s||^2, the same expression exhaustive ML uses.
    """
    h = np.asarray(h)
    m, k = h.shape
    if m < k:
        raise ValueError(f"need at least as many rx antennas as users, got {m} < {k}")
    q, rmat = np.linalg.qr(h)
    diag = np.diagonal(rmat)
    hscale = np.max(np.abs(diag)) if k else 0.0
    if hscale == 0.0 or np.min(np.abs(diag)) < 1e-12 * hscale:
        raise ValueError("channel matrix is rank deficient")
    phase = (diag / np.abs(diag)).conj()
    rmat = rmat * phase[:, None]
    y = phase * (q.conj().T @ np.asarray(r))

    s_init, idx_init = _zf_sic(r, h, const)
    bestdist = float(np.sum(np.abs(y - rmat @ s_init) ** 2))

    pts = [complex(p) for p in const.points]
    rrows = [[complex(v) for v in row] for row in rmat]
    yl = [complex(v) for v in y]
    best_idx = list(idx_init)
    sym = [0j] * k
    idx = [0] * k
    state = {"best": bestdist, "nodes": 0}

    def descend(level: int, dist: float):
        acc = yl[level]
        row = rrows[level]
        for j in range(level + 1, k):
            acc -= row[j] * sym[j]
        rkk = row[level]
        children = sorted(
            (abs(acc - rkk * p) ** 2, ci) for ci, p in enumerate(pts)
        )
        for inc, ci in children:
            nd = dist + inc
            if nd >= state["best"]:
                break  # children are sorted, the rest only get worse
            state["nodes"] += 1
            sym[level] = pts[ci]
            idx[level] = ci
            if level == 0:
                state["best"] = nd
                best_idx[:] = idx
            else:
                descend(level - 1, nd)

    descend(k - 1, 0.0)
    s_hat = np.asarray(const.points)[best_idx]
    metric = float(np.sum(np.abs(np.asarray(r) - h @ s_hat) ** 2))
    return SphereResult(s_hat, metric, state["nodes"])
