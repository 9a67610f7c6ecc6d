"""Constellation-constraint detector tests.

The reliability geometry is validated against an independently coded oracle
and the selection rule against the plain-DF and ML dominance chain.
"""

import numpy as np
import pytest

from mudet.ccdet import (
    branch_codebook,
    detect_vector_cc,
    multibranch_detect,
    reliability_check,
    rollout_candidate,
    select_best,
)
from mudet.channel import RlsChannelEstimator, gen_block_fading, transmit
from mudet.dfdet import column_norm_order, detect_vector_df, init_filter_states
from mudet.modem import build_qpsk, draw_symbols, quantize
from mudet.refdet import ml_exhaustive

CONST = build_qpsk()
T = np.sqrt(0.5)  # point coordinate at unit symbol power


def _oracle_unreliable(u, d_th):
    """Region test written independently: explicit min over the four points."""
    inside = abs(u.real) <= T and abs(u.imag) <= T
    if inside:
        d = min(abs(u - p) for p in CONST.points)
        return d > d_th
    return min(abs(u.real), abs(u.imag)) < T - d_th


def _trained_setup(k, n_rx, noise_var, seed, n_train=40):
    rng = np.random.default_rng(seed)
    h = gen_block_fading(n_rx, k, rng)
    order = column_norm_order(h)
    states = init_filter_states(k, n_rx)
    for _ in range(n_train):
        s, _ = draw_symbols(CONST, k, rng)
        r = transmit(h, s, noise_var, rng)
        detect_vector_df(states, r, order, CONST, pilots=s)
    return h, order, states, rng


class TestReliabilityCheck:
    def test_frozen_examples(self):
        # origin: inside the square, d = 1 > 0.5
        assert not reliability_check(0j, CONST, 0.5)
        # near the imaginary axis but far out: outside, min coord in the band
        assert not reliability_check(0.1 + 2.0j, CONST, 0.5)
        # deep inside a quadrant: outside the square, both coords clear the band
        assert reliability_check(2.0 + 2.0j, CONST, 0.5)
        # constellation points themselves: d = 0
        for p in CONST.points:
            assert reliability_check(complex(p), CONST, 0.5)
        # inside, close to a point: d ~ 0.233
        assert reliability_check(0.5 + 0.6j, CONST, 0.5)

    def test_matches_independent_oracle_exactly(self):
        rng = np.random.default_rng(50)
        pts = (rng.standard_normal(100_000) + 1j * rng.standard_normal(100_000)) * 1.2
        for d_th in (0.2, 0.5):
            for u in pts[:50_000] if d_th == 0.2 else pts[50_000:]:
                assert reliability_check(u, CONST, d_th) == (
                    not _oracle_unreliable(u, d_th)
                )

    def test_symmetry_invariance(self):
        rng = np.random.default_rng(51)
        for u in (rng.standard_normal(2000) + 1j * rng.standard_normal(2000)) * 1.5:
            v = reliability_check(u, CONST, 0.5)
            assert reliability_check(u.conjugate(), CONST, 0.5) == v
            assert reliability_check(-u, CONST, 0.5) == v
            assert reliability_check(complex(u.imag, u.real), CONST, 0.5) == v

    def test_zero_threshold_fires_inside_everywhere(self):
        rng = np.random.default_rng(52)
        u = (rng.standard_normal(500) + 1j * rng.standard_normal(500)) * 0.3
        inside = (np.abs(u.real) <= T) & (np.abs(u.imag) <= T)
        fired = np.array([not reliability_check(x, CONST, 0.0) for x in u])
        assert np.all(fired[inside])

    def test_non_qpsk_rejected(self):
        from mudet.modem import Constellation

        fake = Constellation(CONST.points, CONST.labels, 1.0, is_square_qpsk=False)
        with pytest.raises(ValueError, match="QPSK"):
            reliability_check(0j, fake, 0.5)

    def test_negative_threshold_rejected(self):
        with pytest.raises(ValueError, match="d_th"):
            reliability_check(0j, CONST, -0.1)


class TestRolloutAndSelect:
    def test_rank0_rollout_reproduces_plain_df(self):
        """Continuing with the quantized choice equals what plain DF would do."""
        h, order, states, rng = _trained_setup(4, 4, 0.05, seed=53)
        import copy

        for _ in range(30):
            s, _ = draw_symbols(CONST, 4, rng)
            r = transmit(h, s, 0.05, rng)
            states_df = copy.deepcopy(states)
            s_plain, _ = detect_vector_df(states_df, r, order, CONST)
            # roll out from an empty prefix with the first-stage quantized choice
            from mudet.dfdet import concat_regressor, filter_output

            u0 = filter_output(states[0], concat_regressor(r, np.empty(0)))
            pt, _ = quantize(u0, CONST)
            b = rollout_candidate(states, r, np.empty(0, complex), pt, CONST)
            b_user = np.empty_like(b)
            b_user[order] = b
            np.testing.assert_array_equal(b_user, s_plain)
            detect_vector_df(states, r, order, CONST)  # keep states in sync

    def test_select_best_metric_values_and_ties(self):
        h = np.eye(2, dtype=complex)
        r = np.array([1.0 + 0j, 0.0])
        vecs = [np.array([1.0 + 0j, 0.0]), np.array([0.0j, 1.0]), np.array([1.0 + 0j, 0.0])]
        best, metrics = select_best(vecs, r, h)
        assert best == 0  # exact hit, and the duplicate at index 2 loses the tie
        np.testing.assert_allclose(metrics, [0.0, 2.0, 0.0], atol=1e-15)


class TestDetectVectorCc:
    def test_disabled_cc_is_bitwise_plain_df(self):
        h, order, states_a, rng = _trained_setup(4, 4, 0.05, seed=54)
        _, _, states_b, _ = _trained_setup(4, 4, 0.05, seed=54)
        for _ in range(50):
            s, _ = draw_symbols(CONST, 4, rng)
            r = transmit(h, s, 0.05, rng)
            res = detect_vector_cc(states_a, r, h, order, CONST, cc_enabled=False)
            s_df, u_df = detect_vector_df(states_b, r, order, CONST)
            np.testing.assert_array_equal(res.s_hat, s_df)
            np.testing.assert_array_equal(res.soft, u_df)
            assert res.cc_fires == 0 and not res.tentatives
        for st_a, st_b in zip(states_a, states_b):
            np.testing.assert_array_equal(st_a.weights, st_b.weights)
            np.testing.assert_array_equal(st_a.p, st_b.p)

    def test_no_fires_at_high_snr(self):
        h, order, states, rng = _trained_setup(2, 2, 1e-6, seed=55)
        for _ in range(40):
            s, _ = draw_symbols(CONST, 2, rng)
            r = transmit(h, s, 1e-6, rng)
            res = detect_vector_cc(states, r, h, order, CONST)
            assert res.cc_fires == 0
            np.testing.assert_array_equal(res.s_hat, s)

    def test_metric_dominance_chain(self):
        """ML <= refined CC vector <= the rank-0 (plain DF) rollout, per fire."""
        h, order, states, rng = _trained_setup(4, 4, 0.1, seed=56)
        fires_seen = 0
        for _ in range(400):
            s, _ = draw_symbols(CONST, 4, rng)
            r = transmit(h, s, 0.1, rng)
            res = detect_vector_cc(states, r, h, order, CONST)
            if not res.cc_fires:
                continue
            fires_seen += res.cc_fires
            final_metric = float(np.sum(np.abs(r - h @ res.s_hat) ** 2))
            _, ml_metric = ml_exhaustive(r, h, CONST)
            assert ml_metric <= final_metric + 1e-9
            for tv in res.tentatives:
                if tv.cand_rank == 0:
                    assert final_metric <= tv.metric + 1e-9
        assert fires_seen > 20  # the scenario must actually exercise CC

    def test_tentative_bookkeeping(self):
        h, order, states, rng = _trained_setup(4, 4, 0.15, seed=57)
        res = None
        for _ in range(200):
            s, _ = draw_symbols(CONST, 4, rng)
            r = transmit(h, s, 0.15, rng)
            res = detect_vector_cc(states, r, h, order, CONST, m_cand=3)
            if res.cc_fires:
                break
        assert res is not None and res.cc_fires > 0
        assert len(res.tentatives) == 3 * res.cc_fires
        ranks = [tv.cand_rank for tv in res.tentatives[:3]]
        assert ranks == [0, 1, 2]
        for tv in res.tentatives:
            assert tv.vector.shape == (4,)
            assert tv.user in range(4)
            # every tentative entry is a constellation point
            for v in tv.vector:
                assert np.min(np.abs(v - CONST.points)) < 1e-12

    def test_channel_estimator_updated_once(self):
        h, order, states, rng = _trained_setup(2, 2, 0.1, seed=58)
        est = RlsChannelEstimator(h.copy())
        s, _ = draw_symbols(CONST, 2, rng)
        r = transmit(h, s, 0.1, rng)
        detect_vector_cc(states, r, h, order, CONST, chan_est=est)
        assert est.n_updates == 1


class TestBranchCodebook:
    def test_frozen_k4(self):
        book = branch_codebook(np.array([0, 1, 2, 3]), 5)
        got = [list(b) for b in book]
        assert got == [
            [0, 1, 2, 3],
            [3, 2, 1, 0],
            [2, 1, 0, 3],
            [1, 0, 3, 2],
            [0, 3, 2, 1],
        ]

    def test_prefix_property(self):
        base = np.array([2, 0, 3, 1])
        b3 = branch_codebook(base, 3)
        b5 = branch_codebook(base, 5)
        for a, b in zip(b3, b5):
            np.testing.assert_array_equal(a, b)

    def test_duplicates_dropped_and_bounded(self):
        # K=2: reversed-order shifts collide with the base ordering
        book = branch_codebook(np.array([1, 0]), 2)
        assert [list(b) for b in book] == [[1, 0], [0, 1]]
        with pytest.raises(ValueError, match="distinct"):
            branch_codebook(np.array([1, 0]), 3)

    def test_exhaustive_mode(self):
        book = branch_codebook(np.array([0, 1, 2]), 1, exhaustive=True)
        assert len(book) == 6
        with pytest.raises(ValueError, match="K <= 4"):
            branch_codebook(np.arange(5), 1, exhaustive=True)


class TestMultibranch:
    def test_single_branch_equals_cc_detector(self):
        h, order, states_a, rng = _trained_setup(3, 3, 0.1, seed=59)
        _, _, states_b, _ = _trained_setup(3, 3, 0.1, seed=59)
        for _ in range(30):
            s, _ = draw_symbols(CONST, 3, rng)
            r = transmit(h, s, 0.1, rng)
            mb = multibranch_detect([states_a], r, h, [order], CONST)
            cc = detect_vector_cc(states_b, r, h, order, CONST)
            np.testing.assert_array_equal(mb.s_hat, cc.s_hat)
            assert mb.best_branch == 0

    def test_selected_metric_never_worse_than_base_branch(self):
        """With independent per-branch filters, min over branches <= branch 1."""
        h, order, states_solo, rng = _trained_setup(2, 2, 0.12, seed=60)
        book = branch_codebook(order, 2)
        branch_states = [init_filter_states(2, 2), init_filter_states(2, 2)]
        # replay identical training for every state set
        rng2 = np.random.default_rng(60)
        h2 = gen_block_fading(2, 2, rng2)
        for _ in range(40):
            s, _ = draw_symbols(CONST, 2, rng2)
            r = transmit(h2, s, 0.12, rng2)
            for st, od in zip(branch_states, book):
                detect_vector_df(st, r, od, CONST, pilots=s)
        for _ in range(60):
            s, _ = draw_symbols(CONST, 2, rng)
            r = transmit(h, s, 0.12, rng)
            mb = multibranch_detect(branch_states, r, h, book, CONST)
            assert mb.branch_metrics.min() <= mb.branch_metrics[0] + 1e-12
            cc = detect_vector_cc(states_solo, r, h, order, CONST)
            base_metric = float(np.sum(np.abs(r - h @ cc.s_hat) ** 2))
            assert mb.branch_metrics[0] == pytest.approx(base_metric, rel=1e-12)

    def test_pooled_list_contains_branch_finals(self):
        h, order, _, rng = _trained_setup(2, 2, 0.1, seed=61)
        book = branch_codebook(order, 2)
        branch_states = [init_filter_states(2, 2), init_filter_states(2, 2)]
        s, _ = draw_symbols(CONST, 2, rng)
        r = transmit(h, s, 0.1, rng)
        mb = multibranch_detect(branch_states, r, h, book, CONST)
        finals = [tv for tv in mb.tentatives if tv.cand_rank == -1]
        assert len(finals) == 2
