"""Decision-feedback detector and RLS adaptation tests.

The recursion is validated against a from-scratch exponentially-windowed
least-squares solve (independent oracle, regularized exactly like the
recursive start P[0] = I/delta).
"""

import numpy as np
import pytest

from mudet.channel import gen_block_fading, transmit
from mudet.dfdet import (
    FilterState,
    column_norm_order,
    concat_regressor,
    detect_vector_df,
    filter_output,
    init_filter_states,
    rls_step,
)
from mudet.flops import FlopCounter
from mudet.modem import build_qpsk, draw_symbols


def _direct_windowed_solve(xs, ds, lam, delta):
    """Closed-form solution of min sum lam^(i-t) |d - w^H x|^2 + ridge."""
    n = xs[0].size
    i = len(xs)
    phi = delta * lam**i * np.eye(n, dtype=complex)
    rhs = np.zeros(n, dtype=complex)
    for t, (x, d) in enumerate(zip(xs, ds), start=1):
        w = lam ** (i - t)
        phi += w * np.outer(x, x.conj())
        rhs += w * x * np.conj(d)
    return np.linalg.solve(phi, rhs), phi


class TestRlsStep:
    @pytest.mark.parametrize("lam", [0.95, 0.998, 1.0])
    def test_weights_match_direct_solve(self, lam):
        rng = np.random.default_rng(20)
        delta = 0.01
        st = FilterState.initial(5, lam=lam, delta=delta)
        xs, ds = [], []
        for i in range(120):
            x = rng.standard_normal(5) + 1j * rng.standard_normal(5)
            d = rng.standard_normal() + 1j * rng.standard_normal()
            rls_step(st, x, d)
            xs.append(x)
            ds.append(d)
            if i in (29, 119):
                ref, _ = _direct_windowed_solve(xs, ds, lam, delta)
                err = np.linalg.norm(st.weights - ref) / np.linalg.norm(ref)
                assert err < 1e-8, f"lam={lam}, step {i}: {err:.2e}"

    def test_inverse_correlation_matches_direct(self):
        rng = np.random.default_rng(21)
        st = FilterState.initial(4, lam=0.998, delta=0.01)
        xs, ds = [], []
        for _ in range(60):
            x = rng.standard_normal(4) + 1j * rng.standard_normal(4)
            d = complex(rng.standard_normal())
            rls_step(st, x, d)
            xs.append(x)
            ds.append(d)
        _, phi = _direct_windowed_solve(xs, ds, 0.998, 0.01)
        np.testing.assert_allclose(st.p @ phi, np.eye(4), atol=1e-8)

    def test_returns_a_priori_error(self):
        st = FilterState.initial(3)
        st.weights = np.array([1.0, 1j, 0.5])
        x = np.array([1.0 + 0j, 2.0, -1j])
        d = 0.25 + 0.5j
        xi = rls_step(st, x, d)
        assert xi == pytest.approx(d - (1.0 * 1 + (-1j) * 2 + 0.5 * (-1j)))

    def test_p_stays_hermitian_long_run(self):
        rng = np.random.default_rng(22)
        st = FilterState.initial(6)
        for _ in range(10_000):
            x = rng.standard_normal(6) + 1j * rng.standard_normal(6)
            rls_step(st, x, complex(rng.standard_normal()))
        assert np.linalg.norm(st.p - st.p.conj().T) < 1e-10

    def test_flop_accounting_closed_form(self):
        """count_rls_step(n) must add 4n^2+4n mults and 3n^2+2n adds."""
        st = FilterState.initial(5)
        c = FlopCounter()
        rls_step(st, np.ones(5, complex), 1.0 + 0j, counter=c)
        assert (c.mults, c.adds) == (4 * 25 + 20, 3 * 25 + 10)

    def test_bad_init_params(self):
        with pytest.raises(ValueError, match="lam"):
            FilterState.initial(3, lam=1.5)
        with pytest.raises(ValueError, match="delta"):
            FilterState.initial(3, delta=0.0)


class TestOrderingAndRegressor:
    def test_column_norm_order_descending_tie_by_index(self):
        h = np.zeros((2, 4))
        h[0] = [2.0, 3.0, 1.0, 3.0]  # column norms 2, 3, 1, 3
        np.testing.assert_array_equal(column_norm_order(h), [1, 3, 0, 2])

    def test_concat_regressor_negates_feedback(self):
        x = concat_regressor(np.array([1 + 1j, 2.0]), np.array([1j]))
        np.testing.assert_array_equal(x, np.array([1 + 1j, 2.0, -1j]))

    def test_first_stage_has_no_feedback(self):
        x = concat_regressor(np.array([1.0, 2.0]), np.empty(0))
        assert x.size == 2

    def test_filter_output_is_hermitian_inner_product(self):
        st = FilterState.initial(2)
        st.weights = np.array([1j, 1.0 + 0j])
        assert filter_output(st, np.array([2.0 + 0j, 3j])) == pytest.approx(1j)

    def test_init_state_dims(self):
        states = init_filter_states(3, 4)
        assert [s.n_taps for s in states] == [4, 5, 6]
        with pytest.raises(ValueError, match="n_rx >= n_users"):
            init_filter_states(5, 4)


class TestDetectVectorDf:
    def test_training_mode_echoes_pilots_and_adapts(self):
        const = build_qpsk()
        rng = np.random.default_rng(23)
        states = init_filter_states(2, 2)
        pilots, _ = draw_symbols(const, 2, rng)
        r = rng.standard_normal(2) + 1j * rng.standard_normal(2)
        s_hat, _ = detect_vector_df(states, r, np.array([0, 1]), const, pilots=pilots)
        np.testing.assert_array_equal(s_hat, pilots)
        assert np.linalg.norm(states[0].weights) > 0

    def test_noise_free_decisions_after_training(self):
        const = build_qpsk()
        rng = np.random.default_rng(24)
        h = gen_block_fading(2, 2, rng)
        order = column_norm_order(h)
        states = init_filter_states(2, 2)
        for _ in range(50):
            s, _ = draw_symbols(const, 2, rng)
            detect_vector_df(states, h @ s, order, const, pilots=s)
        errs = 0
        for _ in range(200):
            s, _ = draw_symbols(const, 2, rng)
            s_hat, _ = detect_vector_df(states, h @ s, order, const)
            errs += int(np.any(s_hat != s))
        assert errs == 0

    def test_decisions_returned_in_user_order(self):
        """With a permuted detection order the output indexing must not move."""
        const = build_qpsk()
        rng = np.random.default_rng(25)
        # user 1 has the stronger column, so detection order is [1, 0]
        h = np.array([[1.0, 0.0], [0.0, 3.0]], dtype=complex)
        order = column_norm_order(h)
        np.testing.assert_array_equal(order, [1, 0])
        states = init_filter_states(2, 2)
        for _ in range(50):
            s, _ = draw_symbols(const, 2, rng)
            detect_vector_df(states, h @ s, order, const, pilots=s)
        s = np.array([const.points[0], const.points[3]])
        s_hat, u = detect_vector_df(states, h @ s, order, const)
        np.testing.assert_array_equal(s_hat, s)
        # soft outputs follow the same indexing
        assert abs(u[0] - s[0]) < 0.2 and abs(u[1] - s[1]) < 0.2

    def test_state_count_mismatch_rejected(self):
        const = build_qpsk()
        with pytest.raises(ValueError, match="filter states"):
            detect_vector_df(
                init_filter_states(2, 2), np.zeros(2, complex), np.array([0, 1, 2]), const
            )

    def test_update_uses_all_stages(self):
        const = build_qpsk()
        rng = np.random.default_rng(26)
        states = init_filter_states(3, 3)
        s, _ = draw_symbols(const, 3, rng)
        r = rng.standard_normal(3) + 1j * rng.standard_normal(3)
        detect_vector_df(states, r, np.array([2, 0, 1]), const, pilots=s)
        assert all(st.n_updates == 1 for st in states)
