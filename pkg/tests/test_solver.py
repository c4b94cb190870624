import numpy as np
import pytest

from ehaoi import (
    IDLE,
    TRANSMIT,
    ConvergenceError,
    DomainError,
    ModelParams,
    State,
    ThresholdPolicy,
    ThresholdStructureError,
    TruncationWarning,
    bellman_backup_q,
    extract_policy,
    extract_thresholds,
    modified_via,
    q_value,
    relative_value_iteration,
    state_count,
)


def tiny_params(**overrides):
    kw = dict(
        lambda_e=0.5,
        p_block=0.2,
        battery_cap=2,
        cost_reliable=2.0,
        weight=10.0,
        delta_max=4,
    )
    kw.update(overrides)
    return ModelParams(**kw)


def reference_backup_q(v, m):
    """Q-values recomputed from the written-out dynamics, term by term.

    Deliberately independent of the kernel module: every branch probability
    is spelled out here so the two routes can disagree if either is wrong.
    """
    lam, p = m.lambda_e, m.p_block
    cap, dm = m.battery_cap, m.delta_max
    out = np.zeros((2, (cap + 1) * dm))

    def val(age, q):
        return v[q * dm + (age - 1)]

    for q in range(cap + 1):
        for d in range(1, dm + 1):
            i = q * dm + (d - 1)
            up = min(d + 1, dm)
            if q < cap:
                idle_cont = lam * val(up, q + 1) + (1.0 - lam) * val(up, q)
            else:
                idle_cont = val(up, cap)
            out[IDLE, i] = d + idle_cont
            left = q - 1 if q > 0 else 0
            backup = m.weight * m.cost_reliable if q == 0 else 0.0
            tx_cont = (
                p * lam * val(up, left + 1)
                + (1.0 - p) * lam * val(1, left + 1)
                + p * (1.0 - lam) * val(up, left)
                + (1.0 - p) * (1.0 - lam) * val(1, left)
            )
            out[TRANSMIT, i] = d + backup + tx_cont
    return out


class TestQValue:
    def test_zero_values_reduce_to_cost(self):
        m = tiny_params()
        v = np.zeros(state_count(m))
        assert q_value(v, State(3, 1), IDLE, m) == pytest.approx(3.0)
        assert q_value(v, State(3, 1), TRANSMIT, m) == pytest.approx(3.0)
        wide = tiny_params(delta_max=8)
        assert q_value(np.zeros(state_count(wide)), State(5, 0), TRANSMIT, wide) == pytest.approx(25.0)

    @pytest.mark.parametrize("seed", [0, 1, 2])
    @pytest.mark.parametrize("lam", [0.5, 1.0])
    def test_vectorized_backup_matches_reference(self, seed, lam):
        m = tiny_params(lambda_e=lam)
        rng = np.random.default_rng(seed)
        v = rng.normal(size=state_count(m)) * 10.0
        got = bellman_backup_q(v, m)
        want = reference_backup_q(v, m)
        np.testing.assert_allclose(got, want, rtol=0.0, atol=1e-12)

    def test_scalar_and_vector_routes_agree(self):
        m = tiny_params()
        rng = np.random.default_rng(7)
        v = rng.normal(size=state_count(m))
        q = bellman_backup_q(v, m)
        for i, s in enumerate(
            State(d, b) for b in range(3) for d in range(1, 5)
        ):
            for a in (IDLE, TRANSMIT):
                assert q[a, i] == pytest.approx(q_value(v, s, a, m), abs=1e-12)


class TestRelativeValueIteration:
    def test_converges_and_satisfies_bellman(self):
        m = tiny_params(battery_cap=3, delta_max=30)
        res = relative_value_iteration(m, eps=1e-9)
        q = bellman_backup_q(res.values, m)
        residual = q.min(axis=0) - res.values
        # optimality equation holds up to the stopping tolerance
        assert np.max(np.abs(residual - res.gain)) <= 1e-8

    def test_gain_at_least_one(self):
        # age contributes >= 1 every slot, so no policy beats cost 1
        res = relative_value_iteration(tiny_params(delta_max=12), eps=1e-9)
        assert res.gain >= 1.0

    def test_span_history_non_increasing(self):
        res = relative_value_iteration(tiny_params(battery_cap=3, delta_max=25), eps=1e-9)
        h = res.span_history
        assert h.shape == (res.iterations,)
        assert np.all(h[1:] <= h[:-1] + 1e-12)
        assert h[-1] == pytest.approx(res.span_residual)
        assert res.span_residual <= 1e-9

    def test_certain_harvest_rare_blocking_transmits_everywhere_charged(self):
        # with free energy every slot, all states holding energy transmit
        # and the average cost is the mean age under constant updating
        m = ModelParams(
            lambda_e=1.0,
            p_block=0.01,
            battery_cap=2,
            cost_reliable=2.0,
            weight=10.0,
            delta_max=60,
        )
        res = relative_value_iteration(m, eps=1e-10)
        table = res.policy.reshape(m.battery_cap + 1, m.delta_max)
        assert np.all(table[1:, :] == TRANSMIT)
        assert res.gain == pytest.approx(1.0 / 0.99, abs=1e-8)

    def test_policy_is_greedy_for_returned_values(self):
        m = tiny_params(battery_cap=3, delta_max=20)
        res = relative_value_iteration(m, eps=1e-9)
        np.testing.assert_array_equal(res.policy, extract_policy(res.values, m))
        assert res.argmin_evals == state_count(m)

    def test_non_convergence_raises_with_diagnostics(self):
        with pytest.raises(ConvergenceError) as exc:
            relative_value_iteration(tiny_params(delta_max=40), eps=1e-12, max_iter=2)
        assert exc.value.iterations == 2
        assert exc.value.span_residual > 1e-12

    @pytest.mark.parametrize("eps", [0.0, -1e-9])
    def test_bad_eps_rejected(self, eps):
        with pytest.raises(DomainError):
            relative_value_iteration(tiny_params(), eps=eps)

    def test_bad_max_iter_rejected(self):
        with pytest.raises(DomainError):
            relative_value_iteration(tiny_params(), max_iter=0)


class TestExtractPolicy:
    def test_exact_ties_resolve_to_idle(self):
        # against v = 0 both actions cost the age whenever energy is stored,
        # an exact tie, and transmitting from empty adds the backup price
        m = tiny_params()
        v = np.zeros(state_count(m))
        np.testing.assert_array_equal(extract_policy(v, m), np.zeros(state_count(m), dtype=np.int8))

    def test_strict_improvement_transmits(self):
        m = tiny_params()
        # make age-1 states hugely attractive so any reset wins
        v = np.zeros(state_count(m))
        for q in range(m.battery_cap + 1):
            v[q * m.delta_max] = -1000.0
        policy = extract_policy(v, m).reshape(m.battery_cap + 1, m.delta_max)
        assert np.all(policy[1:, :] == TRANSMIT)


class TestModifiedVia:
    def test_matches_full_argmin(self, base_params, base_solution):
        res, tp = base_solution
        full = relative_value_iteration(base_params, eps=1e-9)
        np.testing.assert_array_equal(res.policy, full.policy)
        assert res.gain == pytest.approx(full.gain, abs=0.0)

    def test_argmin_work_bounded_by_thresholds(self, base_params, base_solution):
        res, tp = base_solution
        dm = base_params.delta_max
        expected = sum(min(t, dm) for t in tp.thresholds)
        assert res.argmin_evals == expected
        assert res.argmin_evals < state_count(base_params)

    def test_policy_expands_from_thresholds(self, base_params, base_solution):
        res, tp = base_solution
        np.testing.assert_array_equal(tp.expand(base_params), res.policy)


class TestThresholdPolicy:
    def test_expand_layout(self):
        m = tiny_params()
        tp = ThresholdPolicy((2, 1, 5))
        table = tp.expand(m).reshape(3, 4)
        np.testing.assert_array_equal(table[0], [0, 1, 1, 1])
        np.testing.assert_array_equal(table[1], [1, 1, 1, 1])
        np.testing.assert_array_equal(table[2], [0, 0, 0, 0])  # 5 > delta_max: never

    def test_expand_length_mismatch(self):
        with pytest.raises(DomainError):
            ThresholdPolicy((1, 1)).expand(tiny_params())

    @pytest.mark.parametrize("bad", [(), (0,), (1.5,), (1, -2)])
    def test_invalid_thresholds(self, bad):
        with pytest.raises(DomainError):
            ThresholdPolicy(bad)


class TestExtractThresholds:
    def test_all_idle_row_maps_to_never(self):
        m = tiny_params()
        with pytest.warns(TruncationWarning):
            tp = extract_thresholds(np.zeros(state_count(m), dtype=np.int8), m)
        assert tp.thresholds == (5, 5, 5)

    def test_all_transmit_maps_to_one(self):
        m = tiny_params()
        tp = extract_thresholds(np.ones(state_count(m), dtype=np.int8), m)
        assert tp.thresholds == (1, 1, 1)

    def test_round_trips_expansion(self):
        m = tiny_params()
        tp = ThresholdPolicy((2, 2, 1))
        assert extract_thresholds(tp.expand(m), m) == tp

    def test_hole_raises_with_witness(self):
        m = tiny_params()
        table = np.zeros((3, 4), dtype=np.int8)
        table[1] = [0, 1, 0, 1]  # transmit at age 2, idle again at age 3
        with pytest.raises(ThresholdStructureError) as exc:
            extract_thresholds(table.reshape(-1), m)
        assert exc.value.witnesses == [(1, 2, 3)]


class TestTruncationWarning:
    def test_tight_threshold_warns(self):
        m = tiny_params(battery_cap=3, delta_max=8)
        table = ThresholdPolicy((5, 1, 1, 1)).expand(m)
        with pytest.warns(TruncationWarning):
            extract_thresholds(table, m)

    def test_loose_threshold_silent(self):
        m = tiny_params(battery_cap=3, delta_max=8)
        table = ThresholdPolicy((4, 1, 1, 1)).expand(m)
        import warnings

        with warnings.catch_warnings():
            warnings.simplefilter("error", TruncationWarning)
            extract_thresholds(table, m)
