import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from conftest import interior_points
from stochmeas.apparatus import ApparatusParams, simplified_log_b_squared
from stochmeas.errors import EnumerationTooLarge
from stochmeas.state import AmplitudeVector
from stochmeas.walk import (
    WalkState,
    _mixture_columns,
    apply_product_step,
    apply_step,
    covariance_analytic,
    entropy,
    entropy_drift_analytic,
    expected_entropy_change,
    path_weight,
    product_step_weight,
    reweighted_outcomes,
    run_walk,
    run_walks,
    sign_columns,
    step_moments_enumerated,
    step_weight,
)

simplex = st.integers(2, 6).flatmap(
    lambda n: st.lists(st.floats(0.001, 1.0), min_size=n, max_size=n).map(lambda v: np.array(v) / sum(v))
)
etas = st.floats(0.001, 0.45)


def psi_of(*probs):
    return AmplitudeVector.from_probabilities(probs)


class TestStepWeight:
    def test_vanishing_coupling(self):
        for col in sign_columns(3):
            assert math.isclose(step_weight([0.2, 0.3, 0.5], col, 1e-300), 1 / 8)

    @given(etas)
    def test_single_channel(self, eta):
        assert math.isclose(step_weight([1.0], [1], eta), (1 + 2 * eta) / 2, rel_tol=1e-15)

    @given(simplex, etas)
    def test_sums_to_one_and_positive(self, p, eta):
        w = [step_weight(p, c, eta) for c in sign_columns(p.size)]
        assert abs(math.fsum(w) - 1) <= 1e-14
        assert min(w) >= 0

    @given(simplex, etas)
    def test_product_weights_sum_to_one(self, p, eta):
        w = [product_step_weight(p, c, eta) for c in sign_columns(p.size)]
        assert abs(math.fsum(w) - 1) <= 1e-13


class TestApplyStep:
    def test_corner_absorbing(self):
        for col in sign_columns(3):
            for step in (apply_step, apply_product_step):
                assert np.array_equal(step(WalkState([0, 1, 0]), col, 0.3).p, [0, 1, 0])

    def test_hand_value(self):
        s = apply_step(WalkState([0.5, 0.5]), [1, -1], 0.1)
        np.testing.assert_allclose(s.p, [0.6, 0.4], rtol=0, atol=1e-15)
        assert s.x == 1

    @given(simplex, etas)
    def test_common_mode_invariant(self, p, eta):
        s = apply_step(WalkState(p), np.ones(p.size), eta)
        np.testing.assert_allclose(s.p, p, atol=1e-15)

    @given(simplex, etas, st.data())
    def test_stays_on_simplex(self, p, eta, data):
        col = np.array(data.draw(st.lists(st.sampled_from([-1, 1]), min_size=p.size, max_size=p.size)))
        for step in (apply_step, apply_product_step):
            q = step(WalkState(p), col, eta).p
            assert np.all(q >= 0) and abs(q.sum() - 1) <= 1e-12

    def test_second_order_form(self):
        # the renormalized update equals the truncated increment formula
        p, e, eta = np.array([0.2, 0.3, 0.5]), np.array([1, -1, 1]), 0.05
        s = p @ e
        dp = p * 2 * eta * (e - s) / (1 + 2 * eta * s)
        np.testing.assert_allclose(apply_step(WalkState(p), e, eta).p - p, dp, atol=1e-15)


class TestMoments:
    def test_corner(self):
        mean, cov = step_moments_enumerated([1, 0, 0], 0.2)
        assert np.all(mean == 0) and np.all(cov == 0)

    def test_symmetric_pair(self):
        _, cov = step_moments_enumerated([0.5, 0.5], 0.05)
        assert abs(cov[0, 0] - 0.05**2 / 2) <= 0.1 * 0.05**3

    @pytest.mark.parametrize("measure", ["linear", "product"])
    @given(p=simplex, eta=st.floats(0.001, 0.2))
    def test_martingale(self, measure, p, eta):
        mean, _ = step_moments_enumerated(p, eta, measure)
        assert np.all(np.abs(mean) <= 1e-14)

    def test_enumeration_limit(self):
        with pytest.raises(EnumerationTooLarge):
            step_moments_enumerated(np.full(13, 1 / 13), 0.1)

    def test_covariance_second_order(self, gen):
        eta = 0.01
        for p in interior_points(gen, 4, 50):
            _, cov = step_moments_enumerated(p, eta)
            scale = np.sqrt(np.outer(np.diag(cov), np.diag(cov)))
            assert np.all(np.abs(cov - covariance_analytic(p, eta)) <= 5 * eta * scale + 1e-18)


class TestEntropy:
    @pytest.mark.parametrize("p, s", [([1, 0], 0.0), ([0.5, 0.5], math.log(2))])
    def test_examples(self, p, s):
        assert math.isclose(entropy(p), s, abs_tol=1e-15)

    def test_three_way(self):
        assert round(entropy([0.5, 0.3, 0.2]), 4) == 1.0297

    def test_drift_examples(self):
        assert entropy_drift_analytic([0, 1, 0], 0.1) == 0
        assert math.isclose(entropy_drift_analytic([0.5, 0.5], 0.1), -0.01, rel_tol=1e-12)

    def test_drift_negative_inside(self, gen):
        for p in interior_points(gen, 4, 1000):
            assert entropy_drift_analytic(p, 0.05) < 0

    def test_enumerated_change_tracks_drift(self, gen):
        eta = 0.05
        for p in interior_points(gen, 3, 200, floor=0.02):
            exact, approx = expected_entropy_change(p, eta), entropy_drift_analytic(p, eta)
            assert exact <= 0
            assert abs(exact - approx) <= 10 * eta * abs(approx)

    def test_sampled_steps_lower_entropy(self):
        psi = psi_of(0.4, 0.35, 0.25)
        res = run_walks(psi, ApparatusParams.uniform(3, 20, 0.05, seed=2), 500, record=True)
        ds = [t[i + 1][2] - t[i][2] for r in res for t in [r.trajectory] for i in range(20)]
        assert len(ds) == 10_000
        assert np.mean(ds) < 0


class TestRunWalk:
    def test_corner_state(self):
        r = run_walk(psi_of(0, 1, 0), ApparatusParams.uniform(3, 50, 0.2))
        assert r.outcome == 1 and np.array_equal(r.final_p, [0, 1, 0])

    def test_born_two_channels(self):
        res = run_walks(psi_of(0.7, 0.3), ApparatusParams.uniform(2, 2000, 0.1, seed=9), 2000)
        freq = np.mean([r.outcome == 0 for r in res])
        assert abs(freq - 0.7) <= 3 * math.sqrt(0.21 / 2000)
        assert all(r.collapsed for r in res)

    def test_index_determinism(self):
        params = ApparatusParams.uniform(3, 40, 0.1, seed=4)
        psi = psi_of(0.2, 0.3, 0.5)
        batch = run_walks(psi, params, 30, chunk=7)
        single = run_walk(psi, params, walk_index=17)
        assert np.array_equal(batch[17].final_p, single.final_p)
        again = run_walks(psi, params, 10, start=20, chunk=3)
        assert all(np.array_equal(a.final_p, b.final_p) for a, b in zip(batch[20:], again))

    def test_trajectory_layout(self):
        r = run_walk(psi_of(0.5, 0.5), ApparatusParams.uniform(2, 10, 0.1), record=True)
        xs = [t[0] for t in r.trajectory]
        assert xs == list(range(11))
        for x, p, s in r.trajectory:
            assert math.isclose(s, entropy(p), abs_tol=1e-15)

    def test_pointer_matches_sign_sum_parity(self):
        res = run_walks(psi_of(0.5, 0.5), ApparatusParams.uniform(2, 30, 0.2), 20)
        assert all(np.all(np.abs(r.pointer) <= 15) for r in res)

    def test_general_model_born(self, gen):
        eta = gen.uniform(0.1, 0.2, (2, 400))
        c = gen.uniform(0.95, 1.05, (2, 400))
        res = run_walks(psi_of(0.3, 0.7), ApparatusParams(eta, c, seed=1), 1000, measure="recursive")
        freq = np.mean([r.outcome == 0 for r in res])
        assert abs(freq - 0.3) <= 3 * math.sqrt(0.21 / 1000)

    def test_measure_needs_uniform(self):
        params = ApparatusParams(np.full((2, 4), 0.1), np.full((2, 4), 1.05))
        with pytest.raises(ValueError):
            run_walks(psi_of(0.5, 0.5), params, 1, measure="linear")


class TestPathMeasures:
    """Exact statements about whole sign tables, enumerated for tiny sizes."""

    @pytest.mark.parametrize("measure", ["linear", "product"])
    def test_path_weights_normalized(self, measure):
        psi = psi_of(0.3, 0.7)
        tables = [np.array(b).reshape(2, 3) for b in itertools.product((-1, 1), repeat=6)]
        total = math.fsum(path_weight(psi, e, 0.2, measure) for e in tables)
        assert abs(total - 1) < 1e-13

    def test_product_path_is_ensemble_mixture(self):
        # sequential product-measure path probability == 2^(-2nX) sum_j p_j |b_j|^2
        psi, eta = psi_of(0.2, 0.3, 0.5), 0.25
        p = psi.probabilities
        for bits in itertools.product((-1, 1), repeat=6):
            e = np.array(bits).reshape(3, 2)
            mix = p @ np.exp(simplified_log_b_squared(eta, e)) / 2**6
            assert math.isclose(path_weight(psi, e, eta, "product"), mix, rel_tol=1e-12)

    def test_weighted_sampling_equals_reweighted_uniform(self):
        psi = psi_of(0.6, 0.4)
        params = ApparatusParams.uniform(2, 200, 0.1, seed=21)
        direct = run_walks(psi, params, 4000)
        f_direct = np.bincount([r.outcome for r in direct], minlength=2) / 4000
        f_rew, ess = reweighted_outcomes(psi, params, 4000)
        se = math.sqrt(0.24 / 4000) + math.sqrt(0.24 / ess)
        assert abs(f_direct[0] - f_rew[0]) <= 3 * se


class TestLargeNSampler:
    @pytest.mark.parametrize("measure", ["linear", "product"])
    def test_column_law(self, measure):
        n, eta, B = 3, 0.3, 200_000
        params = ApparatusParams.uniform(n, 2, eta)
        p = np.array([0.2, 0.3, 0.5])
        u = np.random.default_rng(5).random((B, n + 1))
        cols = _mixture_columns(np.tile(p, (B, 1)), u, params, measure)
        cell = ((cols > 0) * (1 << np.arange(n))).sum(axis=1)
        counts = np.bincount(cell, minlength=2**n)
        weight = step_weight if measure == "linear" else product_step_weight
        expected = B * np.array([weight(p, c, eta) for c in sign_columns(n)])
        assert stats.chisquare(counts, expected).pvalue > 0.001

    def test_runs_above_cdf_limit(self):
        n = 18
        psi = AmplitudeVector.from_probabilities(np.full(n, 1 / n))
        r = run_walk(psi, ApparatusParams.uniform(n, 40, 0.2), measure="product")
        assert abs(r.final_p.sum() - 1) < 1e-12
