import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from stochmeas.gedanken import (
    COUPLINGS,
    GedankenSetup,
    deexcitation_rate,
    detection_probabilities,
    unbiased_average,
)
from stochmeas.walk import bias_update

triples = st.lists(st.floats(0.0, 1.0), min_size=3, max_size=3).filter(lambda v: sum(v) > 1e-3)
alphas = st.floats(0.0, 0.999)


def setup(p, a, eps=1):
    return GedankenSetup.from_probabilities(p, a, eps)


class TestDetection:
    def test_no_field(self):
        s = setup([0.2, 0.3, 0.5], 0.0)
        np.testing.assert_allclose(detection_probabilities(s), [0.2, 0.3, 0.5], atol=1e-15)

    def test_hand_value(self):
        got = detection_probabilities(setup([1 / 3] * 3, 0.3))
        np.testing.assert_allclose(got, [0.7 / 3, 1 / 3, 1.3 / 3], atol=1e-15)

    @pytest.mark.parametrize("eps", [1, -1])
    def test_corner(self, eps):
        assert detection_probabilities(setup([0, 0, 1], 0.5, eps)) == (0.0, 0.0, 1.0)

    @given(triples, alphas, st.sampled_from([1, -1]))
    def test_valid_triple(self, p, a, eps):
        q = detection_probabilities(setup(p, a, eps))
        assert min(q) >= 0 and abs(sum(q) - 1) < 1e-14

    @given(st.floats(0.05, 0.9), st.floats(0.05, 0.9), st.floats(0, 0.95))
    def test_monotone_in_field(self, pm, pp, a):
        p = [pm, 1.0, pp]
        lo = detection_probabilities(setup(p, a))[2]
        hi = detection_probabilities(setup(p, a + 0.04))[2]
        assert hi > lo

    def test_rejects_bad_setup(self):
        with pytest.raises(ValueError):
            GedankenSetup(1, 1, 0, 0.1)
        with pytest.raises(ValueError):
            setup([1, 0, 0], 1.0)
        with pytest.raises(ValueError):
            setup([1, 0, 0], 0.2, 0)


class TestRate:
    def test_symmetric(self):
        assert deexcitation_rate(setup([0.3, 0.4, 0.3], 0.9)) == pytest.approx(1.0, abs=1e-15)

    def test_hand_value(self):
        assert deexcitation_rate(setup([0.5, 0.2, 0.3], 0.2)) == pytest.approx(0.96, rel=1e-14)

    @given(triples, alphas)
    def test_flip_is_odd(self, p, a):
        s = setup(p, a)
        assert deexcitation_rate(s) - 1 == pytest.approx(-(deexcitation_rate(s.flipped()) - 1), abs=1e-15)


class TestUnbiased:
    def test_example(self):
        np.testing.assert_allclose(unbiased_average(setup([0.5, 0.2, 0.3], 0.3)), [0.5, 0.2, 0.3], atol=1e-14)

    def test_corner(self):
        assert unbiased_average(setup([1, 0, 0], 0.6)) == (1.0, 0.0, 0.0)

    @given(triples, alphas)
    def test_identity(self, p, a):
        s = setup(p, a)
        np.testing.assert_allclose(unbiased_average(s), s.probabilities, rtol=0, atol=1e-14)

    @given(triples, alphas)
    def test_is_one_martingale_step(self, p, a):
        # the same map as a walk step with one shared sign and couplings (-1, 0, 1)
        s = setup(p, a)
        probs = s.probabilities
        mean = np.zeros(3)
        for eps in (1, -1):
            w = 0.5 * (1 + eps * a * (COUPLINGS @ probs))
            mean += w * bias_update(probs, eps * a * COUPLINGS)
        np.testing.assert_allclose(mean, probs, atol=1e-14)
        np.testing.assert_allclose(mean, unbiased_average(s), atol=1e-14)
