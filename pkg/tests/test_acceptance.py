"""Acceptance criteria, one test each.

Every test prints a single ``PASS``/``FAIL`` line with the measured figure
and its tolerance, then asserts.  Run standalone for just the summary::

    python3 tests/test_acceptance.py
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np
import pytest
from scipy.stats import chi2_contingency

from stochmeas import ensemble, rng, walk
from stochmeas.apparatus import ApparatusParams, noise_block, simplified_log_b_squared
from stochmeas.eikonal import partial_fraction_identity_check
from stochmeas.gedanken import GedankenSetup, unbiased_average
from stochmeas.modes import count_modes
from stochmeas.sinks import SourceSinkParams, source_limit_error, strong_source_density
from stochmeas.state import AmplitudeVector, RawAmplitudes, normalize, pure_state

SEED = 20240611


@dataclass
class Outcome:
    number: int
    title: str
    passed: bool
    detail: str

    @property
    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'} [{self.number:2d}] {self.title}: {self.detail}"


def _gen(i: int) -> np.random.Generator:
    return rng.stream(SEED, rng.PROPERTY, 100 + i)


def _interior(gen, n: int) -> np.ndarray:
    return gen.dirichlet(np.ones(n))


# -- the twelve criteria ---------------------------------------------------


def born_rule() -> Outcome:
    probs = np.array([0.5, 0.3, 0.2])
    runs = 2000
    params = ApparatusParams.uniform(3, 2000, 0.1, SEED)
    t0 = time.perf_counter()
    results = walk.run_walks(AmplitudeVector.from_probabilities(probs), params, runs)
    elapsed = time.perf_counter() - t0
    freq = np.bincount([r.outcome for r in results], minlength=3) / runs
    band = 3.0 * np.sqrt(probs * (1 - probs) / runs)
    worst = float((np.abs(freq - probs) / band).max())
    ok = worst <= 1.0 and elapsed < 10.0
    return Outcome(1, "Born rule", ok,
                   f"freq={np.round(freq, 4).tolist()} worst |f-p|/band={worst:.3f} (<=1), {elapsed:.2f} s (<10 s)")


def martingale() -> Outcome:
    gen = _gen(2)
    worst = {}
    for measure in ("linear", "product"):
        w = 0.0
        for n in (2, 3, 4):
            for eta in (0.05, 0.2):
                for _ in range(200):
                    mean, _ = walk.step_moments_enumerated(_interior(gen, n), eta, measure)
                    w = max(w, float(np.abs(mean).max()))
        worst[measure] = w
    ok = max(worst.values()) <= 1e-12
    return Outcome(2, "Martingale", ok,
                   f"max |<dp>| linear={worst['linear']:.2e} product={worst['product']:.2e} (<=1e-12)")


def covariance() -> Outcome:
    gen = _gen(3)
    eta = 0.05
    tol = 5 * eta
    elementwise = 0.0
    scaled = 0.0
    for n in (2, 3, 4):
        for _ in range(100):
            p = _interior(gen, n)
            _, c = walk.step_moments_enumerated(p, eta)
            a = walk.covariance_analytic(p, eta)
            if n == 2:
                elementwise = max(elementwise, float((np.abs(c - a) / np.abs(a)).max()))
            d = np.sqrt(np.diag(a))
            scaled = max(scaled, float((np.abs(c - a) / np.outer(d, d)).max()))
    ok = elementwise <= tol and scaled <= tol
    return Outcome(3, "Covariance", ok,
                   f"n=2 elementwise rel={elementwise:.2e}, n=2..4 scaled by sqrt(CjjCkk)={scaled:.2e} (<={tol})")


def entropy_drift() -> Outcome:
    gen = _gen(4)
    eta = 0.05
    worst = 0.0
    positive = 0
    for i in range(1000):
        p = _interior(gen, 2 + i % 3)
        exact = walk.expected_entropy_change(p, eta)
        drift = walk.entropy_drift_analytic(p, eta)
        positive += exact >= 0
        worst = max(worst, abs(exact - drift) / abs(drift))
    ok = positive == 0 and worst <= 10 * eta
    return Outcome(4, "Entropy drift", ok,
                   f"non-negative dS at {positive}/1000 points, worst rel={worst:.2e} (<={10 * eta})")


def decoherence() -> Outcome:
    # three channels: with two, b_1 b_2 is the same number on every sample
    n, two_x, eta, count = 3, 400, 0.05, 100_000
    params = ApparatusParams.uniform(n, two_x, eta, SEED)
    t0 = time.perf_counter()
    values = np.empty(count)
    for lo in range(0, count, 10_000):
        e = noise_block(params, lo, 10_000)
        logb2 = simplified_log_b_squared(eta, e)
        values[lo : lo + 10_000] = np.exp(0.5 * (logb2[:, 0] + logb2[:, 1]))
    elapsed = time.perf_counter() - t0
    mean = float(values.mean())
    se = float(values.std(ddof=1) / math.sqrt(count))
    z = abs(mean - math.exp(-1.0)) / se
    ok = z <= 3.0 and elapsed < 30.0
    return Outcome(5, "Decoherence", ok,
                   f"<b1 b2>={mean:.5f} SE={se:.1e} |mean-1/e|/SE={z:.2f} (<=3), {elapsed:.2f} s (<30 s)")


def pointer_moments() -> Outcome:
    worst = 0.0
    for eta in (0.05, 0.1, 0.3):
        for X in (10, 100, 10_000):
            total, mean, var = ensemble.pointer_moments(X, eta)
            target_var = X * (1 - eta**2) / 2
            worst = max(worst, abs(mean - X * eta) / (X * eta), abs(var - target_var) / target_var)
    return Outcome(6, "Pointer moments", worst <= 1e-8, f"worst rel error={worst:.2e} (<=1e-8)")


def multimodality() -> Outcome:
    psi = [0.5, 0.5]
    counts = tuple(count_modes(psi, Z) for Z in (0.25, 4.0, 25.0))
    Z = 25.0
    worst = 0.0
    for k, center in enumerate(ensemble.gaussian_centers(2, Z)):
        cond = ensemble.gaussian_conditional_probabilities(ensemble.ZVector(center, Z), psi)
        worst = max(worst, float(np.abs(cond - np.eye(2)[k]).max()))
    ok = counts == (1, 2, 2) and worst <= 1e-6
    return Outcome(7, "Multimodality", ok,
                   f"modes at Z=0.25,4,25: {counts} (expect (1, 2, 2)); max |p_j(z^k)-delta_jk|={worst:.1e} (<=1e-6)")


def _binned_table(a: np.ndarray, b: np.ndarray, width: int, floor: int = 10) -> np.ndarray:
    keys_a = [tuple(r) for r in np.floor_divide(a, width)]
    keys_b = [tuple(r) for r in np.floor_divide(b, width)]
    cells = sorted(set(keys_a) | set(keys_b))
    index = {c: i for i, c in enumerate(cells)}
    table = np.zeros((2, len(cells)))
    for row, keys in enumerate((keys_a, keys_b)):
        for k in keys:
            table[row, index[k]] += 1
    big = table.sum(axis=0) >= floor
    return np.column_stack([table[:, big], table[:, ~big].sum(axis=1)])


def sampler_equivalence() -> Outcome:
    count, eta = 10_000, 0.1
    probs = [0.6, 0.4]
    params = ApparatusParams.uniform(2, 200, eta, SEED)
    psi = AmplitudeVector.from_probabilities(probs)
    walked = np.array([r.pointer for r in walk.run_walks(psi, params, count, measure="product")])
    _, sampled = ensemble.sample_ensemble(psi, params, count)
    table = _binned_table(walked, sampled, 4)
    table = table[:, table.sum(axis=0) > 0]
    stat, pvalue, dof, _ = chi2_contingency(table)
    return Outcome(8, "Sampler/dynamics equivalence", pvalue > 0.01,
                   f"chi2={stat:.1f} dof={dof} p={pvalue:.3f} (>0.01)")


def sink_reductions() -> Outcome:
    gen = _gen(9)
    limit = 0.0
    equal = 0.0
    witnessed = 0
    smallest_s = math.inf
    for _ in range(100):
        n = int(gen.integers(2, 6))
        m = gen.normal(size=n) + 1j * gen.normal(size=n)
        f = gen.uniform(0.2, 2.0, n) * np.exp(1j * gen.uniform(0, 2 * math.pi, n))
        raw = RawAmplitudes(m)
        s_unit = float(np.sum(np.abs(f * m) ** 2))
        s_target = 10 ** gen.uniform(3, 9)
        ss = SourceSinkParams(math.sqrt(s_target / s_unit), f)
        smallest_s = min(smallest_s, abs(ss.j0) ** 2 * s_unit)
        limit = max(limit, source_limit_error(raw, ss))

        common = np.full(n, gen.normal() + 1j * gen.normal())
        d = np.abs(strong_source_density(raw, common).rho - pure_state(normalize(raw)).rho).max()
        equal = max(equal, float(d))

        doubled = m.copy()
        doubled[0] *= math.sqrt(2.0)
        before = strong_source_density(raw, f).rho[1, 1].real
        after = strong_source_density(RawAmplitudes(doubled), f).rho[1, 1].real
        witnessed += after < before
    ok = smallest_s >= 1e3 and limit <= 1e-12 and equal <= 1e-12 and witnessed == 100
    return Outcome(9, "Source/sink reductions", ok,
                   f"strong-source err={limit:.1e}, equal-sink err={equal:.1e} (<=1e-12), "
                   f"witness strict on {witnessed}/100")


def partial_fractions() -> Outcome:
    gen = _gen(10)
    t0 = time.perf_counter()
    worst = 0.0
    for m in range(1, 7):
        for _ in range(100):
            lhs, rhs = partial_fraction_identity_check(gen.uniform(0.01, 100.0, m))
            worst = max(worst, abs(lhs - rhs) / abs(rhs))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-12 and elapsed < 1.0
    return Outcome(10, "Partial-fraction identity", ok,
                   f"worst rel={worst:.1e} (<=1e-12), {elapsed:.3f} s (<1 s)")


def gedanken_identity() -> Outcome:
    gen = _gen(11)
    worst = 0.0
    for _ in range(100):
        setup = GedankenSetup.from_probabilities(_interior(gen, 3), gen.uniform(0, 0.999), int(gen.choice([1, -1])))
        worst = max(worst, float(np.abs(np.array(unbiased_average(setup)) - setup.probabilities).max()))
    return Outcome(11, "Gedanken identity", worst <= 1e-14, f"worst abs={worst:.1e} (<=1e-14)")


def ensemble_entropy() -> Outcome:
    X, eta = 20, 0.05
    closed = ensemble.ensemble_entropy([1.0], X, eta)
    exact = ensemble.ensemble_entropy_exact([1.0], X, eta)
    slack = 10 * X * eta**4
    gap = abs(closed - exact)
    return Outcome(12, "Ensemble entropy", gap <= slack, f"|closed-exact|={gap:.2e} (<={slack:.2e})")


CRITERIA = [
    born_rule,
    martingale,
    covariance,
    entropy_drift,
    decoherence,
    pointer_moments,
    multimodality,
    sampler_equivalence,
    sink_reductions,
    partial_fractions,
    gedanken_identity,
    ensemble_entropy,
]


@pytest.mark.parametrize("criterion", CRITERIA, ids=[c.__name__ for c in CRITERIA])
def test_acceptance(criterion, capsys):
    outcome = criterion()
    with capsys.disabled():
        print("\n" + outcome.line)
    assert outcome.passed, outcome.line


if __name__ == "__main__":
    outcomes = [c() for c in CRITERIA]
    for o in outcomes:
        print(o.line)
    raise SystemExit(0 if all(o.passed for o in outcomes) else 1)
