"""Self-check suite run by ``stochmeas verify``.

Each check is cheap, deterministic given the seed, and reports a measured
error alongside its tolerance.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Callable

import numpy as np

from . import ensemble, rng, walk
from .eikonal import partial_fraction_identity_check
from .gedanken import GedankenSetup, unbiased_average
from .sinks import strong_source_density
from .state import RawAmplitudes, normalize, pure_state


@dataclass
class CheckResult:
    name: str
    passed: bool
    error: float
    tolerance: float

    def as_dict(self) -> dict:
        return asdict(self)


def _dirichlet(gen, n):
    return gen.dirichlet(np.ones(n))


def check_martingale(gen) -> CheckResult:
    worst = 0.0
    for n in (2, 3, 4):
        for eta in (0.05, 0.2):
            for _ in range(50):
                mean, _ = walk.step_moments_enumerated(_dirichlet(gen, n), eta)
                worst = max(worst, float(np.abs(mean).max()))
    return CheckResult("martingale", worst <= 1e-12, worst, 1e-12)


def check_step_weights(gen) -> CheckResult:
    worst = 0.0
    for n in range(1, 7):
        E = walk.sign_columns(n)
        p = _dirichlet(gen, n)
        total = math.fsum(walk.step_weight(p, col, 0.3) for col in E)
        worst = max(worst, abs(total - 1.0))
    return CheckResult("step_weight_normalization", worst <= 1e-14, worst, 1e-14)


def check_partial_fractions(gen) -> CheckResult:
    worst = 0.0
    for m in range(1, 7):
        for _ in range(10):
            lhs, rhs = partial_fraction_identity_check(gen.uniform(0.1, 10.0, m))
            worst = max(worst, abs(lhs - rhs) / rhs)
    return CheckResult("partial_fraction_identity", worst <= 1e-12, worst, 1e-12)


def check_pair_correlation(gen) -> CheckResult:
    worst = 0.0
    for _ in range(20):
        p, eta = gen.uniform(), gen.uniform(0, 0.5)
        res = ensemble.pair_correlation(p, eta)
        dist = ensemble.pair_distribution(p, eta)
        m = sum(w * s for (s, _), w in dist.items())
        c = sum(w * s * t for (s, t), w in dist.items()) - m * m
        worst = max(worst, abs(m - res.mean_eps), abs(c - res.covariance))
    return CheckResult("pair_correlation", worst <= 1e-14, worst, 1e-14)


def check_pointer_normalization(gen) -> CheckResult:
    worst = 0.0
    for X in (1, 10, 100):
        total, mean, var = ensemble.pointer_moments(X, 0.1)
        worst = max(worst, abs(total - 1), abs(mean - X * 0.1) / (X * 0.1), abs(var - X * 0.99 / 2) / (X * 0.99 / 2))
    _, Q = ensemble.outcome_lattice([0.3, 0.7], 6, 0.1)
    worst = max(worst, abs(math.fsum(Q) - 1.0))
    return CheckResult("pointer_normalization", worst <= 1e-10, worst, 1e-10)


def check_gedanken(gen) -> CheckResult:
    worst = 0.0
    for _ in range(20):
        p = _dirichlet(gen, 3)
        s = GedankenSetup.from_probabilities(p, gen.uniform(0, 0.99), 1)
        worst = max(worst, float(np.abs(np.array(unbiased_average(s)) - s.probabilities).max()))
    return CheckResult("gedanken_unbiased", worst <= 1e-14, worst, 1e-14)


def check_equal_sinks(gen) -> CheckResult:
    worst = 0.0
    for _ in range(20):
        m = gen.normal(size=4) + 1j * gen.normal(size=4)
        raw = RawAmplitudes(m)
        f = np.full(4, gen.normal() + 1j * gen.normal())
        d = np.abs(strong_source_density(raw, f).rho - pure_state(normalize(raw)).rho).max()
        worst = max(worst, float(d))
    return CheckResult("equal_sink_reduction", worst <= 1e-12, worst, 1e-12)


CHECKS: list[Callable] = [
    check_martingale,
    check_step_weights,
    check_partial_fractions,
    check_pair_correlation,
    check_pointer_normalization,
    check_gedanken,
    check_equal_sinks,
]


def run_all(seed: int = 0) -> list[CheckResult]:
    return [check(rng.stream(seed, rng.PROPERTY, i)) for i, check in enumerate(CHECKS)]
