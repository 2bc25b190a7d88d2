"""Stochastic apparatus: +-1 noise, channel enhancement factors, correlations.

The apparatus is a table of signs ``e[j, x]`` (channel ``j``, propagation
stage ``x``).  A positive sign strengthens channel ``j`` at stage ``x`` and
weakens every other channel; a negative sign does the opposite.  The
cumulative factor of channel ``j`` after ``x`` stages is a product over
stages, so everything here is accumulated as a sum of logarithms.

Indexing is zero-based throughout: stage ``x`` in the text corresponds to
column ``x - 1`` of the sign array.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from . import rng

C_BOUND = 0.1
ETA_MAX = 0.5


def _readonly(a, dtype=float) -> np.ndarray:
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class ApparatusParams:
    """Couplings ``eta[j, x]`` and scale factors ``c[j, x]`` of an apparatus.

    ``eta`` must lie strictly inside ``(0, 1/2)`` so that every step weight of
    the walk stays positive; ``c`` must satisfy ``|c - 1| <= c_bound``.
    """

    eta: np.ndarray
    c: np.ndarray
    seed: int = 0
    c_bound: float = C_BOUND

    def __post_init__(self):
        eta = _readonly(self.eta)
        c = _readonly(self.c)
        if eta.ndim != 2:
            raise ValueError("eta must be an n x 2X matrix")
        if c.shape != eta.shape:
            raise ValueError(f"c has shape {c.shape}, expected {eta.shape}")
        n, two_x = eta.shape
        if n < 1:
            raise ValueError("need at least one channel")
        if two_x < 2 or two_x % 2:
            raise ValueError(f"step count 2X={two_x} must be even and >= 2")
        if not np.all((eta > 0) & (eta < ETA_MAX)):
            raise ValueError("couplings must satisfy 0 < eta < 1/2")
        if not np.all(c > 0) or np.any(np.abs(c - 1.0) > self.c_bound * (1 + 1e-12)):
            raise ValueError(f"scale factors must satisfy |c - 1| <= {self.c_bound}")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        object.__setattr__(self, "eta", eta)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "seed", int(self.seed))

    @classmethod
    def uniform(cls, n: int, two_x: int, eta: float, seed: int = 0) -> "ApparatusParams":
        """The simplified model: one coupling for all (j, x), all ``c = 1``."""
        return cls(np.full((n, two_x), float(eta)), np.ones((n, two_x)), seed)

    @property
    def n(self) -> int:
        return self.eta.shape[0]

    @property
    def two_x(self) -> int:
        return self.eta.shape[1]

    @property
    def half_steps(self) -> int:
        return self.two_x // 2

    @property
    def is_uniform(self) -> bool:
        return bool(np.all(self.c == 1.0) and np.all(self.eta == self.eta.flat[0]))

    @property
    def eta_scalar(self) -> float:
        if not self.is_uniform:
            raise ValueError("apparatus is not of the uniform (simplified) type")
        return float(self.eta.flat[0])


@dataclass(frozen=True)
class NoiseRealization:
    """One sign table ``e`` of shape ``(n, 2X)`` with entries exactly +-1."""

    e: np.ndarray

    def __post_init__(self):
        e = _readonly(self.e, dtype=np.int8)
        if e.ndim != 2:
            raise ValueError("noise must be an n x 2X array")
        if not np.all(np.abs(e) == 1):
            raise ValueError("noise entries must be +1 or -1")
        object.__setattr__(self, "e", e)

    @property
    def n(self) -> int:
        return self.e.shape[0]

    @property
    def two_x(self) -> int:
        return self.e.shape[1]

    def prefix(self, x: int) -> np.ndarray:
        """Signs of the first ``x`` stages (a view)."""
        return self.e[:, :x]

    def pointer(self) -> np.ndarray:
        """Net sign counts ``X_j = (1/2) sum_x e[j, x]`` (integers)."""
        return self.e.sum(axis=1, dtype=np.int64) // 2


@dataclass(frozen=True)
class ChannelFactors:
    """``log |b_j|`` after some number of stages, one entry per channel."""

    log_b: np.ndarray

    def __post_init__(self):
        lb = _readonly(self.log_b)
        if not np.all(np.isfinite(lb)):
            raise ValueError("channel factors must be finite")
        object.__setattr__(self, "log_b", lb)

    @property
    def b(self) -> np.ndarray:
        return np.exp(self.log_b)

    @property
    def b_squared(self) -> np.ndarray:
        return np.exp(2.0 * self.log_b)


def noise_block(params: ApparatusParams, start: int, count: int) -> np.ndarray:
    """Sign tables for realizations ``start .. start+count-1``, shape
    ``(count, n, 2X)``."""
    out = np.empty((count, params.n, params.two_x), dtype=np.int8)
    for i in range(count):
        out[i] = rng.signs(rng.stream(params.seed, rng.NOISE, start + i), (params.n, params.two_x))
    return out


def sample_noise(params: ApparatusParams, count: int, start: int = 0) -> Iterator[NoiseRealization]:
    """Yield ``count`` uniformly distributed noise tables.

    Realization ``i`` depends only on ``(params.seed, i)``.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    for i in range(start, start + count):
        gen = rng.stream(params.seed, rng.NOISE, i)
        yield NoiseRealization(rng.signs(gen, (params.n, params.two_x)))


def _log_step_terms(eta, e):
    """``log(1 + eta e/2 - eta^2/8)`` and ``log(1 - eta e/2 - eta^2/8)``."""
    eta = np.asarray(eta, dtype=float)
    e = np.asarray(e, dtype=float)
    q = -0.125 * eta * eta
    return np.log1p(0.5 * eta * e + q), np.log1p(-0.5 * eta * e + q)


def channel_factor_step(params: ApparatusParams, x: int, column, j: int) -> float:
    """Multiplicative factor ``C_jx`` of channel ``j`` at stage ``x`` (1-based).

    ``C_jx = c_jx (1 + eta_jx e_jx/2 - eta_jx^2/8)
             * prod_{k != j} c_kx (1 - eta_kx e_kx/2 - eta_kx^2/8)``
    """
    if not 1 <= x <= params.two_x:
        raise ValueError(f"stage {x} outside 1..{params.two_x}")
    eta = params.eta[:, x - 1]
    c = params.c[:, x - 1]
    col = np.asarray(column, dtype=float)
    up, down = _log_step_terms(eta, col)
    log_c = np.log(c)
    total = log_c.sum() + down.sum() - down[j] + up[j]
    return float(math.exp(total))


def log_factors(eta, c, e) -> np.ndarray:
    """``log C_jx`` for couplings ``eta``/``c`` of shape ``(n, x)`` and signs
    ``e`` of shape ``(..., n, x)``."""
    up, down = _log_step_terms(eta, e)
    column_total = (np.log(c) + down).sum(axis=-2, keepdims=True)
    return column_total - down + up


def log_factor_table(params: ApparatusParams, e: np.ndarray) -> np.ndarray:
    """``log C_jx`` for every channel and the first ``e.shape[-1]`` stages."""
    x = e.shape[-1]
    return log_factors(params.eta[:, :x], params.c[:, :x], e)


def propagation_factors(params: ApparatusParams, noise: NoiseRealization, x: int) -> ChannelFactors:
    """Normalized cumulative factors ``log b_jx`` after ``x`` stages.

    ``B_jx`` is the running product of ``C_jy`` for ``y <= x`` and
    ``b_jx = B_jx / B_x`` with ``B_x = prod_{y<=x} prod_l c_ly``.
    """
    if not 0 <= x <= params.two_x:
        raise ValueError(f"stage {x} outside 0..{params.two_x}")
    if x == 0:
        return ChannelFactors(np.zeros(params.n))
    table = log_factor_table(params, noise.e[:, :x])
    log_bx = np.log(params.c[:, :x]).sum()
    return ChannelFactors(table.sum(axis=-1) - log_bx)


def simplified_log_b_squared(eta: float, e: np.ndarray) -> np.ndarray:
    """``log |b_j|^2`` of the simplified model for every channel.

    ``|b_j|^2 = prod_x (1 + eta e_jx) prod_{k != j} (1 - eta e_kx)``; the
    product only depends on how many signs of each row are positive.
    ``e`` has shape ``(..., n, 2X)``; the result has shape ``(..., n)``.
    """
    if not 0 < eta < ETA_MAX:
        raise ValueError("eta must satisfy 0 < eta < 1/2")
    e = np.asarray(e)
    two_x = e.shape[-1]
    plus = (e > 0).sum(axis=-1)
    minus = two_x - plus
    lp, lm = math.log1p(eta), math.log1p(-eta)
    own = plus * lp + minus * lm
    other = plus * lm + minus * lp
    return own + other.sum(axis=-1, keepdims=True) - other


def simplified_b_squared(eta: float, noise: NoiseRealization, j: int) -> float:
    return float(np.exp(simplified_log_b_squared(eta, noise.e)[j]))


def cross_correlation_analytic(eta_matrix, j: int, k: int) -> float:
    """Normalized correlation ``<B_j B_k> / B^2``; 1 on the diagonal."""
    if j == k:
        return 1.0
    eta = np.asarray(eta_matrix, dtype=float)
    return float(math.exp(-0.5 * float(np.sum(eta[j] ** 2 + eta[k] ** 2))))


def spin_overlap(n_spins: int, delta_theta: float) -> tuple[float, float]:
    """Overlap of ``N`` spins before and after a rotation by ``delta_theta``.

    Returns ``(cos(dtheta/2)^(2N), exp(-N dtheta^2 / 4))``.  The overlap is
    negligible once ``N dtheta^2 >> 1``.
    """
    if n_spins < 1:
        raise ValueError("need at least one spin")
    if not 0.0 <= delta_theta < math.pi:
        raise ValueError("rotation angle must lie in [0, pi)")
    exact = math.exp(2.0 * n_spins * math.log(math.cos(0.5 * delta_theta)))
    approx = math.exp(-0.25 * n_spins * delta_theta * delta_theta)
    return exact, approx
