"""Closed-form ensemble statistics of the simplified apparatus.

The pointer of a run is the vector of net sign counts
``X_j = (1/2) sum_x e_jx``; with ``2X`` stages each ``X_j`` is an integer in
``[-X, X]``.  Conditional on channel ``j`` the count of the own row is a
shifted binomial ``P(Y)`` biased towards ``+X eta`` and every other row is
biased towards ``-X eta``.  The ensemble pointer law is the mixture
``Q = sum_j |psi_j|^2 P_j``.

Two detector layouts are supported: ``"n"`` (one detector row per channel)
and ``"n-1"`` (the last channel has no detector; its pointer entry is 0).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np
from scipy.special import gammaln, logsumexp, ndtr
from scipy.stats import binom

from . import rng
from .apparatus import ApparatusParams
from .errors import UnreachablePointer
from .state import AmplitudeVector

DETECTORS = ("n", "n-1")


def _probs(psi) -> np.ndarray:
    if isinstance(psi, AmplitudeVector):
        return psi.probabilities
    p = np.asarray(psi, dtype=float)
    if p.ndim != 1 or np.any(p < 0) or abs(p.sum() - 1.0) > 1e-9:
        raise ValueError("expected an amplitude vector or a probability vector")
    return p


def _check_detectors(detectors):
    if detectors not in DETECTORS:
        raise ValueError(f"detectors must be one of {DETECTORS}")


@dataclass(frozen=True)
class PointerVector:
    counts: np.ndarray
    X: int

    def __post_init__(self):
        c = np.array(self.counts, dtype=np.int64, copy=True)
        if c.ndim != 1:
            raise ValueError("pointer counts must be a vector")
        if self.X < 1:
            raise ValueError("X must be >= 1")
        c.setflags(write=False)
        object.__setattr__(self, "counts", c)

    @property
    def n(self) -> int:
        return self.counts.size

    @property
    def in_support(self) -> bool:
        return bool(np.all(np.abs(self.counts) <= self.X))

    @classmethod
    def from_signs(cls, e) -> "PointerVector":
        e = np.asarray(e)
        return cls(e.sum(axis=1, dtype=np.int64) // 2, e.shape[1] // 2)


@dataclass(frozen=True)
class ZVector:
    z: np.ndarray
    Z: float

    def __post_init__(self):
        if not self.Z > 0:
            raise ValueError("separation parameter Z must be positive")
        z = np.array(self.z, dtype=float, copy=True)
        z.setflags(write=False)
        object.__setattr__(self, "z", z)


@dataclass(frozen=True)
class PairCorrelationResult:
    mean_eps: float
    covariance: float


# -- one-axis binomial --------------------------------------------------------


def log_binomial_pointer(X: int, eta: float, Y):
    """``log P(Y)``; ``-inf`` outside ``|Y| <= X``.

    Uses the binomial pmf from scipy (accurate to a few ulps even for
    ``X ~ 10^6``, where a plain log-gamma difference loses ~``X`` ulps) and
    falls back to log-gamma in the far tails where the pmf underflows.
    """
    if not 0.0 <= eta < 1.0:
        raise ValueError("eta must satisfy 0 <= eta < 1")
    Y = np.asarray(Y)
    inside = np.abs(Y) <= X
    Ys = np.where(inside, Y, 0).astype(float)
    pmf = binom.pmf(X + Ys, 2 * X, 0.5 * (1.0 + eta))
    with np.errstate(divide="ignore"):
        lp = np.log(pmf)
    tail = pmf < 1e-280
    if np.any(tail):
        lg = (
            gammaln(2 * X + 1)
            - gammaln(X + Ys + 1)
            - gammaln(X - Ys + 1)
            + (X + Ys) * math.log((1 + eta) / 2)
            + (X - Ys) * math.log((1 - eta) / 2)
        )
        lp = np.where(tail, lg, lp)
    return np.where(inside, lp, -np.inf)


def binomial_pointer(X: int, eta: float, Y: int) -> float:
    """``P(Y) = C(2X, X+Y) ((1+eta)/2)^(X+Y) ((1-eta)/2)^(X-Y)``."""
    return float(np.exp(log_binomial_pointer(X, eta, Y)))


def pointer_pmf(X: int, eta: float) -> tuple[np.ndarray, np.ndarray]:
    """Support ``Y = -X..X`` and ``P(Y)`` on it."""
    Y = np.arange(-X, X + 1)
    return Y, np.exp(log_binomial_pointer(X, eta, Y))


def pointer_moments(X: int, eta: float) -> tuple[float, float, float]:
    """``(sum P, mean, variance)`` by direct summation over the support.

    The variance is ``X (1 - eta^2) / 2``; it tends to ``X/2`` for small eta.
    """
    Y, P = pointer_pmf(X, eta)
    total = math.fsum(P)
    mean = math.fsum(P * Y)
    # central second moment avoids cancellation against (X eta)^2
    var = math.fsum(P * (Y - mean) ** 2)
    return total, mean, var


# -- channel laws on the pointer lattice ---------------------------------------


def _axis_logs(pointer: PointerVector, eta: float, j: int, detectors: str) -> float:
    counts = pointer.counts
    n = counts.size
    X = pointer.X
    if detectors == "n":
        signs = -np.ones(n)
        signs[j] = 1.0
        return float(np.sum(log_binomial_pointer(X, eta, signs * counts)))
    # n-1 detectors: last entry is pinned at 0
    if counts[-1] != 0:
        return -math.inf
    head = counts[:-1]
    signs = -np.ones(n - 1)
    if j < n - 1:
        signs[j] = 1.0
    return float(np.sum(log_binomial_pointer(X, eta, signs * head)))


def log_channel_distribution(pointer: PointerVector, eta: float, j: int, detectors: str = "n") -> float:
    _check_detectors(detectors)
    if not 0 <= j < pointer.n:
        raise ValueError(f"channel {j} outside 0..{pointer.n - 1}")
    return _axis_logs(pointer, eta, j, detectors)


def channel_distribution(pointer: PointerVector, eta: float, j: int, detectors: str = "n") -> float:
    """``P_j(X) = P(X_j) prod_{k!=j} P(-X_k)`` (or its ``n-1`` detector form)."""
    return math.exp(log_channel_distribution(pointer, eta, j, detectors))


def _log_weighted(pointer, psi, eta, detectors):
    p = _probs(psi)
    if p.size != pointer.n:
        raise ValueError(f"psi has {p.size} channels, pointer has {pointer.n}")
    with np.errstate(divide="ignore"):
        lp = np.log(p)
    return np.array([log_channel_distribution(pointer, eta, j, detectors) for j in range(p.size)]) + lp


def outcome_distribution(pointer: PointerVector, psi, eta: float, detectors: str = "n") -> float:
    """Mixture ``Q(X) = sum_j P_j(X) |psi_j|^2``."""
    terms = _log_weighted(pointer, psi, eta, detectors)
    if np.all(np.isneginf(terms)):
        return 0.0
    return float(np.exp(logsumexp(terms)))


def conditional_channel_probabilities(pointer: PointerVector, psi, eta: float, detectors: str = "n") -> np.ndarray:
    """``p_j(X) = P_j |psi_j|^2 / sum_l P_l |psi_l|^2`` for all ``j``."""
    terms = _log_weighted(pointer, psi, eta, detectors)
    if np.all(np.isneginf(terms)):
        raise UnreachablePointer(f"unreachable pointer {pointer.counts.tolist()}: Q = 0")
    return np.exp(terms - logsumexp(terms))


def conditional_channel_probability(pointer: PointerVector, psi, eta: float, detectors: str, j: int) -> float:
    return float(conditional_channel_probabilities(pointer, psi, eta, detectors)[j])


def outcome_lattice(psi, X: int, eta: float, detectors: str = "n") -> tuple[np.ndarray, np.ndarray]:
    """All lattice points and their ``Q`` values (small cases only).

    Returns ``(points, Q)`` with ``points`` of shape ``(cells, n)``.
    """
    _check_detectors(detectors)
    p = _probs(psi)
    n = p.size
    free = n if detectors == "n" else n - 1
    if (2 * X + 1) ** free > 2_000_000:
        raise ValueError("lattice too large to enumerate")
    Y, P = pointer_pmf(X, eta)
    Pm = P[::-1]  # P(-Y) on the same grid
    grids = np.meshgrid(*([Y] * free), indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=1)
    if detectors == "n-1":
        pts = np.hstack([pts, np.zeros((pts.shape[0], 1), dtype=pts.dtype)])
    idx = pts[:, :free] + X
    Q = np.zeros(pts.shape[0])
    for j in range(n):
        f = np.ones(pts.shape[0])
        for k in range(free):
            f *= (P if k == j else Pm)[idx[:, k]]
        Q += p[j] * f
    return pts, Q


# -- continuous pointer variables ----------------------------------------------


def z_scale(X: int, eta: float) -> float:
    """Factor ``X^(-3/4) eta^(-1/2)`` mapping counts to ``z``."""
    return X ** -0.75 * eta ** -0.5


def separation(X: int, eta: float) -> float:
    """``Z = eta sqrt(X)``."""
    return eta * math.sqrt(X)


def z_transform(pointer: PointerVector, eta: float) -> ZVector:
    if pointer.X < 1:
        raise ValueError("X must be >= 1")
    return ZVector(z_scale(pointer.X, eta) * pointer.counts, separation(pointer.X, eta))


def z_from_signs(e, eta: float) -> ZVector:
    """``z_j = (1/2) X^(-3/4) eta^(-1/2) sum_x e_jx`` straight from signs."""
    e = np.asarray(e, dtype=float)
    X = e.shape[-1] // 2
    return ZVector(0.5 * z_scale(X, eta) * e.sum(axis=-1), separation(X, eta))


def gaussian_centers(n: int, Z: float, detectors: str = "n") -> np.ndarray:
    """Mode centres ``z^(j)_k = sqrt(Z) (2 delta_jk - 1)``, one row per channel.

    With ``n-1`` detectors the rows have ``n-1`` coordinates and the last
    channel sits at ``-sqrt(Z) (1, ..., 1)``.
    """
    _check_detectors(detectors)
    dim = n if detectors == "n" else n - 1
    return math.sqrt(Z) * (2.0 * np.eye(n)[:, :dim] - 1.0)


def _log_gaussian_terms(z, probs, Z, detectors):
    z = np.asarray(z, dtype=float)
    n = probs.size
    centers = gaussian_centers(n, Z, detectors)
    dim = centers.shape[1]
    if z.shape[-1] != dim:
        raise ValueError(f"z has {z.shape[-1]} coordinates, expected {dim}")
    d2 = ((z[..., None, :] - centers) ** 2).sum(axis=-1)
    with np.errstate(divide="ignore"):
        lp = np.log(probs)
    return lp + 0.5 * dim * math.log(Z / math.pi) - Z * d2


def gaussian_pointer_density(zvec: ZVector, psi, detectors: str = "n") -> float:
    """``q(z) = sum_j |psi_j|^2 (Z/pi)^(d/2) exp(-Z |z - z^(j)|^2)``.

    ``d`` is the number of detector rows, so the density integrates to 1 in
    both layouts.
    """
    terms = _log_gaussian_terms(zvec.z, _probs(psi), zvec.Z, detectors)
    return float(np.exp(logsumexp(terms, axis=-1)))


def gaussian_log_density(z, psi, Z: float, detectors: str = "n"):
    """Vectorized ``log q(z)``; ``z`` has shape ``(..., d)``."""
    return logsumexp(_log_gaussian_terms(z, _probs(psi), Z, detectors), axis=-1)


def gaussian_conditional_probabilities(zvec: ZVector, psi, detectors: str = "n") -> np.ndarray:
    terms = _log_gaussian_terms(zvec.z, _probs(psi), zvec.Z, detectors)
    return np.exp(terms - logsumexp(terms, axis=-1, keepdims=True))


def gaussian_axis_cdf(z, Z: float, center: float):
    """CDF of one Gaussian factor ``sqrt(Z/pi) exp(-Z (z - c)^2)``."""
    return ndtr((np.asarray(z, dtype=float) - center) * math.sqrt(2.0 * Z))


# -- sampling --------------------------------------------------------------------


def sample_ensemble(psi, params: ApparatusParams, count: int, start: int = 0, detectors: str = "n"):
    """Draw ``(channel, pointer)`` pairs from the mixture ``Q``.

    Sample ``i`` uses only the stream keyed by ``(params.seed, i)``.  Returns
    ``(channels, counts)`` with ``counts`` of shape ``(count, n)``.
    """
    _check_detectors(detectors)
    eta = params.eta_scalar
    p = _probs(psi)
    n = p.size
    if n != params.n:
        raise ValueError(f"psi has {n} channels, apparatus has {params.n}")
    X = params.half_steps
    cdf = np.cumsum(p)
    channels = np.empty(count, dtype=np.int64)
    counts = np.zeros((count, n), dtype=np.int64)
    free = n if detectors == "n" else n - 1
    for i in range(count):
        gen = rng.stream(params.seed, rng.ENSEMBLE, start + i)
        u = gen.random()
        j = min(int(np.searchsorted(cdf, u * cdf[-1], side="right")), n - 1)
        while p[j] == 0.0:  # u landed on a zero-width cell boundary
            j -= 1
        y = gen.binomial(2 * X, (1.0 + eta) / 2.0, size=free) - X
        row = -y
        if j < free:
            row[j] = y[j]
        counts[i, :free] = row
        channels[i] = j
    return channels, counts


def ensemble_sampler(psi, params: ApparatusParams, count: int, start: int = 0,
                     detectors: str = "n") -> Iterator[tuple[int, PointerVector]]:
    channels, counts = sample_ensemble(psi, params, count, start, detectors)
    for j, c in zip(channels, counts):
        yield int(j), PointerVector(c, params.half_steps)


# -- entropy ------------------------------------------------------------------


def ensemble_entropy(psi, X: int, eta: float, n: int | None = None) -> float:
    """Second-order ensemble entropy ``H(psi) + 2 X n ln 2 - X eta^2``."""
    p = _probs(psi)
    n = p.size if n is None else n
    nz = p[p > 0]
    return float(-(nz * np.log(nz)).sum() + 2 * X * n * math.log(2.0) - X * eta**2)


def ensemble_entropy_exact(psi, X: int, eta: float) -> float:
    """Exact entropy of the final ensemble over (channel, sign table).

    The sign tables of channel ``j`` have probability
    ``|psi_j|^2 2^(-2nX) |b_j(e)|^2``; the average of ``-log`` is evaluated by
    summing over net counts with binomial multiplicities, one axis at a time.
    For ``n = 1`` this reproduces the per-channel average term by term; for
    ``n > 1`` the other detector rows also lose entropy, so the deficit is
    ``n X eta^2`` at second order rather than ``X eta^2``.
    """
    p = _probs(psi)
    n = p.size
    Y, P = pointer_pmf(X, eta)
    # -log of one row's factor prod_x (1 + eta e_x) for net count Y, averaged
    # under the row's own law; other rows contribute the mirrored expectation
    row_log = (X + Y) * math.log1p(eta) + (X - Y) * math.log1p(-eta)
    mean_row_log = math.fsum(P * row_log)
    nz = p[p > 0]
    return float(-(nz * np.log(nz)).sum() + 2 * n * X * math.log(2.0) - n * mean_row_log)


# -- two-variable correlation ----------------------------------------------


def pair_distribution(p: float, eta: float) -> dict[tuple[int, int], float]:
    """Joint law of two +-1 variables whose positive values favour outcome a."""
    out = {}
    for s in (1, -1):
        for t in (1, -1):
            out[(s, t)] = 0.25 * (1 + s * eta) * (1 + t * eta) * p + 0.25 * (1 - s * eta) * (1 - t * eta) * (1 - p)
    return out


def pair_correlation(p: float, eta: float) -> PairCorrelationResult:
    """Mean ``(2p - 1) eta`` and covariance ``4 p (1 - p) eta^2``.

    The closed form is checked against the four-cell enumeration on every
    call.
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0, 1]")
    mean = (2 * p - 1) * eta
    cov = 4 * p * (1 - p) * eta**2
    dist = pair_distribution(p, eta)
    m1 = sum(w * s for (s, _), w in dist.items())
    m12 = sum(w * s * t for (s, t), w in dist.items())
    if abs(m1 - mean) > 1e-14 or abs(m12 - m1 * m1 - cov) > 1e-14:
        raise ArithmeticError("pair correlation closed form disagrees with enumeration")
    return PairCorrelationResult(mean, cov)
