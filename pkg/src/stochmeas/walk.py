"""Single-measurement dynamics: a random walk on the probability simplex.

At every stage one column of signs ``e[:, x]`` is drawn and the channel
probabilities are updated.  Three sampling measures are available:

``"linear"``
    The second-order walk.  A column is drawn with weight
    ``2^-n (1 + 2 eta sum_l p_l e_l)`` and the update is
    ``p_j <- p_j (1 + 2 eta e_j) / (1 + 2 eta sum_l p_l e_l)``.
``"product"``
    The exact conditional dynamics of the simplified apparatus, where a
    column multiplies channel ``j`` by ``(1 + eta e_j) prod_{k!=j} (1 - eta e_k)``.
    Columns are drawn with weight ``2^-n sum_l p_l f_l(e)``.  Only this
    measure reproduces the pointer distribution of the ensemble exactly
    (the linear measure drops the common-mode factor ``prod_k (1 - eta e_k)``).
``"recursive"``
    Like ``"product"`` but with per-stage factors ``C_jx^2`` of a general
    apparatus (non-uniform ``eta`` and ``c``).

Both weighted updates are Bayesian, hence martingales: the weighted mean
of the updated ``p`` equals ``p`` exactly.

Channel indices are zero based.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import rng
from .apparatus import ApparatusParams, log_factors, noise_block
from .errors import EnumerationTooLarge
from .state import AmplitudeVector

MEASURES = ("linear", "product", "recursive")
INVERSE_CDF_MAX_N = 16
ENUMERATION_MAX_N = 12
COLLAPSE_THRESHOLD = 1.0 - 1e-9
_CHUNK_CELLS = 1 << 22


def sign_columns(n: int) -> np.ndarray:
    """All ``2^n`` sign columns, shape ``(2^n, n)``; bit ``l`` of the row index
    set means ``e_l = +1``."""
    cells = np.arange(1 << n)[:, None]
    return np.where((cells >> np.arange(n)) & 1, 1, -1).astype(np.int8)


def _simplex(p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if p.ndim != 1 or np.any(p < 0) or abs(p.sum() - 1.0) > 1e-9:
        raise ValueError("p must be a probability vector")
    return p


@dataclass(frozen=True)
class WalkState:
    p: np.ndarray
    x: int = 0

    def __post_init__(self):
        p = np.array(self.p, dtype=float, copy=True)
        if p.ndim != 1 or np.any(p < 0) or abs(p.sum() - 1.0) > 1e-12:
            raise ValueError("walk state must lie on the simplex")
        p.setflags(write=False)
        object.__setattr__(self, "p", p)


@dataclass
class WalkResult:
    final_p: np.ndarray
    outcome: int
    steps: int
    pointer: np.ndarray
    walk_id: int = 0
    trajectory: list[tuple[int, np.ndarray, float]] | None = field(default=None, repr=False)

    @property
    def collapsed(self) -> bool:
        return bool(self.final_p.max() >= COLLAPSE_THRESHOLD)


# -- single-step algebra ----------------------------------------------------


def step_weight(p, column, eta: float) -> float:
    """Probability of drawing ``column`` under the linear measure."""
    p = np.asarray(p, dtype=float)
    e = np.asarray(column, dtype=float)
    return float((1.0 + 2.0 * eta * (p @ e)) / 2.0 ** p.size)


def product_step_weight(p, column, eta: float) -> float:
    """Probability of drawing ``column`` under the product measure."""
    p = np.asarray(p, dtype=float)
    e = np.asarray(column, dtype=float)
    f = np.prod(1.0 - eta * e) * (1.0 + eta * e) / (1.0 - eta * e)
    return float((p @ f) / 2.0 ** p.size)


def bias_update(p, bias) -> np.ndarray:
    """``p_j (1 + b_j) / (1 + sum_l p_l b_l)``, renormalized.

    The generic Bayesian step behind both the walk and the single-sign
    Gedanken step; requires every ``1 + b_j > 0``.
    """
    p = np.asarray(p, dtype=float)
    q = p * (1.0 + np.asarray(bias, dtype=float))
    return q / q.sum(axis=-1, keepdims=True)


def apply_step(state: WalkState, column, eta: float) -> WalkState:
    """One linear-measure update.  Corners are fixed points."""
    e = np.asarray(column, dtype=float)
    return WalkState(bias_update(state.p, 2.0 * eta * e), state.x + 1)


def apply_product_step(state: WalkState, column, eta: float) -> WalkState:
    e = np.asarray(column, dtype=float)
    # common factor prod_k (1 - eta e_k) cancels in the normalization
    q = state.p * (1.0 + eta * e) / (1.0 - eta * e)
    return WalkState(q / q.sum(), state.x + 1)


def _enumerate(p, eta, measure):
    p = _simplex(p)
    n = p.size
    if n > ENUMERATION_MAX_N:
        raise EnumerationTooLarge(f"2^{n} columns is too many to enumerate (n <= {ENUMERATION_MAX_N})")
    E = sign_columns(n).astype(float)
    if measure == "linear":
        w = (1.0 + 2.0 * eta * (E @ p)) / 2.0**n
        new = bias_update(p, 2.0 * eta * E)
    elif measure == "product":
        ratio = (1.0 + eta * E) / (1.0 - eta * E)
        w = np.prod(1.0 - eta * E, axis=1) * (ratio @ p) / 2.0**n
        q = p * ratio
        new = q / q.sum(axis=1, keepdims=True)
    else:
        raise ValueError(f"unknown measure {measure!r}")
    return w, new, p


def step_moments_enumerated(p, eta: float, measure: str = "linear"):
    """Exact mean and second moment of one step's displacement.

    Returns ``(mean, cov)`` with ``mean[j] = <dp_j>`` and
    ``cov[j, k] = <dp_j dp_k>``, averaging over all ``2^n`` columns.
    """
    w, new, p = _enumerate(p, eta, measure)
    dp = new - p
    mean = w @ dp
    cov = (dp * w[:, None]).T @ dp
    return mean, cov


def covariance_analytic(p, eta: float) -> np.ndarray:
    """``4 eta^2 p_j p_k (delta_jk - p_j - p_k + sum_l p_l^2)``."""
    p = _simplex(p)
    s2 = float(p @ p)
    return 4.0 * eta**2 * np.outer(p, p) * (np.eye(p.size) - p[:, None] - p[None, :] + s2)


def entropy(p) -> float:
    """Shannon entropy in nats with ``0 ln 0 = 0``."""
    p = np.asarray(p, dtype=float)
    nz = p[p > 0]
    return float(-(nz * np.log(nz)).sum())


def _entropy_rows(P: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(P > 0, P * np.log(np.where(P > 0, P, 1.0)), 0.0)
    return -terms.sum(axis=-1)


def expected_entropy_change(p, eta: float, measure: str = "linear") -> float:
    """Exact one-step ``<S(p + dp)> - S(p)`` by enumeration."""
    w, new, p = _enumerate(p, eta, measure)
    return float(w @ _entropy_rows(new) - entropy(p))


def entropy_drift_analytic(p, eta: float) -> float:
    """Second-order entropy drift ``-2 eta^2 sum_j p_j ((1-p_j)^2 + sum_{l!=j} p_l^2)``."""
    p = _simplex(p)
    s2 = float(p @ p)
    return float(-2.0 * eta**2 * np.sum(p * ((1.0 - p) ** 2 + s2 - p**2)))


# -- path measures ------------------------------------------------------------


def path_weight(psi: AmplitudeVector, e: np.ndarray, eta: float, measure: str = "linear") -> float:
    """Probability of a whole sign table under the sequential walk measure.

    Computed step by step as the product of column weights along the path.
    """
    p = psi.probabilities
    total = 0.0
    for x in range(e.shape[1]):
        col = e[:, x]
        if measure == "linear":
            total += math.log(step_weight(p, col, eta))
            p = apply_step(WalkState(p / p.sum()), col, eta).p
        elif measure == "product":
            total += math.log(product_step_weight(p, col, eta))
            p = apply_product_step(WalkState(p / p.sum()), col, eta).p
        else:
            raise ValueError(f"unknown measure {measure!r}")
    return math.exp(total)


# -- batch runner -------------------------------------------------------------


def _check_measure(params: ApparatusParams, measure: str):
    if measure not in MEASURES:
        raise ValueError(f"measure must be one of {MEASURES}")
    if measure != "recursive" and not params.is_uniform:
        raise ValueError(f"measure {measure!r} requires the uniform apparatus")
    if measure == "recursive" and params.n > INVERSE_CDF_MAX_N:
        raise ValueError(f"recursive measure supports n <= {INVERSE_CDF_MAX_N}")


def _draw_uniforms(params: ApparatusParams, walk_ids, width: int) -> np.ndarray:
    out = np.empty((len(walk_ids), params.two_x, width))
    for i, w in enumerate(walk_ids):
        out[i] = rng.stream(params.seed, rng.WALK, w).random((params.two_x, width))
    return out


def _cell_weights(P, E, x, params, measure):
    """Unnormalized column weights for every walk in the batch, shape (B, 2^n)."""
    if measure == "linear":
        eta = params.eta_scalar
        return 1.0 + 2.0 * eta * (P @ E.T)
    if measure == "product":
        eta = params.eta_scalar
        ratio = (1.0 + eta * E) / (1.0 - eta * E)
        return (P @ ratio.T) * np.prod(1.0 - eta * E, axis=1)
    # recursive: C_jx(cell)^2 for every cell at this stage
    log_c = _recursive_log_table(params, E, x)
    return P @ np.exp(2.0 * log_c).T


def _recursive_log_table(params, E, x):
    """``log C_jx`` of every cell at stage ``x``, shape ``(2^n, n)``."""
    sl = slice(x, x + 1)
    return log_factors(params.eta[:, sl], params.c[:, sl], E[:, :, None])[..., 0]


def _mixture_columns(P, u, params, measure):
    """Exact O(n) sampler for large n.

    Both uniform measures are mixtures over channels: pick ``l`` with
    probability ``p_l``; under the linear measure ``e_l = +1`` with probability
    ``(1 + 2 eta)/2`` and the remaining signs are fair; under the product
    measure ``e_l = +1`` and every other ``e_k = -1`` with probability
    ``(1 + eta)/2`` each.
    """
    B, n = P.shape
    eta = params.eta_scalar
    cdf = np.cumsum(P, axis=1)
    chan = np.minimum((cdf < (u[:, :1] * cdf[:, -1:])).sum(axis=1), n - 1)
    own = np.zeros((B, n), dtype=bool)
    own[np.arange(B), chan] = True
    r = u[:, 1:]
    if measure == "linear":
        prob_plus = np.where(own, 0.5 + eta, 0.5)
    else:
        prob_plus = np.where(own, 0.5 * (1.0 + eta), 0.5 * (1.0 - eta))
    return np.where(r < prob_plus, 1, -1).astype(np.int8)


def _update(P, e, params, measure, x):
    if measure == "linear":
        Q = P * (1.0 + 2.0 * params.eta_scalar * e)
    elif measure == "product":
        eta = params.eta_scalar
        Q = P * ((1.0 + eta * e) / (1.0 - eta * e))
    else:
        Q = P * np.exp(2.0 * _recursive_log_table(params, e, x))
    return Q / Q.sum(axis=1, keepdims=True)


def _run_chunk(p0, params, walk_ids, measure, record, record_every):
    n = params.n
    B = len(walk_ids)
    use_cdf = n <= INVERSE_CDF_MAX_N
    E = sign_columns(n).astype(float) if use_cdf else None
    U = _draw_uniforms(params, walk_ids, 1 if use_cdf else n + 1)
    P = np.tile(p0, (B, 1))
    esum = np.zeros((B, n), dtype=np.int64)
    traj = [[(0, p0.copy(), entropy(p0))] for _ in range(B)] if record else None
    rows = np.arange(B)
    for x in range(params.two_x):
        if use_cdf:
            W = _cell_weights(P, E, x, params, measure)
            cdf = np.cumsum(W, axis=1)
            target = U[:, x, 0] * cdf[:, -1]
            idx = np.minimum((cdf <= target[:, None]).sum(axis=1), E.shape[0] - 1)
            e = E[idx]
        else:
            e = _mixture_columns(P, U[:, x, :], params, measure).astype(float)
        P = _update(P, e, params, measure, x)
        esum += e.astype(np.int64)
        if record and ((x + 1) % record_every == 0 or x + 1 == params.two_x):
            S = _entropy_rows(P)
            for b in rows:
                traj[b].append((x + 1, P[b].copy(), float(S[b])))
    results = []
    for b, w in enumerate(walk_ids):
        final = P[b].copy()
        results.append(
            WalkResult(
                final_p=final,
                outcome=int(np.argmax(final)),
                steps=params.two_x,
                pointer=esum[b] // 2,
                walk_id=int(w),
                trajectory=traj[b] if record else None,
            )
        )
    return results


def run_walks(
    psi: AmplitudeVector,
    params: ApparatusParams,
    runs: int,
    start: int = 0,
    measure: str = "linear",
    record: bool = False,
    record_every: int = 1,
    chunk: int | None = None,
) -> list[WalkResult]:
    """Run walks ``start .. start+runs-1``.

    Walk ``i`` consumes only the random stream keyed by ``(params.seed, i)``;
    the result is independent of ``chunk`` and of how callers split the
    index range.
    """
    if psi.n != params.n:
        raise ValueError(f"psi has {psi.n} channels, apparatus has {params.n}")
    if runs < 0:
        raise ValueError("runs must be non-negative")
    _check_measure(params, measure)
    if record_every < 1:
        raise ValueError("record_every must be >= 1")
    p0 = psi.probabilities
    p0 = p0 / p0.sum()
    if chunk is None:
        cells = (1 << params.n) if params.n <= INVERSE_CDF_MAX_N else params.n
        chunk = max(1, min(1024, _CHUNK_CELLS // max(cells, params.two_x)))
    out: list[WalkResult] = []
    for lo in range(start, start + runs, chunk):
        ids = list(range(lo, min(lo + chunk, start + runs)))
        out.extend(_run_chunk(p0, params, ids, measure, record, record_every))
    return out


def run_walk(
    psi: AmplitudeVector,
    params: ApparatusParams,
    record: bool = False,
    walk_index: int = 0,
    measure: str = "linear",
) -> WalkResult:
    """A single walk; identical to entry ``walk_index`` of :func:`run_walks`."""
    return run_walks(psi, params, 1, start=walk_index, measure=measure, record=record)[0]


def reweighted_outcomes(psi: AmplitudeVector, params: ApparatusParams, runs: int, start: int = 0):
    """Outcome frequencies from uniformly drawn signs, reweighted afterwards.

    Each uniform sign table is pushed through the linear update and given the
    importance weight ``prod_x (1 + 2 eta sum_l p_l e_lx)``, i.e. the ratio of
    the linear path measure to the uniform one.  Returns the self-normalized
    outcome frequencies; they estimate the same distribution as
    :func:`run_walks` with the linear measure.
    """
    eta = params.eta_scalar
    n = params.n
    p0 = psi.probabilities
    e_all = noise_block(params, start, runs).astype(float)
    P = np.tile(p0 / p0.sum(), (runs, 1))
    logw = np.zeros(runs)
    for x in range(params.two_x):
        e = e_all[:, :, x]
        s = np.einsum("bn,bn->b", P, e)
        logw += np.log1p(2.0 * eta * s)
        P = bias_update(P, 2.0 * eta * e)
    w = np.exp(logw - logw.max())
    outcome = np.argmax(P, axis=1)
    freq = np.bincount(outcome, weights=w, minlength=n) / w.sum()
    ess = w.sum() ** 2 / (w**2).sum()
    return freq, ess
