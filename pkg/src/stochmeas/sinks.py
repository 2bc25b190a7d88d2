"""Final-state density matrix with an explicit source and sinks.

A source of strength ``J0`` feeds the scattering; sinks with efficiencies
``F_j`` absorb the outgoing channels.  Summing the diagrams gives a geometric
series whose closed form is

    rho_jk = |J0|^2 F_j F_k* M_j M_k* / (1 + |J0|^2 sum_l |F_l M_l|^2).

The trace is ``s / (1 + s)`` with ``s = |J0|^2 sum_l |F_l M_l|^2``; the
missing ``1 / (1 + s)`` is the weight of nothing happening.  For a strong
source the ``1`` drops out and the result is the normalized, and therefore
nonlinear, ``F_j F_k* M_j M_k* / sum_l |F_l M_l|^2``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateAmplitudes
from .state import DensityMatrix, RawAmplitudes


@dataclass(frozen=True)
class SourceSinkParams:
    j0: complex
    f: np.ndarray

    def __post_init__(self):
        f = np.array(self.f, dtype=complex, copy=True)
        if f.ndim != 1 or f.size < 1:
            raise ValueError("sink efficiencies must be a non-empty vector")
        f.setflags(write=False)
        object.__setattr__(self, "f", f)
        object.__setattr__(self, "j0", complex(self.j0))


def _check(raw: RawAmplitudes, f: np.ndarray):
    if f.size != raw.n:
        raise ValueError(f"{f.size} sinks for {raw.n} channels")


def source_strength(raw: RawAmplitudes, ss: SourceSinkParams) -> float:
    """``s = |J0|^2 sum_l |F_l M_l|^2``."""
    _check(raw, ss.f)
    return float(abs(ss.j0) ** 2 * np.sum(np.abs(ss.f * raw.m) ** 2))


def nothing_happening(raw: RawAmplitudes, ss: SourceSinkParams) -> float:
    """Trace deficit ``1 / (1 + s)`` of the finite-source density matrix."""
    return 1.0 / (1.0 + source_strength(raw, ss))


def density_with_sources(raw: RawAmplitudes, ss: SourceSinkParams) -> np.ndarray:
    """Closed form of the geometric series; trace ``s / (1 + s)`` (not 1)."""
    a = ss.f * raw.m
    s = source_strength(raw, ss)
    return abs(ss.j0) ** 2 * np.outer(a, a.conj()) / (1.0 + s)


def partial_series(raw: RawAmplitudes, ss: SourceSinkParams, terms: int) -> np.ndarray:
    """First ``terms`` terms of the alternating series before resummation.

    Term ``r`` is ``(-1)^r J0 F_j M_j (sum_l |J0 F_l M_l|^2)^r J0* M_k* F_k*``;
    the partial sums converge to :func:`density_with_sources` when ``s < 1``.
    """
    a = ss.j0 * ss.f * raw.m
    s = float(np.sum(np.abs(a) ** 2))
    outer = np.outer(a, a.conj())
    return sum(((-s) ** r) * outer for r in range(terms))


def strong_source_density(raw: RawAmplitudes, f) -> DensityMatrix:
    f = np.asarray(f, dtype=complex)
    _check(raw, f)
    a = f * raw.m
    norm = float(np.sum(np.abs(a) ** 2))
    if norm <= 0.0:
        raise DegenerateAmplitudes("degenerate amplitudes: every F_l M_l vanishes")
    rho = np.outer(a, a.conj()) / norm
    # exact Hermitian symmetrization; the outer product already is up to rounding
    rho = 0.5 * (rho + rho.conj().T)
    rho = rho / np.trace(rho).real
    return DensityMatrix(rho)


def source_limit_error(raw: RawAmplitudes, ss: SourceSinkParams, renormalize: bool = True) -> float:
    """Max-norm distance between the finite-source and strong-source results.

    With ``renormalize`` the finite-source matrix is divided by its trace
    first, after which the source strength cancels identically.  Without it,
    the distance is the trace deficit times the strong-source matrix and is
    bounded by ``1 / (1 + s)``.
    """
    if source_strength(raw, ss) <= 0:
        raise ValueError("source strength must be positive")
    rho = density_with_sources(raw, ss)
    if renormalize:
        rho = rho / np.trace(rho).real
    return float(np.max(np.abs(rho - strong_source_density(raw, ss.f).rho)))
