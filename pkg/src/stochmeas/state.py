"""Microsystem amplitudes and density matrices.

Everything lives in the eigenbasis of the measured observable: channel ``j``
is the ``j``-th basis vector.  Values are immutable once built (arrays are
copied and flagged read-only).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import BelowThreshold, DegenerateAmplitudes

NORM_TOL = 1e-12
PSD_TOL = 1e-10


def _frozen(a, dtype=complex) -> np.ndarray:
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class RawAmplitudes:
    """Unnormalized matrix elements ``M_j`` at arbitrary scale."""

    m: np.ndarray

    def __post_init__(self):
        m = _frozen(self.m)
        if m.ndim != 1 or m.size < 1:
            raise ValueError("raw amplitudes must be a non-empty vector")
        if not np.all(np.isfinite(m)):
            raise ValueError("raw amplitudes must be finite")
        object.__setattr__(self, "m", m)

    @property
    def n(self) -> int:
        return self.m.size


@dataclass(frozen=True)
class AmplitudeVector:
    """Unit-norm channel amplitudes ``psi_j`` (n >= 2)."""

    psi: np.ndarray

    def __post_init__(self):
        psi = _frozen(self.psi)
        if psi.ndim != 1 or psi.size < 2:
            raise ValueError("amplitude vector needs at least two channels")
        norm = float(np.sum(np.abs(psi) ** 2))
        if abs(norm - 1.0) > NORM_TOL:
            raise ValueError(f"amplitudes not normalized (sum |psi|^2 = {norm!r})")
        object.__setattr__(self, "psi", psi)

    @property
    def n(self) -> int:
        return self.psi.size

    @property
    def probabilities(self) -> np.ndarray:
        """Born weights ``|psi_j|^2``."""
        return np.abs(self.psi) ** 2

    @classmethod
    def from_probabilities(cls, probs, phases=None) -> "AmplitudeVector":
        """Build from ``|psi_j|^2``; amplitudes are real positive roots unless
        ``phases`` (radians) are given."""
        p = np.asarray(probs, dtype=float)
        if np.any(p < 0):
            raise ValueError("probabilities must be non-negative")
        total = p.sum()
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"probabilities sum to {total!r}, expected 1")
        amp = np.sqrt(p / total)
        if phases is not None:
            amp = amp * np.exp(1j * np.asarray(phases, dtype=float))
        # renormalize once more so the 1e-12 invariant holds after rounding
        amp = amp / math.sqrt(float(np.sum(np.abs(amp) ** 2)))
        return cls(amp)


@dataclass(frozen=True)
class DensityMatrix:
    """Hermitian, unit-trace ``n x n`` matrix."""

    rho: np.ndarray

    def __post_init__(self):
        rho = _frozen(self.rho)
        if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
            raise ValueError("density matrix must be square")
        if not np.allclose(rho, rho.conj().T, atol=NORM_TOL, rtol=0):
            raise ValueError("density matrix is not Hermitian")
        tr = np.trace(rho)
        if abs(tr - 1.0) > NORM_TOL:
            raise ValueError(f"density matrix trace is {tr!r}, expected 1")
        object.__setattr__(self, "rho", rho)

    @property
    def n(self) -> int:
        return self.rho.shape[0]

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.rho)

    def is_positive(self, tol: float = PSD_TOL) -> bool:
        return bool(self.eigenvalues().min() >= -tol)


@dataclass(frozen=True)
class TwoBodyMasses:
    """Masses for a two-body initial state ``m0 -> (m1, m2)`` in the CM frame."""

    m0: float
    m1: float
    m2: float

    def __post_init__(self):
        if self.m1 < 0 or self.m2 < 0:
            raise ValueError("masses must be non-negative")
        if not self.m0 > self.m1 + self.m2:
            raise BelowThreshold(
                f"below threshold: m0={self.m0} <= m1+m2={self.m1 + self.m2}"
            )


def weight(raw: RawAmplitudes) -> float:
    """Process weight ``w0 = sum_l |M_l|^2``."""
    return float(np.sum(np.abs(raw.m) ** 2))


def normalize(raw: RawAmplitudes) -> AmplitudeVector:
    # scale by the largest modulus first; avoids overflow for huge M
    scale = float(np.max(np.abs(raw.m)))
    if scale == 0.0:
        raise DegenerateAmplitudes("degenerate amplitudes: all M_j vanish")
    m = raw.m / scale
    return AmplitudeVector(m / math.sqrt(float(np.sum(np.abs(m) ** 2))))


def pure_state(psi: AmplitudeVector) -> DensityMatrix:
    return DensityMatrix(np.outer(psi.psi, psi.psi.conj()))


def diagonal_part(rho: DensityMatrix) -> DensityMatrix:
    """Drop all coherences, keeping the populations.

    This is the microsystem restriction after the apparatus has been traced
    out: the apparatus states attached to different channels are orthogonal,
    so only ``j == k`` terms survive.
    """
    return DensityMatrix(np.diag(np.diag(rho.rho)))


def cm_momentum(masses: TwoBodyMasses) -> tuple[float, float, float]:
    """Momentum and energies of a two-body state at rest, total energy ``m0``.

    Uses the Kallen form
    ``q = sqrt((m0^2 - (m1+m2)^2)(m0^2 - (m1-m2)^2)) / (2 m0)``,
    which guarantees ``eps1 + eps2 == m0``.
    """
    m0, m1, m2 = float(masses.m0), float(masses.m1), float(masses.m2)
    # factored form keeps precision close to threshold
    a = (m0 - m1 - m2) * (m0 + m1 + m2)
    b = (m0 - m1 + m2) * (m0 + m1 - m2)
    q = math.sqrt(a * b) / (2.0 * m0)
    # eps_j from the closed forms (m0^2 +- (m1^2 - m2^2)) / (2 m0) equal
    # sqrt(m_j^2 + q^2) exactly but do not lose digits when q << m_j
    eps1 = (m0 * m0 + m1 * m1 - m2 * m2) / (2.0 * m0)
    eps2 = (m0 * m0 - m1 * m1 + m2 * m2) / (2.0 * m0)
    return q, eps1, eps2
