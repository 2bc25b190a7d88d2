"""One controllable step of the walk: a spin-1 beam through a field region.

A field of sign ``epsilon`` enhances the ``S_z = +1`` component and
suppresses ``S_z = -1`` by ``1 +- epsilon alpha|B|``; ``S_z = 0`` is
unaffected.  Averaging over both field signs, each weighted by its
deexcitation rate, returns the unperturbed probabilities.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .walk import bias_update

COUPLINGS = np.array([-1.0, 0.0, 1.0])  # (minus, zero, plus)


@dataclass(frozen=True)
class GedankenSetup:
    psi_minus: complex
    psi_zero: complex
    psi_plus: complex
    alpha_b: float
    epsilon: int = 1

    def __post_init__(self):
        norm = abs(self.psi_minus) ** 2 + abs(self.psi_zero) ** 2 + abs(self.psi_plus) ** 2
        if abs(norm - 1.0) > 1e-12:
            raise ValueError(f"amplitudes not normalized (norm {norm!r})")
        if not 0.0 <= self.alpha_b < 1.0:
            raise ValueError("alpha|B| must lie in [0, 1)")
        if self.epsilon not in (1, -1):
            raise ValueError("epsilon must be +1 or -1")

    @classmethod
    def from_probabilities(cls, probs, alpha_b: float, epsilon: int = 1) -> "GedankenSetup":
        p = np.asarray(probs, dtype=float)
        amp = np.sqrt(p / p.sum())
        return cls(*amp, alpha_b=alpha_b, epsilon=epsilon)

    @property
    def probabilities(self) -> np.ndarray:
        return np.abs([self.psi_minus, self.psi_zero, self.psi_plus]) ** 2

    def flipped(self) -> "GedankenSetup":
        return GedankenSetup(self.psi_minus, self.psi_zero, self.psi_plus, self.alpha_b, -self.epsilon)


def deexcitation_rate(setup: GedankenSetup) -> float:
    """``D = 1 + epsilon alpha|B| (|psi_+|^2 - |psi_-|^2)``."""
    p = setup.probabilities
    return float(1.0 + setup.epsilon * setup.alpha_b * (p[2] - p[0]))


def detection_probabilities(setup: GedankenSetup) -> tuple[float, float, float]:
    """``(|psi_-|^2 (1 - ea), |psi_0|^2, |psi_+|^2 (1 + ea)) / D``."""
    d = deexcitation_rate(setup)
    assert d > 0, "deexcitation rate must be positive"
    q = bias_update(setup.probabilities, setup.epsilon * setup.alpha_b * COUPLINGS)
    return float(q[0]), float(q[1]), float(q[2])


def unbiased_average(setup: GedankenSetup) -> tuple[float, float, float]:
    """Rate-weighted average of the detection probabilities over both field
    signs; equals the field-free probabilities."""
    total = np.zeros(3)
    weight = 0.0
    for s in (setup, setup.flipped()):
        r = deexcitation_rate(s)
        total += r * np.array(detection_probabilities(s))
        weight += r
    out = total / weight
    return float(out[0]), float(out[1]), float(out[2])
