"""Soft-photon emission factor of a classical point charge.

Four-vectors are ``(t, x, y, z)`` with the ``(+, -, -, -)`` metric, so an
on-shell massive momentum has ``p.p = m^2`` and a photon has ``k.k = 0``.
Only ratios ``p.tau / p.k`` enter, so the overall metric sign is immaterial.
"""

from __future__ import annotations

import itertools
import math
from typing import NamedTuple

import numpy as np

from .errors import CollinearSingularity

_METRIC = np.array([1.0, -1.0, -1.0, -1.0])


class FourVector(NamedTuple):
    t: float
    x: float
    y: float
    z: float

    def dot(self, other: "FourVector") -> float:
        return float(np.dot(_METRIC * np.asarray(self, dtype=float), np.asarray(other, dtype=float)))

    def __add__(self, other):  # component-wise, not tuple concatenation
        return FourVector(*(np.asarray(self, dtype=float) + np.asarray(other, dtype=float)))

    def scale(self, c: float) -> "FourVector":
        return FourVector(*(c * np.asarray(self, dtype=float)))


def eikonal_factor(p: FourVector, k: FourVector, tau: FourVector, charge: float, rtol: float = 1e-9) -> complex:
    """``s(k).tau = -e i (p.tau) / (p.k)``.

    ``p`` must be timelike and ``k`` lightlike (checked to ``rtol``).  The
    soft regime ``|k| << m`` and transversality ``k.tau = 0`` are the
    caller's responsibility.
    """
    p, k, tau = FourVector(*p), FourVector(*k), FourVector(*tau)
    if not p.dot(p) > 0:
        raise ValueError("p must be a massive (timelike) momentum")
    k2 = k.dot(k)
    if abs(k2) > rtol * max(1.0, k.t * k.t):
        raise ValueError("k must be lightlike")
    pk = p.dot(k)
    if pk == 0.0:
        raise CollinearSingularity("collinear singularity: p.k = 0")
    return -charge * 1j * p.dot(tau) / pk


def partial_fraction_identity_check(a) -> tuple[float, float]:
    """Both sides of the ordered-product identity

        sum over permutations i of  1 / (a_i1 (a_i1 + a_i2) ... (a_i1 + ... + a_im))
            = 1 / (a_1 a_2 ... a_m).

    Uses direct ``m!`` enumeration with compensated summation.
    """
    a = [float(v) for v in a]
    m = len(a)
    if m < 1 or m > 8:
        raise ValueError("need 1 <= m <= 8 entries")
    if any(v <= 0 for v in a):
        raise ValueError("entries must be positive")
    terms = []
    for perm in itertools.permutations(a):
        partial = 0.0
        denom = 1.0
        for v in perm:
            partial += v
            denom *= partial
        terms.append(1.0 / denom)
    return math.fsum(terms), 1.0 / math.prod(a)
