"""Mode detection for pointer densities.

Candidate maxima are found by scanning 1-D slices through every pair of
mixture centres (three-point local-maximum test at spacing
``0.01 / sqrt(Z)``); each candidate is then polished by hill climbing in the
full space and coincident maxima are merged.  The climb matters for
``n > 2``: a slice maximum need not be a maximum of the full density.
"""

from __future__ import annotations

import itertools
import math
from typing import Callable

import numpy as np
from scipy.optimize import minimize
from scipy.special import logsumexp

from .ensemble import _probs, gaussian_centers, gaussian_log_density


def slice_points(a, b, step: float, overhang: float = 0.5) -> np.ndarray:
    """Points on the line through ``a`` and ``b`` extending ``overhang`` times
    their distance past each end, spaced ``step`` apart."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    length = float(np.linalg.norm(b - a))
    m = max(3, int(math.ceil(length * (1 + 2 * overhang) / step)) + 1)
    t = np.linspace(-overhang, 1 + overhang, m)
    return a + t[:, None] * (b - a)


def local_maxima(values: np.ndarray) -> np.ndarray:
    """Indices ``i`` with ``v[i-1] < v[i] >= v[i+1]``."""
    v = np.asarray(values)
    inner = (v[1:-1] > v[:-2]) & (v[1:-1] >= v[2:])
    return np.nonzero(inner)[0] + 1


def _merge(points, tol):
    kept: list[np.ndarray] = []
    for p in points:
        if all(np.linalg.norm(p - q) > tol for q in kept):
            kept.append(p)
    return kept


def climb_modes(
    log_density: Callable[[np.ndarray], np.ndarray],
    centers: np.ndarray,
    step: float,
    merge_tol: float,
    gradient: Callable | None = None,
) -> list[np.ndarray]:
    """Seed by slice scans between centre pairs, then maximize locally."""
    seeds = []
    pairs = list(itertools.combinations(range(len(centers)), 2)) or [(0, 0)]
    for j, k in pairs:
        if j == k:
            seeds.append(centers[j])
            continue
        pts = slice_points(centers[j], centers[k], step)
        vals = log_density(pts)
        seeds.extend(pts[i] for i in local_maxima(vals))
    modes = []
    for s in seeds:
        res = minimize(
            lambda z: -float(log_density(z[None, :])[0]),
            s,
            jac=(lambda z: -gradient(z)) if gradient else None,
            method="BFGS" if gradient else "Nelder-Mead",
            options={"gtol": 1e-10} if gradient else {"xatol": merge_tol * 1e-3, "fatol": 1e-12},
        )
        modes.append(res.x)
    return _merge(modes, merge_tol)


def find_modes(psi, Z: float, detectors: str = "n") -> list[np.ndarray]:
    """Modes of the Gaussian pointer mixture, sorted by first coordinate."""
    probs = _probs(psi)
    centers = gaussian_centers(probs.size, Z, detectors)
    keep = probs > 0
    centers_used = centers[keep]
    p_used = probs[keep]

    def logf(z):
        return gaussian_log_density(z, probs, Z, detectors)

    def grad(z):
        d = centers_used - z
        lw = np.log(p_used) - Z * (d**2).sum(axis=1)
        w = np.exp(lw - lw.max())
        w /= w.sum()
        return 2.0 * Z * (w[:, None] * d).sum(axis=0)

    step = 0.01 / math.sqrt(Z)
    merge_tol = 0.05 / math.sqrt(Z)
    modes = climb_modes(logf, centers_used, step, merge_tol, grad)
    return sorted(modes, key=lambda m: tuple(-m))


def count_modes(psi, Z: float, detectors: str = "n") -> int:
    return len(find_modes(psi, Z, detectors))


def kde_log_density(samples, bandwidth: float) -> Callable[[np.ndarray], np.ndarray]:
    """Isotropic Gaussian kernel density estimate of ``samples`` (rows)."""
    samples = np.asarray(samples, dtype=float)
    N, d = samples.shape
    h2 = bandwidth * bandwidth
    norm = -math.log(N) - 0.5 * d * math.log(2.0 * math.pi * h2)

    def logf(pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        out = np.empty(pts.shape[0])
        step = max(1, 4_000_000 // max(N, 1))
        for lo in range(0, pts.shape[0], step):
            chunk = pts[lo : lo + step]
            d2 = ((chunk[:, None, :] - samples[None, :, :]) ** 2).sum(axis=-1)
            out[lo : lo + step] = logsumexp(-0.5 * d2 / h2, axis=1) + norm
        return out

    return logf


def find_sample_modes(z_samples, Z: float, n: int, detectors: str = "n", lattice_step: float = 0.0):
    """Modes of a kernel density estimate of pointer samples.

    The bandwidth is Scott's rule on the pooled spread, but never below 1.5
    lattice steps (pointer samples live on a lattice of spacing
    ``lattice_step`` in ``z`` and the estimate must not resolve it) nor below
    a small fraction of the model width, which keeps degenerate samples
    well defined.
    """
    z = np.asarray(z_samples, dtype=float)
    if z.ndim != 2 or z.shape[0] < 2:
        raise ValueError("need at least two samples")
    N, d = z.shape
    sd = 1.0 / math.sqrt(2.0 * Z)
    spread = float(np.sqrt(np.mean(np.var(z, axis=0))))
    scott = N ** (-1.0 / (d + 4))
    h = max(scott * spread, 1.5 * lattice_step, 0.05 * sd)
    logf = kde_log_density(z, h)
    centers = gaussian_centers(n, Z, detectors)
    modes = climb_modes(logf, centers, 0.01 / math.sqrt(Z), 0.5 * sd)
    return sorted(modes, key=lambda m: tuple(-m))
