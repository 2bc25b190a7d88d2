"""Experiment orchestration: partition, execute, merge, export.

Walks and ensemble samples are indexed; index ``i`` consumes only the random
stream keyed by ``(seed, i)``.  Work is split into contiguous index ranges,
one per thread, and results are concatenated in index order, so every data
file is byte-identical for any thread count.
"""

from __future__ import annotations

import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__, ensemble, verify
from .config import ExperimentConfig
from .errors import ConfigError, NoData
from .export import RunManifest, export_noise, plain, sha256, write_csv
from .gedanken import GedankenSetup, deexcitation_rate, detection_probabilities, unbiased_average
from .modes import find_modes, find_sample_modes
from .sinks import (
    SourceSinkParams,
    density_with_sources,
    nothing_happening,
    source_limit_error,
    source_strength,
    strong_source_density,
)
from .state import RawAmplitudes
from .walk import run_walks

MAX_HISTOGRAM_CELLS = 2_000_000


def partition(total: int, parts: int) -> list[tuple[int, int]]:
    """Split ``range(total)`` into at most ``parts`` contiguous ``(start, count)``."""
    parts = max(1, min(parts, total)) if total else 1
    base, extra = divmod(total, parts)
    out, start = [], 0
    for i in range(parts):
        count = base + (i < extra)
        out.append((start, count))
        start += count
    return out


def _parallel(fn, total: int, threads: int) -> list:
    ranges = partition(total, threads)
    if len(ranges) == 1:
        return [fn(*ranges[0])]
    with ThreadPoolExecutor(max_workers=len(ranges)) as pool:
        return list(pool.map(lambda r: fn(*r), ranges))


def prepare_output(path) -> Path:
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError("outputs", f"cannot create {out}: {exc.strerror}") from None
    if not out.is_dir() or not os.access(out, os.W_OK | os.X_OK):
        raise ConfigError("outputs", f"directory {out} is not writable")
    return out


# -- walk -----------------------------------------------------------------------


def _walk_results(cfg: ExperimentConfig, measure: str, record: bool):
    psi = cfg.amplitudes()
    params = cfg.apparatus()
    chunks = _parallel(
        lambda start, count: run_walks(psi, params, count, start, measure, record, cfg.record_every),
        cfg.runs,
        cfg.threads,
    )
    return psi, params, [r for chunk in chunks for r in chunk]


def walk_experiment(cfg: ExperimentConfig, out: Path) -> tuple[dict, list[str]]:
    measure = cfg.resolved_measure()
    psi, params, results = _walk_results(cfg, measure, cfg.record)
    n = params.n
    files = ["walks.csv", "outcomes.csv"]
    write_csv(
        out / "walks.csv",
        ["walk_id", "outcome", "final_max_p", "steps"],
        ((r.walk_id, r.outcome + 1, r.final_p.max(), r.steps) for r in results),
    )
    counts = np.bincount([r.outcome for r in results], minlength=n)
    born = psi.probabilities
    freq = counts / cfg.runs
    half = 3.0 * np.sqrt(born * (1 - born) / cfg.runs)
    write_csv(
        out / "outcomes.csv",
        ["outcome", "count", "frequency", "born", "band_lo", "band_hi"],
        ((j + 1, counts[j], freq[j], born[j], born[j] - half[j], born[j] + half[j]) for j in range(n)),
    )
    if cfg.record:
        files.append("trajectories.csv")
        write_csv(
            out / "trajectories.csv",
            ["walk_id", "x", *(f"p_{j + 1}" for j in range(n)), "S_x"],
            ((r.walk_id, x, *p, s) for r in results for x, p, s in r.trajectory),
        )
    final = np.array([r.final_p for r in results])
    summary = {
        "measure": measure,
        "frequencies": freq,
        "born": born,
        "within_3sigma": np.abs(freq - born) <= half,
        "collapsed_fraction": float(np.mean([r.collapsed for r in results])),
        "mean_final_p": final.mean(axis=0),
    }
    return summary, files


# -- ensemble ---------------------------------------------------------------------


def ensemble_experiment(cfg: ExperimentConfig, out: Path) -> tuple[dict, list[str]]:
    probs = np.asarray(cfg.psi_squared, dtype=float)
    params = cfg.apparatus()
    eta, X = float(cfg.eta), params.half_steps
    chunks = _parallel(
        lambda start, count: ensemble.sample_ensemble(probs, params, count, start, cfg.detectors),
        cfg.runs,
        cfg.threads,
    )
    channels = np.concatenate([c for c, _ in chunks])
    counts = np.concatenate([k for _, k in chunks])
    n = probs.size
    write_csv(
        out / "samples.csv",
        ["sample_id", "channel", *(f"X_{j + 1}" for j in range(n))],
        ((i, channels[i] + 1, *counts[i]) for i in range(cfg.runs)),
    )
    freq = np.bincount(channels, minlength=n) / cfg.runs
    mean_pointer = [counts[channels == j].mean(axis=0) if np.any(channels == j) else None for j in range(n)]
    summary = {
        "Z": ensemble.separation(X, eta),
        "channel_frequencies": freq,
        "mean_pointer_by_channel": mean_pointer,
        "expected_own_pointer": X * eta,
        "entropy_closed_form": ensemble.ensemble_entropy(probs, X, eta),
        "entropy_exact": ensemble.ensemble_entropy_exact(probs, X, eta),
    }
    return summary, ["samples.csv"]


# -- pointer histogram ---------------------------------------------------------------


def _axis_bins(X: int, Z: float, scale: float, bins: int):
    """Integer-aligned bins covering ``+-sqrt(Z)`` plus five widths of margin."""
    reach = math.sqrt(Z) + 5.0 / math.sqrt(2.0 * Z)
    hi = min(X, int(math.ceil(reach / scale)))
    lo = -hi
    width = max(1, math.ceil((hi - lo + 1) / bins))
    nb = math.ceil((hi - lo + 1) / width)
    edges = lo - 0.5 + width * np.arange(nb + 1)
    return lo, width, edges


def _bin_masses(values: np.ndarray, weights: np.ndarray, lo: int, width: int, nb: int) -> np.ndarray:
    idx = (values - lo) // width
    keep = (idx >= 0) & (idx < nb)
    return np.bincount(idx[keep], weights=weights[keep], minlength=nb)


def _mixture_bins(probs, axis_own, axis_mirror, free):
    """``sum_j p_j prod_k (own if k == j else mirrored)`` over the bin grid."""
    total = 0.0
    for j, pj in enumerate(probs):
        if pj == 0:
            continue
        t = np.array(1.0)
        for k in range(free):
            t = np.multiply.outer(t, axis_own if k == j else axis_mirror)
        total = total + pj * t
    return total


def pointer_histogram(pointers, probs, X: int, eta: float, bins: int, detectors: str = "n") -> dict:
    """Histogram walk-generated pointer counts in ``z`` space.

    Alongside the counts, each bin carries its exact mass under ``Q`` and
    under the Gaussian approximation; modes are located both in the samples
    and in the Gaussian density.
    """
    pointers = np.asarray(pointers, dtype=np.int64)
    if pointers.size == 0 or pointers.shape[0] == 0:
        raise NoData("no data")
    probs = np.asarray(probs, dtype=float)
    n = probs.size
    free = n if detectors == "n" else n - 1
    pts = pointers[:, :free]
    Z = ensemble.separation(X, eta)
    scale = ensemble.z_scale(X, eta)
    lo, width, edges = _axis_bins(X, Z, scale, bins)
    nb = edges.size - 1
    if nb**free > MAX_HISTOGRAM_CELLS:
        raise ConfigError("bins", f"{nb}^{free} histogram cells exceed {MAX_HISTOGRAM_CELLS}")

    Y, P = ensemble.pointer_pmf(X, eta)
    own = _bin_masses(Y, P, lo, width, nb)
    mirror = _bin_masses(-Y, P, lo, width, nb)
    ze = edges * scale
    g_own = np.diff(ensemble.gaussian_axis_cdf(ze, Z, math.sqrt(Z)))
    g_mirror = np.diff(ensemble.gaussian_axis_cdf(ze, Z, -math.sqrt(Z)))
    q_exact = _mixture_bins(probs, own, mirror, free).ravel()
    q_gauss = _mixture_bins(probs, g_own, g_mirror, free).ravel()

    idx = (pts - lo) // width
    inside = np.all((idx >= 0) & (idx < nb), axis=1)
    flat = np.ravel_multi_index(tuple(idx[inside].T), (nb,) * free) if free else np.zeros(0, int)
    counts = np.bincount(flat, minlength=nb**free)

    centers = scale * (lo + (np.arange(nb) + 0.5) * width - 0.5)
    grid = np.stack([g.ravel() for g in np.meshgrid(*([centers] * free), indexing="ij")], axis=1)

    z = pts * scale
    detected = find_sample_modes(z, Z, n, detectors, lattice_step=scale) if len(z) >= 2 else []
    predicted = find_modes(probs, Z, detectors)
    separations = [
        [float(np.linalg.norm(a - b)) for b in detected] for a in detected
    ]
    return {
        "Z": Z,
        "grid": grid,
        "counts": counts,
        "q_exact": q_exact,
        "q_gaussian": q_gauss,
        "outside": int((~inside).sum()),
        "modes_detected": [m.tolist() for m in detected],
        "modes_predicted": [m.tolist() for m in predicted],
        "mode_separations": separations,
    }


def pointer_experiment(cfg: ExperimentConfig, out: Path) -> tuple[dict, list[str]]:
    measure = cfg.resolved_measure()
    _, params, results = _walk_results(cfg, measure, record=False)
    pointers = np.array([r.pointer for r in results])
    eta = float(cfg.eta)
    write_csv(
        out / "pointers.csv",
        ["walk_id", "outcome", *(f"X_{j + 1}" for j in range(cfg.n))],
        ((r.walk_id, r.outcome + 1, *r.pointer) for r in results),
    )
    h = pointer_histogram(pointers, cfg.psi_squared, params.half_steps, eta, cfg.bins, cfg.detectors)
    dim = h["grid"].shape[1]
    write_csv(
        out / "histogram.csv",
        [*(f"z_{k + 1}" for k in range(dim)), "count", "Q_exact", "q_gaussian"],
        ((*h["grid"][i], h["counts"][i], h["q_exact"][i], h["q_gaussian"][i]) for i in range(len(h["counts"]))),
    )
    summary = {
        "measure": measure,
        "Z": h["Z"],
        "samples": len(results),
        "outside_histogram": h["outside"],
        "mode_count_detected": len(h["modes_detected"]),
        "modes_detected": h["modes_detected"],
        "mode_count_predicted": len(h["modes_predicted"]),
        "modes_predicted": h["modes_predicted"],
        "mode_separations": h["mode_separations"],
    }
    return summary, ["pointers.csv", "histogram.csv"]


# -- small deterministic experiments -----------------------------------------------------


def sinks_experiment(cfg: ExperimentConfig, out: Path) -> tuple[dict, list[str]]:
    m, f, j0 = cfg.sink_values()
    raw = RawAmplitudes(m)
    ss = SourceSinkParams(j0, f)
    finite = density_with_sources(raw, ss)
    strong = strong_source_density(raw, f).rho
    n = m.size
    write_csv(
        out / "density.csv",
        ["j", "k", "finite_re", "finite_im", "strong_re", "strong_im"],
        (
            (j + 1, k + 1, finite[j, k].real, finite[j, k].imag, strong[j, k].real, strong[j, k].imag)
            for j in range(n)
            for k in range(n)
        ),
    )
    summary = {
        "source_strength": source_strength(raw, ss),
        "trace_finite": float(np.trace(finite).real),
        "nothing_happening": nothing_happening(raw, ss),
        "renormalized_limit_error": source_limit_error(raw, ss, renormalize=True),
        "raw_limit_error": source_limit_error(raw, ss, renormalize=False),
    }
    return summary, ["density.csv"]


def gedanken_experiment(cfg: ExperimentConfig, out: Path) -> tuple[dict, list[str]]:
    g = cfg.gedanken
    eps = g.get("epsilon", 1)
    setup = GedankenSetup.from_probabilities(cfg.psi_squared, float(g.get("alpha_b", 0.3)), 1 if eps == "marginal" else eps)
    rows = []
    for s in (setup, setup.flipped()):
        rows.append((s.epsilon, deexcitation_rate(s), *detection_probabilities(s)))
    write_csv(out / "gedanken.csv", ["epsilon", "rate", "q_minus", "q_zero", "q_plus"], rows)
    avg = unbiased_average(setup)
    if eps == "marginal":
        triple, rate = avg, 0.5 * (rows[0][1] + rows[1][1])
    else:
        triple, rate = detection_probabilities(setup), deexcitation_rate(setup)
    summary = {
        "epsilon": eps,
        "input": setup.probabilities,
        "probabilities": triple,
        "rate": rate,
        "rate_weighted_average": avg,
        "max_error": float(np.abs(np.array(avg) - setup.probabilities).max()),
    }
    return summary, ["gedanken.csv"]


def verify_experiment(cfg: ExperimentConfig, out: Path) -> tuple[dict, list[str]]:
    results = verify.run_all(cfg.seed)
    write_csv(
        out / "verify.csv",
        ["check", "passed", "error", "tolerance"],
        ((r.name, r.passed, r.error, r.tolerance) for r in results),
    )
    summary = {
        "checks": [r.as_dict() for r in results],
        "all_passed": all(r.passed for r in results),
    }
    return summary, ["verify.csv"]


EXPERIMENTS = {
    "walk": walk_experiment,
    "ensemble": ensemble_experiment,
    "pointer": pointer_experiment,
    "sinks": sinks_experiment,
    "gedanken": gedanken_experiment,
    "verify": verify_experiment,
}


def run(cfg: ExperimentConfig) -> RunManifest:
    """Execute ``cfg.experiment``; write data files and ``manifest.json``."""
    cfg.validate()
    out = prepare_output(cfg.outputs)
    t0 = time.perf_counter()
    summary, files = EXPERIMENTS[cfg.experiment](cfg, out)
    if cfg.noise_export and cfg.experiment in ("walk", "ensemble", "pointer"):
        files.append(export_noise(cfg.apparatus(), cfg.noise_export, out, cfg.noise_format))
    wall = time.perf_counter() - t0
    inputs = {}
    for key in ("eta", "c"):
        value = getattr(cfg, key)
        if cfg.model == "general" and isinstance(value, str):
            inputs[key] = sha256(Path(value))
    manifest = RunManifest(
        config=plain(cfg.to_dict()),
        version=__version__,
        wall_time=wall,
        summary=plain(summary),
        files={name: sha256(out / name) for name in files},
        inputs=inputs,
    )
    manifest.write(out / "manifest.json")
    return manifest
