"""Experiment configuration: a YAML file, overridable key by key.

Schema (top-level keys; nested blocks only for the sinks and gedanken
experiments)::

    experiment: walk        # walk | ensemble | pointer | sinks | gedanken | verify
    model: uniform          # uniform | general
    n: 2
    two_x: 2000
    eta: 0.1                # scalar; for model=general a path to an n x 2X CSV
    c: null                 # optional n x 2X CSV of scale factors (general only)
    psi_squared: [0.7, 0.3]
    phases: null            # optional list of n phases in radians
    runs: 2000
    seed: 0
    outputs: ./out          # default from $STOCHMEAS_OUTPUT, else ./stochmeas-out
    threads: 1
    measure: null           # linear | product | recursive; per-experiment default
    record: false
    record_every: 1
    detectors: n            # n | n-1
    bins: 40
    sinks:  {m: [...], f: [...], j0: 1.0}
    gedanken: {alpha_b: 0.3, epsilon: 1}   # epsilon: 1 | -1 | marginal
    noise_export: 0         # dump this many uniform noise realizations
    noise_format: csv       # csv (one row per realization and channel) | npz

Complex numbers in ``sinks`` are written as Python literals (``"1+2j"``) or
``[re, im]`` pairs.
"""

from __future__ import annotations

import dataclasses
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from .apparatus import ETA_MAX, ApparatusParams
from .errors import ConfigError
from .state import AmplitudeVector

EXPERIMENTS = ("walk", "ensemble", "pointer", "sinks", "gedanken", "verify")
MODELS = ("uniform", "general")
OUTPUT_ENV = "STOCHMEAS_OUTPUT"
SIMPLEX_TOL = 1e-9


def default_output() -> str:
    return os.environ.get(OUTPUT_ENV, "stochmeas-out")


@dataclass
class ExperimentConfig:
    experiment: str = "walk"
    model: str = "uniform"
    n: int = 2
    two_x: int = 2000
    eta: Any = 0.1
    c: str | None = None
    psi_squared: list[float] = field(default_factory=lambda: [0.5, 0.5])
    phases: list[float] | None = None
    runs: int = 1000
    seed: int = 0
    outputs: str = field(default_factory=default_output)
    threads: int = 1
    measure: str | None = None
    record: bool = False
    record_every: int = 1
    detectors: str = "n"
    bins: int = 40
    sinks: dict = field(default_factory=dict)
    gedanken: dict = field(default_factory=dict)
    noise_export: int = 0
    noise_format: str = "csv"

    # -- construction -----------------------------------------------------------

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        if not isinstance(data, dict):
            raise ConfigError("<root>", "config must be a mapping")
        names = {f.name for f in dataclasses.fields(cls)}
        for key in data:
            if key not in names:
                raise ConfigError(str(key), "unknown key")
        cfg = cls(**data)
        cfg.validate()
        return cfg

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    # -- validation -------------------------------------------------------------

    def validate(self) -> None:
        _choice("experiment", self.experiment, EXPERIMENTS)
        _choice("model", self.model, MODELS)
        _int("n", self.n, 1)
        _int("runs", self.runs, 1)
        _int("seed", self.seed, 0)
        if self.seed >= 2**64:
            raise ConfigError("seed", "must fit in 64 bits")
        _int("threads", self.threads, 1)
        _int("record_every", self.record_every, 1)
        _int("bins", self.bins, 1)
        _int("two_x", self.two_x, 2)
        _int("noise_export", self.noise_export, 0)
        _choice("noise_format", self.noise_format, ("csv", "npz"))
        if self.two_x % 2:
            raise ConfigError("two_x", f"must be even, got {self.two_x}")
        if not isinstance(self.record, bool):
            raise ConfigError("record", "must be true or false")
        _choice("detectors", self.detectors, ("n", "n-1"))
        if self.measure is not None:
            _choice("measure", self.measure, ("linear", "product", "recursive"))
        if not isinstance(self.outputs, (str, os.PathLike)) or not str(self.outputs):
            raise ConfigError("outputs", "must be a directory path")
        for block, keys in (("sinks", {"m", "f", "j0"}), ("gedanken", {"alpha_b", "epsilon"})):
            value = getattr(self, block)
            if not isinstance(value, dict):
                raise ConfigError(block, "must be a mapping")
            extra = set(value) - keys
            if extra:
                raise ConfigError(f"{block}.{sorted(extra)[0]}", "unknown key")
        if self.experiment == "verify":
            return
        if self.experiment == "sinks":
            self.sink_values()
            return
        if self.experiment == "gedanken":
            self._validate_gedanken()
            return
        if self.experiment in ("walk", "pointer") and self.n < 2:
            raise ConfigError("n", f"experiment {self.experiment} needs at least 2 channels")
        self._validate_psi(self.n)
        if self.model == "uniform":
            if isinstance(self.eta, bool) or not isinstance(self.eta, (int, float)):
                raise ConfigError("eta", "must be a number for the uniform model")
            if not 0.0 < float(self.eta) < ETA_MAX:
                raise ConfigError("eta", f"must satisfy 0 < eta < {ETA_MAX}, got {self.eta}")
            if self.c is not None:
                raise ConfigError("c", "scale factors require model=general")
        else:
            if self.experiment != "walk":
                raise ConfigError("model", f"experiment {self.experiment} needs model=uniform")
            if self.measure not in (None, "recursive"):
                raise ConfigError("measure", "model=general supports only the recursive measure")
            self.apparatus()  # load and check the matrices now

    def _validate_psi(self, n: int) -> None:
        p = self.psi_squared
        if not isinstance(p, (list, tuple)) or len(p) != n:
            raise ConfigError("psi_squared", f"must be a list of {n} probabilities")
        for i, v in enumerate(p):
            if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v) or v < 0:
                raise ConfigError(f"psi_squared[{i}]", f"must be a non-negative number, got {v!r}")
        total = math.fsum(p)
        if abs(total - 1.0) > SIMPLEX_TOL:
            raise ConfigError("psi_squared", f"must sum to 1 within {SIMPLEX_TOL}, sums to {total!r}")
        if self.phases is not None:
            if not isinstance(self.phases, (list, tuple)) or len(self.phases) != n:
                raise ConfigError("phases", f"must be a list of {n} angles")

    def _validate_gedanken(self) -> None:
        self._validate_psi(3)
        g = self.gedanken
        if not isinstance(g, dict):
            raise ConfigError("gedanken", "must be a mapping")
        extra = set(g) - {"alpha_b", "epsilon"}
        if extra:
            raise ConfigError(f"gedanken.{sorted(extra)[0]}", "unknown key")
        a = g.get("alpha_b", 0.3)
        if isinstance(a, bool) or not isinstance(a, (int, float)) or not 0.0 <= a < 1.0:
            raise ConfigError("gedanken.alpha_b", f"must lie in [0, 1), got {a!r}")
        if g.get("epsilon", 1) not in (1, -1, "marginal"):
            raise ConfigError("gedanken.epsilon", "must be +1, -1 or marginal")

    # -- derived objects --------------------------------------------------------

    def sink_values(self) -> tuple[np.ndarray, np.ndarray, complex]:
        """``(m, f, j0)`` from the ``sinks`` block; ``f`` defaults to all ones."""
        s = self.sinks
        if not isinstance(s, dict):
            raise ConfigError("sinks", "must be a mapping")
        extra = set(s) - {"m", "f", "j0"}
        if extra:
            raise ConfigError(f"sinks.{sorted(extra)[0]}", "unknown key")
        if "m" not in s:
            raise ConfigError("sinks.m", "missing raw amplitudes")
        m = _complex_list("sinks.m", s["m"])
        f = _complex_list("sinks.f", s["f"]) if "f" in s else np.ones_like(m)
        if f.size != m.size:
            raise ConfigError("sinks.f", f"has {f.size} entries, expected {m.size}")
        j0 = _complex("sinks.j0", s.get("j0", 1.0))
        if j0 == 0:
            raise ConfigError("sinks.j0", "source strength must be non-zero")
        if not np.any(f * m):
            raise ConfigError("sinks", "degenerate amplitudes: every F_l M_l vanishes")
        return m, f, j0

    def amplitudes(self) -> AmplitudeVector:
        return AmplitudeVector.from_probabilities(self.psi_squared, self.phases)

    def apparatus(self) -> ApparatusParams:
        if self.model == "uniform":
            return ApparatusParams.uniform(self.n, self.two_x, float(self.eta), self.seed)
        eta = _matrix("eta", self.eta, self.n, self.two_x)
        c = np.ones_like(eta) if self.c is None else _matrix("c", self.c, self.n, self.two_x)
        try:
            return ApparatusParams(eta, c, self.seed)
        except ValueError as exc:
            raise ConfigError("eta" if "coupl" in str(exc) else "c", str(exc)) from None

    def resolved_measure(self) -> str:
        if self.measure is not None:
            return self.measure
        if self.model == "general":
            return "recursive"
        return "product" if self.experiment == "pointer" else "linear"


def _choice(path, value, options):
    if value not in options:
        raise ConfigError(path, f"must be one of {', '.join(options)}, got {value!r}")


def _int(path, value, lo):
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(path, f"must be an integer, got {value!r}")
    if value < lo:
        raise ConfigError(path, f"must be >= {lo}, got {value}")


def _complex(path, value) -> complex:
    try:
        if isinstance(value, (list, tuple)) and len(value) == 2:
            out = complex(float(value[0]), float(value[1]))
        elif isinstance(value, bool):
            raise TypeError
        else:
            out = complex(str(value).replace(" ", "")) if isinstance(value, str) else complex(value)
    except (TypeError, ValueError):
        raise ConfigError(path, f"not a complex number: {value!r}") from None
    if not (math.isfinite(out.real) and math.isfinite(out.imag)):
        raise ConfigError(path, "must be finite")
    return out


def _complex_list(path, values) -> np.ndarray:
    if not isinstance(values, (list, tuple)) or not values:
        raise ConfigError(path, "must be a non-empty list")
    return np.array([_complex(f"{path}[{i}]", v) for i, v in enumerate(values)])


def _matrix(path, source, n, two_x) -> np.ndarray:
    if not isinstance(source, (str, os.PathLike)):
        raise ConfigError(path, "model=general expects a CSV file path")
    try:
        m = np.loadtxt(source, delimiter=",", ndmin=2)
    except (OSError, ValueError) as exc:
        raise ConfigError(path, f"cannot read matrix: {exc}") from None
    if m.shape != (n, two_x):
        raise ConfigError(path, f"matrix has shape {m.shape}, expected ({n}, {two_x})")
    return m


def parse_scalar(text: str) -> Any:
    """Parse a command-line override with YAML scalar/flow rules."""
    return yaml.safe_load(text)


def load_config(path: str | os.PathLike | None = None, overrides: dict | None = None) -> ExperimentConfig:
    data: dict = {}
    if path is not None:
        try:
            data = yaml.safe_load(Path(path).read_text()) or {}
        except OSError as exc:
            raise ConfigError("<file>", f"cannot read {path}: {exc.strerror}") from None
        except yaml.YAMLError as exc:
            raise ConfigError("<file>", f"invalid YAML: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError("<root>", "config must be a mapping")
    merged = dict(data)
    for key, value in (overrides or {}).items():
        if "." in key:
            head, tail = key.split(".", 1)
            block = dict(merged.get(head) or {})
            block[tail] = value
            merged[head] = block
        else:
            merged[key] = value
    return ExperimentConfig.from_dict(merged)
