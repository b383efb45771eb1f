"""Declarative experiment configuration in the flat ``key = value`` format.

A minimal file needs only ``materials`` and ``temperatures``::

    materials = ["LSCO"]
    temperatures = [300]

Every other key has a default; ``dump_config`` writes the fully resolved set,
which parses back to an identical ``ExperimentConfig``.

Seeds
-----
Realization ``r`` of pipeline ``p`` for material index ``i`` and temperature
index ``j`` draws from ``SeedSequence(seed, spawn_key=(i, j, r, code[p]))``
with ``code = {"static": 0, "dynamic": 1}``. The realization's field seed is
the first 63-bit word generated by that sequence.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from .errors import ConfigurationError
from .field import COUPLING_FORMS
from .kvtext import dump_kv, parse_kv
from .materials import get_material

PIPELINES = ("static", "dynamic", "both")
PIPELINE_CODES = {"static": 0, "dynamic": 1}


@dataclass
class ExperimentConfig:
    """Resolved run description.

    ``L`` and ``eta``, ``dt`` and ``t_max`` accept ``None`` for the automatic
    rules (box from the material, eta from the level spacing, dt from the
    phase bound, t_max = 5 hbar / eta).
    """

    materials: list[str]
    temperatures: list[float]
    N: int = 48
    L: float | None = None
    n_static: int = 10
    n_dynamic: int = 2
    pipeline: str = "static"
    eta: float | None = None
    omega_max: float = 0.5
    omega_step: float = 0.002
    dt: float | None = None
    t_max: float | None = None
    seed: int = 0
    output: str = "qadrude-out"
    window_factor: float = 3.0
    max_phase: float = 0.5
    record_stride: int = 1
    frozen: bool = False
    coupling_form: str = "linear_dispersion"
    amplitude_factor: float = 2.0
    figures: bool = False
    workers: int = 1

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if not self.materials:
            raise ConfigurationError("materials: at least one material is required")
        for name in self.materials:
            try:
                get_material(name)
            except KeyError as exc:
                raise ConfigurationError(f"materials: {exc.args[0]}") from None
        if not self.temperatures:
            raise ConfigurationError("temperatures: at least one temperature is required")
        for T in self.temperatures:
            if not (isinstance(T, (int, float)) and math.isfinite(T) and T > 0):
                raise ConfigurationError(f"temperatures: {T!r} is not a positive temperature")
        if self.pipeline not in PIPELINES:
            raise ConfigurationError(f"pipeline: expected one of {PIPELINES}, got {self.pipeline!r}")
        _positive_int(self, "N", minimum=8)
        if self.N % 2:
            raise ConfigurationError("N: grid size must be even")
        _positive_int(self, "n_static", minimum=1)
        _positive_int(self, "n_dynamic", minimum=1)
        _positive_int(self, "record_stride", minimum=1)
        _positive_int(self, "workers", minimum=1)
        for name in ("omega_max", "omega_step", "window_factor", "max_phase", "amplitude_factor"):
            _positive(self, name)
        if self.omega_step > self.omega_max:
            raise ConfigurationError("omega_step: larger than omega_max")
        for name in ("L", "eta", "dt", "t_max"):
            if getattr(self, name) is not None:
                _positive(self, name)
        if self.coupling_form not in COUPLING_FORMS:
            raise ConfigurationError(
                f"coupling_form: expected one of {COUPLING_FORMS}, got {self.coupling_form!r}")
        if not isinstance(self.seed, int) or isinstance(self.seed, bool) or self.seed < 0:
            raise ConfigurationError(f"seed: expected a non-negative integer, got {self.seed!r}")

    @property
    def pipelines(self) -> list[str]:
        return ["static", "dynamic"] if self.pipeline == "both" else [self.pipeline]

    def n_realizations(self, pipeline: str) -> int:
        return self.n_static if pipeline == "static" else self.n_dynamic

    def realization_seed(self, i_mat: int, i_T: int, i_real: int, pipeline: str) -> int:
        ss = np.random.SeedSequence(self.seed,
                                    spawn_key=(i_mat, i_T, i_real, PIPELINE_CODES[pipeline]))
        return int(ss.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))

    def to_dict(self) -> dict:
        return asdict(self)


def _positive(cfg, name):
    v = getattr(cfg, name)
    if not (isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v) and v > 0):
        raise ConfigurationError(f"{name}: expected a positive number, got {v!r}")


def _positive_int(cfg, name, minimum=1):
    v = getattr(cfg, name)
    if not isinstance(v, int) or isinstance(v, bool) or v < minimum:
        raise ConfigurationError(f"{name}: expected an integer >= {minimum}, got {v!r}")


_FIELDS = {f.name: f for f in fields(ExperimentConfig)}
_ALIASES = {"material": "materials", "T": "temperatures", "temperature": "temperatures"}
_FLOAT_KEYS = {"L", "eta", "omega_max", "omega_step", "dt", "t_max", "window_factor",
               "max_phase", "amplitude_factor"}


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate; errors name the offending line and key."""
    values: dict = {}
    lines: dict = {}
    for lineno, key, value in parse_kv(text):
        name = _ALIASES.get(key, key)
        if name not in _FIELDS:
            raise ConfigurationError(f"line {lineno}: unknown key {key!r}")
        if name in values:
            raise ConfigurationError(f"line {lineno}: {name!r} already set on line {lines[name]}")
        if name in ("materials", "temperatures") and not isinstance(value, (list, tuple)):
            value = [value]
        if name == "materials":
            value = [str(v) for v in value]
        if name == "temperatures":
            value = [float(v) if isinstance(v, int) and not isinstance(v, bool) else v
                     for v in value]
        if name in ("eta", "dt", "t_max") and value == "auto":
            value = None
        if name in _FLOAT_KEYS and isinstance(value, int) and not isinstance(value, bool):
            value = float(value)
        values[name] = value
        lines[name] = lineno
    for required in ("materials", "temperatures"):
        if required not in values:
            raise ConfigurationError(f"missing required key {required!r}")
    try:
        return ExperimentConfig(**{k: (list(v) if isinstance(v, tuple) else v)
                                   for k, v in values.items()})
    except ConfigurationError as exc:
        key = str(exc).split(":", 1)[0]
        if key in lines:
            raise ConfigurationError(f"line {lines[key]}: {exc}") from None
        raise


def load_config(path) -> ExperimentConfig:
    return parse_config(Path(path).read_text())


def dump_config(cfg: ExperimentConfig, header: str | None = "resolved configuration") -> str:
    return dump_kv(cfg.to_dict(), header=header)


SMOKE_CONFIG = """\
materials = ["LSCO"]
temperatures = [300]
N = 48
n_static = 2
pipeline = "static"
"""
