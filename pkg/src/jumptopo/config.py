"""Sweep configuration, results and curve diagnostics."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError

__all__ = [
    "SweepConfig",
    "PhaseResult",
    "default_w_grid",
    "load_config_file",
    "CurveMetrics",
    "curve_metrics",
]

METHODS = ("emulated", "analytic")
RULES = ("left-riemann", "trapezoid")


def default_w_grid(v: float = 1.0) -> tuple[float, ...]:
    """39 evenly spaced points on [0.1, 2.0]; the singular point ``w = v`` is removed."""
    grid = np.round(np.linspace(0.1, 2.0, 39), 10)
    return tuple(float(w) for w in grid if abs(abs(w) - abs(v)) > 1e-9)


@dataclass(frozen=True)
class SweepConfig:
    """Discretization and model settings of a phase sweep.

    Defaults are the standard phase-diagram settings
    (N_final = 300, N_cir = 500, Δp = 0.01, t_final = 300, three-level ancilla).
    """

    v: float = 1.0
    gamma: float = 1.0
    w_grid: tuple[float, ...] = field(default_factory=default_w_grid)
    n_cir: int = 500
    delta_p: float = 0.01
    delta_q: float = 0.0
    t_final: float = 300.0
    n_final: int = 300
    ancilla_dim: int = 3
    seed: int = 0
    method: str = "emulated"
    corrected_sum: bool = False
    rule: str = "left-riemann"
    substeps: int = 10
    include_singular: bool = False

    def __post_init__(self):
        object.__setattr__(self, "w_grid", tuple(float(w) for w in self.w_grid))
        if not self.w_grid:
            raise ConfigError("w_grid must not be empty")
        if self.method not in METHODS:
            raise ConfigError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.rule not in RULES:
            raise ConfigError(f"rule must be one of {RULES}, got {self.rule!r}")
        if self.ancilla_dim not in (2, 3):
            raise ConfigError("ancilla_dim must be 2 or 3")
        if self.n_cir < 3:
            raise ConfigError("n_cir must be >= 3")
        if self.n_final < 1 or self.substeps < 1:
            raise ConfigError("n_final and substeps must be >= 1")
        for name in ("gamma", "delta_p", "t_final"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if not self.delta_q >= 0:
            raise ConfigError("delta_q must be non-negative")

    def replace(self, **changes) -> SweepConfig:
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["w_grid"] = list(self.w_grid)
        return d


@dataclass
class PhaseResult:
    """Order parameter versus ``w`` together with the settings that produced it."""

    rows: list[tuple[float, float, float]]
    settings: SweepConfig
    skipped: list[tuple[float, str]] = field(default_factory=list)
    duration_s: float = 0.0
    version: str = ""
    tail_warnings: int = 0

    @property
    def w(self) -> np.ndarray:
        return np.array([r[0] for r in self.rows])

    @property
    def t_re(self) -> np.ndarray:
        return np.array([r[1] for r in self.rows])

    @property
    def t_im(self) -> np.ndarray:
        return np.array([r[2] for r in self.rows])

    def to_dict(self) -> dict:
        return {
            "rows": [list(r) for r in self.rows],
            "skipped": [list(s) for s in self.skipped],
            "settings": self.settings.to_dict(),
            "duration_s": self.duration_s,
            "version": self.version,
            "tail_warnings": self.tail_warnings,
        }


_FIELD_TYPES = {f.name: f.type for f in dataclasses.fields(SweepConfig)}


def _parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def parse_config_value(key: str, text: str):
    if key not in _FIELD_TYPES:
        raise ConfigError(f"unknown config key {key!r}")
    kind = _FIELD_TYPES[key]
    try:
        if key == "w_grid":
            return tuple(float(x) for x in text.replace(",", " ").split())
        if kind == "bool":
            return _parse_bool(text)
        if kind == "int":
            return int(text)
        if kind == "float":
            return float(text)
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {text!r}") from exc
    return text.strip()


def load_config_file(path: str | Path) -> dict:
    """Read ``key = value`` lines whose keys are :class:`SweepConfig` field names.

    Blank lines and ``#`` comments are ignored; ``w_grid`` takes a comma or
    whitespace separated list.
    """
    values = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, _, val = line.partition("=")
        key = key.strip()
        values[key] = parse_config_value(key, val.strip())
    return values


@dataclass(frozen=True)
class CurveMetrics:
    lower_mean: float
    upper_mean: float
    jump: float
    plateau_deviation: float
    max_reversal: float
    step_at_transition: float


def curve_metrics(
    w,
    t,
    *,
    v: float = 1.0,
    lower_max: float = 0.7,
    upper_min: float = 1.3,
) -> CurveMetrics:
    """Summary numbers of an order-parameter curve.

    ``jump`` is the upper-plateau mean minus the lower-plateau mean;
    ``plateau_deviation`` the largest distance from 0 (lower plateau) or 1
    (upper plateau); ``max_reversal`` the largest drop of ``t`` below its
    running maximum as ``w`` increases (zero for a monotone curve);
    ``step_at_transition`` the change between the grid points bracketing ``v``.
    """
    w = np.asarray(w, dtype=float)
    t = np.asarray(t, dtype=float)
    order = np.argsort(w)
    w, t = w[order], t[order]
    lo = t[w <= lower_max]
    hi = t[w >= upper_min]
    if lo.size == 0 or hi.size == 0:
        raise ValueError("curve does not cover both plateaus")
    dev = max(float(np.max(np.abs(lo))), float(np.max(np.abs(hi - 1.0))))
    reversal = float(np.max(np.maximum.accumulate(t) - t))
    below = np.flatnonzero(w < v)
    above = np.flatnonzero(w > v)
    step = float(t[above[0]] - t[below[-1]]) if below.size and above.size else float("nan")
    return CurveMetrics(float(lo.mean()), float(hi.mean()), float(hi.mean() - lo.mean()), dev, reversal, step)
