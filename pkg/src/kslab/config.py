"""Experiment configuration: flat key=value text with dotted sections.

Example::

    grid.d=2
    grid.n_axis=128
    grid.box_len=40
    params.chi=1.0
    params.tau=1.0
    params.lambda=0.0
    params.mu=1.0
    init.preset=gaussian_bump
    init.amplitude=1.0
    init.width=2.5
    init.M=8.0
    run.dt=auto
    run.t_end=1.0
    run.monitor_every=10
    run.blowup_cap=auto
    run.dealias=on
    monitor.k=3
    monitor.R=2.0
    monitor.centers=max+lattice

Lines starting with '#' and blank lines are ignored.  Values 'auto', 'on',
'off' carry their obvious meanings.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path

from .fields import Grid, make_grid
from .presets import PRESET_NAMES
from .solver import Params, RunConfig

__all__ = ["ExperimentConfig", "SweepSpec", "ConfigError", "parse_kv_text"]


class ConfigError(ValueError):
    """Raised for malformed or inconsistent experiment configuration."""


def parse_kv_text(text: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got '{raw}'")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def _to_float(val: str, key: str) -> float:
    try:
        return float(val)
    except ValueError as exc:
        raise ConfigError(f"{key}: not a number: '{val}'") from exc


def _to_int(val: str, key: str) -> int:
    try:
        return int(val)
    except ValueError as exc:
        raise ConfigError(f"{key}: not an integer: '{val}'") from exc


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything one run needs: grid, coefficients, data, stepping, monitors."""

    d: int = 2
    n_axis: int = 128
    box_len: float = 40.0
    chi: float = 1.0
    tau: float = 1.0
    lam: float = 0.0
    mu: float = 1.0
    preset: str = "gaussian_bump"
    amplitude: float = 1.0
    width: float | None = None
    M: float | None = None
    seed: int = 0
    dt: float | None = None
    t_end: float = 1.0
    monitor_every: int = 10
    blowup_cap: float | None = None
    dealias: bool = True
    monitor_k: int = 3
    monitor_R: float = 2.0
    monitor_centers: str = "max+lattice"

    def grid(self) -> Grid:
        return make_grid(self.d, self.n_axis, self.box_len)

    def params(self) -> Params:
        return Params(chi=self.chi, tau=self.tau, lam=self.lam, mu=self.mu, d=self.d)

    def run_config(self, keep_states: bool = False) -> RunConfig:
        return RunConfig(
            t_end=self.t_end,
            dt=self.dt,
            monitor_every=self.monitor_every,
            blowup_cap=self.blowup_cap,
            dealias=self.dealias,
            keep_states=keep_states,
        )

    def effective_width(self) -> float:
        return self.width if self.width is not None else self.box_len / 16.0

    def effective_M(self) -> float:
        if self.M is not None:
            return self.M
        # Largest truncation radius that still fits: just under box_len/4.
        return 0.24 * self.box_len

    def validate(self) -> "ExperimentConfig":
        if self.preset not in PRESET_NAMES:
            raise ConfigError(f"init.preset must be one of {PRESET_NAMES}")
        if self.dt is not None and not self.dt > 0:
            raise ConfigError("run.dt must be positive or auto")
        if not self.t_end > 0:
            raise ConfigError("run.t_end must be positive")
        if self.monitor_every < 1:
            raise ConfigError("run.monitor_every must be >= 1")
        if not 2.0 * self.effective_M() < self.box_len / 2.0:
            raise ConfigError("init.M too large: need 2M < box_len/2")
        if self.monitor_centers not in ("max+lattice", "lattice"):
            raise ConfigError("monitor.centers must be 'max+lattice' or 'lattice'")
        self.grid()
        self.params()
        return self

    @staticmethod
    def from_mapping(kv: dict[str, str]) -> "ExperimentConfig":
        cfg = ExperimentConfig()
        for key, value in kv.items():
            cfg = _apply(cfg, key, value)
        return cfg.validate()

    @staticmethod
    def from_file(path: str | Path) -> "ExperimentConfig":
        return ExperimentConfig.from_mapping(parse_kv_text(Path(path).read_text()))


def _parse_switch(v: str, key: str) -> bool:
    if v in ("on", "true", "1", "yes"):
        return True
    if v in ("off", "false", "0", "no"):
        return False
    raise ConfigError(f"{key}: expected on/off, got '{v}'")


def _apply(cfg: ExperimentConfig, key: str, value: str) -> ExperimentConfig:
    """Set one dotted key on an existing config; unknown keys are errors."""
    mapping = {
        "grid.d": ("d", lambda v: _to_int(v, key)),
        "grid.n_axis": ("n_axis", lambda v: _to_int(v, key)),
        "grid.box_len": ("box_len", lambda v: _to_float(v, key)),
        "params.chi": ("chi", lambda v: _to_float(v, key)),
        "params.tau": ("tau", lambda v: _to_float(v, key)),
        "params.lambda": ("lam", lambda v: _to_float(v, key)),
        "params.mu": ("mu", lambda v: _to_float(v, key)),
        "init.preset": ("preset", str),
        "init.amplitude": ("amplitude", lambda v: _to_float(v, key)),
        "init.width": ("width", lambda v: _to_float(v, key)),
        "init.M": ("M", lambda v: _to_float(v, key)),
        "init.seed": ("seed", lambda v: _to_int(v, key)),
        "run.dt": ("dt", lambda v: None if v == "auto" else _to_float(v, key)),
        "run.t_end": ("t_end", lambda v: _to_float(v, key)),
        "run.monitor_every": ("monitor_every", lambda v: _to_int(v, key)),
        "run.blowup_cap": ("blowup_cap", lambda v: None if v == "auto" else _to_float(v, key)),
        "run.dealias": ("dealias", lambda v: _parse_switch(v, key)),
        "monitor.k": ("monitor_k", lambda v: _to_int(v, key)),
        "monitor.R": ("monitor_R", lambda v: _to_float(v, key)),
        "monitor.centers": ("monitor_centers", str),
    }
    entry = mapping.get(key)
    if entry is None:
        raise ConfigError(f"unknown configuration key '{key}'")
    attr, conv = entry
    return replace(cfg, **{attr: conv(value)})


@dataclass(frozen=True)
class SweepSpec:
    """One varied parameter over a value list, sharing a base configuration."""

    parameter: str
    values: tuple[float, ...]
    base: ExperimentConfig = field(default_factory=ExperimentConfig)

    def __post_init__(self):
        if self.parameter not in ("mu", "chi"):
            raise ConfigError("sweep parameter must be 'mu' or 'chi'")
        if not self.values:
            raise ConfigError("sweep value list must be nonempty")

    def configs(self) -> list[ExperimentConfig]:
        attr = {"mu": "mu", "chi": "chi"}[self.parameter]
        return [replace(self.base, **{attr: v}).validate() for v in self.values]
