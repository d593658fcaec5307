"""Run configuration: TOML files with dotted sections plus KEY=VALUE overrides."""
from __future__ import annotations

import dataclasses
import hashlib
import json
import math
import sys
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

import numpy as np

from .grid import Field3, Grid3
from .ground_state import OutsideWindowWarning, critical_index, intercritical_window
from .potential import PotentialSpec
from .propagator import AbsorbingLayer, EvolveConfig

NONCONFORMING = "NONCONFORMING"


class ConfigError(ValueError):
    """Invalid or out-of-window configuration."""

    def __init__(self, message: str, key: Optional[str] = None):
        super().__init__(message)
        self.key = key

    def record(self) -> dict:
        return {"error": "config", "key": self.key, "message": str(self)}


@dataclass
class GridSection:
    n: int = 64
    L: float = 32.0
    offset: bool = True


@dataclass
class PhysicsSection:
    b: float = 0.5
    p: float = 3.0
    # run outside 0 < b < 1 and the intercritical p window; outputs are stamped
    allow_nonconforming: bool = False


@dataclass
class InitialDataSection:
    # gaussian | ground_state_multiple | modulated_gaussian | file
    family: str = "ground_state_multiple"
    c: float = 0.5
    amplitude: float = 1.0
    width: float = 1.0
    center: list = field(default_factory=lambda: [0.0, 0.0, 0.0])
    wavevector: list = field(default_factory=lambda: [0.0, 0.0, 0.0])
    path: str = ""


@dataclass
class EvolveSection:
    dt: float = 2e-3
    t_end: float = 2.0
    record_every: int = 10
    nonlinearity_on: bool = True
    # 0 disables the layer
    absorbing_width: float = 0.0
    absorbing_strength: float = 20.0
    absorbing_every: int = 10
    snapshot_times: list = field(default_factory=list)
    checkpoint_every: int = 0
    max_grad_growth: float = 1e3


@dataclass
class DiagnosticsSection:
    local_radii: list = field(default_factory=list)
    evacuation_radii: list = field(default_factory=list)
    # cutoff weight radius for Z; 0 means the quadratic weight |x|^2
    weight_R: float = 0.0


@dataclass
class ClassifySection:
    decay_factor: float = 10.0
    local_mass_fraction: float = 0.01
    # 0 means L / 8
    radius: float = 0.0
    boundary_band: float = 1e-2
    first_pullback: float = 0.25
    # follow radial data with the radial collapse tracker as well
    radial_tracker: bool = False


@dataclass
class SweepSection:
    c: list = field(default_factory=lambda: [0.5, 1.5])
    b: list = field(default_factory=lambda: [0.5])
    p: list = field(default_factory=lambda: [3.0])
    workers: int = 1


@dataclass
class RunConfig:
    grid: GridSection = field(default_factory=GridSection)
    physics: PhysicsSection = field(default_factory=PhysicsSection)
    potential: dict = field(default_factory=lambda: {"family": "zero"})
    initial_data: InitialDataSection = field(default_factory=InitialDataSection)
    evolve: EvolveSection = field(default_factory=EvolveSection)
    diagnostics: DiagnosticsSection = field(default_factory=DiagnosticsSection)
    classify: ClassifySection = field(default_factory=ClassifySection)
    sweep: SweepSection = field(default_factory=SweepSection)
    seed: int = 0
    out: str = "out"
    nonconforming: list = field(default_factory=list)

    # derived objects ------------------------------------------------------

    def make_grid(self) -> Grid3:
        return Grid3(self.grid.n, self.grid.L, self.grid.offset)

    def make_potential(self) -> PotentialSpec:
        return PotentialSpec.from_dict(self.potential)

    def make_evolve_config(self, snapshot_times=None) -> EvolveConfig:
        e = self.evolve
        layer = (AbsorbingLayer(e.absorbing_width, e.absorbing_strength, e.absorbing_every)
                 if e.absorbing_width > 0 else None)
        snaps = tuple(e.snapshot_times if snapshot_times is None else snapshot_times)
        return EvolveConfig(dt=e.dt, t_end=e.t_end, nonlinearity_on=e.nonlinearity_on,
                            absorbing_layer=layer, record_every=e.record_every,
                            snapshot_times=snaps, checkpoint_every=e.checkpoint_every,
                            max_grad_growth=e.max_grad_growth)

    def pullback_times(self) -> list:
        """Geometric schedule first_pullback * 2^j up to t_end."""
        t = self.classify.first_pullback
        out = []
        while t <= self.evolve.t_end * (1 + 1e-12):
            out.append(t)
            t *= 2.0
        return out

    def detector_radius(self) -> float:
        return self.classify.radius if self.classify.radius > 0 else self.grid.L / 8.0

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def echo(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    def digest(self) -> str:
        return hashlib.blake2b(self.echo().encode(), digest_size=8).hexdigest()

    @property
    def stamp(self) -> str:
        return NONCONFORMING if self.nonconforming else "conforming"


_SECTIONS = {
    "grid": GridSection, "physics": PhysicsSection, "initial_data": InitialDataSection,
    "evolve": EvolveSection, "diagnostics": DiagnosticsSection, "classify": ClassifySection,
    "sweep": SweepSection,
}
_TOP = {"seed", "out", "potential"}


def parse_value(text: str):
    """TOML literal if it parses as one, else the bare string."""
    try:
        return tomllib.loads(f"v = {text}")["v"]
    except tomllib.TOMLDecodeError:
        return text


def _coerce(key: str, current, value):
    if isinstance(current, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{key} expects true/false, got {value!r}", key)
        return value
    if isinstance(current, int) and not isinstance(current, bool):
        if isinstance(value, float) and value.is_integer():
            value = int(value)
        if not isinstance(value, int) or isinstance(value, bool):
            raise ConfigError(f"{key} expects an integer, got {value!r}", key)
        return value
    if isinstance(current, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{key} expects a number, got {value!r}", key)
        return float(value)
    if isinstance(current, list):
        if not isinstance(value, list):
            value = [value]
        return list(value)
    if isinstance(current, str):
        return str(value)
    return value


def _apply(raw: dict, key: str, value) -> None:
    parts = key.split(".")
    node = raw
    for part in parts[:-1]:
        node = node.setdefault(part, {})
        if not isinstance(node, dict):
            raise ConfigError(f"{key}: {part} is not a section", key)
    node[parts[-1]] = value


def build_config(raw: dict) -> RunConfig:
    cfg = RunConfig()
    for name, value in raw.items():
        if name in _SECTIONS:
            if not isinstance(value, dict):
                raise ConfigError(f"[{name}] must be a section", name)
            section = getattr(cfg, name)
            known = {f.name for f in dataclasses.fields(section)}
            for k, v in value.items():
                if k not in known:
                    raise ConfigError(f"unknown key {name}.{k}", f"{name}.{k}")
                setattr(section, k, _coerce(f"{name}.{k}", getattr(section, k), v))
        elif name == "potential":
            if not isinstance(value, dict):
                raise ConfigError("[potential] must be a section", name)
            cfg.potential = dict(value)
        elif name in _TOP:
            setattr(cfg, name, _coerce(name, getattr(cfg, name), value))
        else:
            raise ConfigError(f"unknown key {name}", name)
    validate(cfg)
    return cfg


def load_config(path=None, overrides=()) -> RunConfig:
    """Read ``path`` (TOML) and apply ``KEY=VALUE`` overrides in order."""
    raw: dict = {}
    if path is not None:
        try:
            with open(path, "rb") as fh:
                raw = tomllib.load(fh)
        except tomllib.TOMLDecodeError as err:
            raise ConfigError(f"{path}: {err}") from err
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not KEY=VALUE", item)
        key, text = item.split("=", 1)
        _apply(raw, key.strip(), parse_value(text.strip()))
    return build_config(raw)


def validate(cfg: RunConfig) -> None:
    g, ph, e = cfg.grid, cfg.physics, cfg.evolve
    if g.n < 8 or g.n & (g.n - 1):
        raise ConfigError(f"grid.n must be a power of two >= 8, got {g.n}", "grid.n")
    if not g.L > 0:
        raise ConfigError("grid.L must be positive", "grid.L")
    if not (e.dt > 0 and e.t_end >= e.dt):
        raise ConfigError("need 0 < evolve.dt <= evolve.t_end", "evolve.dt")
    if e.record_every < 1:
        raise ConfigError("evolve.record_every must be >= 1", "evolve.record_every")
    if e.absorbing_width < 0 or e.absorbing_width >= g.L / 4:
        raise ConfigError("evolve.absorbing_width must lie in [0, L/4)", "evolve.absorbing_width")
    if not ph.p > 1:
        raise ConfigError("physics.p must exceed 1", "physics.p")
    if ph.b < 0 or ph.b >= 2:
        raise ConfigError("physics.b must lie in [0, 2)", "physics.b")
    try:
        cfg.make_potential()
    except (TypeError, ValueError) as err:
        raise ConfigError(f"potential: {err}", "potential") from err
    if cfg.initial_data.family not in INITIAL_FAMILIES:
        raise ConfigError(f"initial_data.family must be one of {INITIAL_FAMILIES}", "initial_data.family")

    problems = []
    if not 0 < ph.b < 1:
        problems.append(f"b={ph.b:g} outside (0, 1)")
    lo, hi = intercritical_window(ph.b)
    if not lo < ph.p < hi:
        with warnings.catch_warnings():
            # the problem is reported here already
            warnings.simplefilter("ignore", OutsideWindowWarning)
            s_c = critical_index(ph.b, ph.p)
        problems.append(f"p={ph.p:g} outside ({lo:g}, {hi:g}), s_c={s_c:g}")
    cfg.nonconforming = problems
    if problems and not ph.allow_nonconforming:
        raise ConfigError("; ".join(problems) + " (set physics.allow_nonconforming = true to run anyway)",
                          "physics")


# initial data -------------------------------------------------------------

INITIAL_FAMILIES = ("gaussian", "ground_state_multiple", "modulated_gaussian", "file")


def make_initial_data(cfg: RunConfig, grid: Grid3, gs=None) -> Field3:
    d = cfg.initial_data
    if d.family == "ground_state_multiple":
        if gs is None:
            raise ValueError("ground_state_multiple needs a ground state")
        return gs.embed(grid, d.c, tuple(d.center))
    if d.family in ("gaussian", "modulated_gaussian"):
        x, y, z = grid.coords
        c = d.center
        r2 = (x - c[0]) ** 2 + (y - c[1]) ** 2 + (z - c[2]) ** 2
        vals = d.amplitude * np.exp(-r2 / (2.0 * d.width**2)) + 0j
        if d.family == "modulated_gaussian":
            k = d.wavevector
            vals = vals * np.exp(1j * (k[0] * x + k[1] * y + k[2] * z))
        return Field3(grid, np.broadcast_to(vals, grid.shape).copy())
    from .checkpoint import checkpoint_read
    state = checkpoint_read(d.path)
    if state.grid.n != grid.n or not math.isclose(state.grid.box_length, grid.box_length):
        raise ConfigError("checkpoint grid differs from grid section", "initial_data.path")
    return state.field


def default_config_text() -> str:
    return DEFAULT_TOML


DEFAULT_TOML = """\
seed = 0
out = "out"

[grid]
n = 64
L = 32.0

[physics]
b = 0.5
p = 3.0

[potential]
family = "gaussian"
amplitude = 1.0
width = 1.0

[initial_data]
family = "ground_state_multiple"
c = 0.5

[evolve]
dt = 2e-3
t_end = 2.0
record_every = 10

[diagnostics]
local_radii = [4.0]
evacuation_radii = [2.0, 4.0]
"""
