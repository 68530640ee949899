"""Run configuration files.

The grammar is TOML restricted to the tables below: ``key = value`` lines,
``[section]`` headers and repeatable ``[[species]]``, ``[[pair]]``,
``[[rule]]`` blocks. Duplicate keys and unknown keys are errors. A complete
reference with defaults lives in README.md.

Example::

    scenario = "space_homogeneous"

    [[species]]
    name = "light"
    mass = 1.0
    n = 1.0
    u = [0.3, 0.0, 0.0]
    T = 1.0

    [[species]]
    name = "heavy"
    mass = 3.0
    n = 0.5
    u = [-0.2, 0.0, 0.0]
    T = 2.0

    [time]
    t_end = 5.0
"""
from __future__ import annotations

import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import ConfigurationError
from .hybrid import SCALINGS
from .solver import BOUNDARIES, SCHEMES

__all__ = [
    "SCENARIOS",
    "Region",
    "SpeciesConfig",
    "PairConfig",
    "RuleConfig",
    "VelocityGridConfig",
    "SpaceConfig",
    "CollisionConfig",
    "TimeConfig",
    "OutputConfig",
    "StudyConfig",
    "RunConfig",
    "parse_config",
    "parse_config_text",
]

SCENARIOS = ("space_homogeneous", "transport_1d", "euler_st", "euler_mt", "kinetic_fluid", "epsilon_study")
KERNELS = ("maxwell", "hard_sphere")
FIELDS = ("n", "u", "T")
DEFAULT_STRENGTH = 1.0 / (4.0 * math.pi)


@dataclass(frozen=True)
class Region:
    """Constant moments on ``[x_min, x_max)``."""

    x_min: float
    x_max: float
    n: float
    u: tuple[float, float, float]
    T: float


@dataclass(frozen=True)
class SpeciesConfig:
    name: str
    mass: float
    regions: tuple[Region, ...]


@dataclass(frozen=True)
class PairConfig:
    species: tuple[int, int]
    kernel: str = "maxwell"
    strength: float = DEFAULT_STRENGTH
    nu_multiplier: float = 1.0


@dataclass(frozen=True)
class RuleConfig:
    x_min: float
    x_max: float
    species: tuple[int, int]
    bit: int


@dataclass(frozen=True)
class VelocityGridConfig:
    points: int = 16
    width_factor: float = 6.0
    bounds_min: tuple[float, float, float] | None = None
    bounds_max: tuple[float, float, float] | None = None


@dataclass(frozen=True)
class SpaceConfig:
    length: float = 1.0
    cells: int = 1
    boundary: str = "periodic"
    limiter: bool = False


@dataclass(frozen=True)
class CollisionConfig:
    angular_order: int = 8
    deposit: str = "quadratic"
    matched: bool = True
    selector_default: int = 0
    light_heavy: str = "bgk"


@dataclass(frozen=True)
class TimeConfig:
    t_end: float = 1.0
    dt: float | str = "auto"
    cfl: float = 0.9
    scheme: str = "implicit_bgk_exponential"
    epsilon: float = 1.0
    scaling: str = "unscaled"
    equilibrium_tolerance: float = 0.0
    wall_clock_limit: float | None = None


@dataclass(frozen=True)
class OutputConfig:
    directory: str = "output"
    interval: float | None = None
    fields: tuple[str, ...] = FIELDS
    include_distributions: bool = False
    entropy: bool | None = None


@dataclass(frozen=True)
class StudyConfig:
    epsilons: tuple[float, ...] = (0.1, 0.01)
    reference: str = "euler_st"
    reference_refinement: int = 4


@dataclass(frozen=True)
class RunConfig:
    scenario: str
    species: tuple[SpeciesConfig, ...]
    pairs: tuple[PairConfig, ...] = ()
    rules: tuple[RuleConfig, ...] = ()
    velocity_grid: VelocityGridConfig = field(default_factory=VelocityGridConfig)
    space: SpaceConfig = field(default_factory=SpaceConfig)
    collision: CollisionConfig = field(default_factory=CollisionConfig)
    time: TimeConfig = field(default_factory=TimeConfig)
    output: OutputConfig = field(default_factory=OutputConfig)
    study: StudyConfig = field(default_factory=StudyConfig)
    seed: int = 0
    source: str = "<string>"

    @property
    def n_species(self) -> int:
        return len(self.species)

    @property
    def entropy(self) -> bool:
        if self.output.entropy is None:
            return self.scenario == "space_homogeneous"
        return self.output.entropy


# ---------------------------------------------------------------- validation helpers

class _Table:
    """Dict wrapper that records consumed keys and reports leftovers."""

    def __init__(self, data: dict, path: str):
        if not isinstance(data, dict):
            raise ConfigurationError(f"{path or 'top level'}: expected a table")
        self.data = data
        self.path = path
        self.used: set[str] = set()

    def _name(self, key):
        return f"{self.path}.{key}" if self.path else key

    def has(self, key):
        return key in self.data

    def get(self, key, default=None):
        self.used.add(key)
        return self.data.get(key, default)

    def require(self, key):
        if key not in self.data:
            raise ConfigurationError(f"missing required field '{self._name(key)}'")
        return self.get(key)

    def number(self, key, default=None, *, positive=False, nonneg=False, required=False):
        raw = self.require(key) if required else self.get(key, default)
        if raw is None:
            return None
        if isinstance(raw, bool) or not isinstance(raw, (int, float)) or not math.isfinite(raw):
            raise ConfigurationError(f"field '{self._name(key)}' must be a finite number, got {raw!r}")
        if positive and raw <= 0:
            raise ConfigurationError(f"field '{self._name(key)}' must be > 0, got {raw}")
        if nonneg and raw < 0:
            raise ConfigurationError(f"field '{self._name(key)}' must be >= 0, got {raw}")
        return float(raw)

    def integer(self, key, default=None, *, minimum=None, required=False):
        raw = self.require(key) if required else self.get(key, default)
        if isinstance(raw, bool) or not isinstance(raw, int):
            raise ConfigurationError(f"field '{self._name(key)}' must be an integer, got {raw!r}")
        if minimum is not None and raw < minimum:
            raise ConfigurationError(f"field '{self._name(key)}' must be >= {minimum}, got {raw}")
        return raw

    def boolean(self, key, default=None):
        raw = self.get(key, default)
        if raw is not None and not isinstance(raw, bool):
            raise ConfigurationError(f"field '{self._name(key)}' must be true or false, got {raw!r}")
        return raw

    def choice(self, key, options, default=None, required=False):
        raw = self.require(key) if required else self.get(key, default)
        if raw not in options:
            raise ConfigurationError(f"field '{self._name(key)}' must be one of {list(options)}, got {raw!r}")
        return raw

    def string(self, key, default=None, required=False):
        raw = self.require(key) if required else self.get(key, default)
        if not isinstance(raw, str) or not raw:
            raise ConfigurationError(f"field '{self._name(key)}' must be a non-empty string, got {raw!r}")
        return raw

    def vector(self, key, default=None, length=3):
        raw = self.get(key, default)
        if raw is None:
            return None
        if not isinstance(raw, list) or len(raw) != length or not all(
                isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x) for x in raw):
            raise ConfigurationError(f"field '{self._name(key)}' must be a list of {length} finite numbers")
        return tuple(float(x) for x in raw)

    def table(self, key) -> "_Table":
        return _Table(self.get(key, {}), self._name(key))

    def tables(self, key) -> list["_Table"]:
        raw = self.get(key, [])
        if not isinstance(raw, list):
            raise ConfigurationError(f"'{self._name(key)}' must be written as repeated [[{key}]] blocks")
        return [_Table(item, f"{self._name(key)}[{k}]") for k, item in enumerate(raw)]

    def close(self):
        extra = sorted(set(self.data) - self.used)
        if extra:
            raise ConfigurationError(f"unknown key '{self._name(extra[0])}'")


def _species_index(tab: _Table, key: str, n_species: int) -> tuple[int, int]:
    raw = tab.require(key)
    if (not isinstance(raw, list) or len(raw) != 2
            or not all(isinstance(x, int) and not isinstance(x, bool) for x in raw)):
        raise ConfigurationError(f"field '{tab._name(key)}' must be a pair of species indices")
    for x in raw:
        if not 0 <= x < n_species:
            raise ConfigurationError(
                f"field '{tab._name(key)}' references species {x}, but only {n_species} are defined "
                f"(indices start at 0)")
    return tuple(raw)


def _moments(tab: _Table):
    n = tab.number("n", positive=True, required=True)
    u = tab.vector("u", [0.0, 0.0, 0.0])
    T = tab.number("T", positive=True, required=True)
    return n, u, T


def _species(tab: _Table, length: float) -> SpeciesConfig:
    name = tab.string("name", required=True)
    mass = tab.number("mass", positive=True, required=True)
    regions = []
    if tab.has("region"):
        for r in (tab.tables("region")):
            x_min = r.number("x_min", 0.0)
            x_max = r.number("x_max", length)
            if x_max <= x_min:
                raise ConfigurationError(f"{r.path}: x_max must exceed x_min")
            regions.append(Region(x_min, x_max, *_moments(r)))
            r.close()
        for key in ("n", "u", "T"):
            if tab.has(key):
                raise ConfigurationError(f"{tab.path}: give either '{key}' or [[region]] blocks, not both")
    else:
        regions.append(Region(0.0, length, *_moments(tab)))
    tab.close()
    return SpeciesConfig(name, mass, tuple(regions))


def _build(data: dict, source: str) -> RunConfig:
    top = _Table(data, "")
    scenario = top.choice("scenario", SCENARIOS, required=True)
    seed = top.integer("seed", 0, minimum=0)

    sp = top.table("space")
    space = SpaceConfig(
        length=sp.number("length", 1.0, positive=True),
        cells=sp.integer("cells", 1, minimum=1),
        boundary=sp.choice("boundary", BOUNDARIES, "periodic"),
        limiter=sp.boolean("limiter", False),
    )
    sp.close()

    species_tabs = top.tables("species")
    if not species_tabs:
        raise ConfigurationError("at least one [[species]] block is required")
    species = tuple(_species(t, space.length) for t in species_tabs)
    names = [s.name for s in species]
    if len(set(names)) != len(names):
        raise ConfigurationError("species names must be unique")
    S = len(species)

    pairs = []
    seen = set()
    for t in top.tables("pair"):
        i, j = _species_index(t, "species", S)
        key = (min(i, j), max(i, j))
        if key in seen:
            raise ConfigurationError(f"{t.path}: pair {list(key)} is configured twice")
        seen.add(key)
        nu = t.number("nu_multiplier", 1.0)
        if nu < 0.5:
            raise ConfigurationError(f"field '{t.path}.nu_multiplier' must be >= 0.5 "
                                     f"(frequency admissibility), got {nu}")
        pairs.append(PairConfig(key, t.choice("kernel", KERNELS, "maxwell"),
                                t.number("strength", DEFAULT_STRENGTH, nonneg=True), nu))
        t.close()

    col = top.table("collision")
    collision = CollisionConfig(
        angular_order=col.integer("angular_order", 8, minimum=2),
        deposit=col.choice("deposit", ("quadratic", "trilinear"), "quadratic"),
        matched=col.boolean("matched", True),
        selector_default=col.choice("selector_default", (0, 1), 0),
        light_heavy=col.choice("light_heavy", ("bgk", "boltzmann"), "bgk"),
    )
    col.close()

    rules = []
    for t in top.tables("rule"):
        x_min = t.number("x_min", 0.0)
        x_max = t.number("x_max", space.length)
        if x_max <= x_min:
            raise ConfigurationError(f"{t.path}: x_max must exceed x_min")
        rules.append(RuleConfig(x_min, x_max, _species_index(t, "species", S), t.choice("bit", (0, 1), required=True)))
        t.close()

    vg = top.table("velocity_grid")
    bmin, bmax = vg.vector("bounds_min"), vg.vector("bounds_max")
    if (bmin is None) != (bmax is None):
        raise ConfigurationError("velocity_grid: give both bounds_min and bounds_max or neither")
    if bmin is not None and not all(b > a for a, b in zip(bmin, bmax)):
        raise ConfigurationError("velocity_grid: bounds_max must exceed bounds_min on every axis")
    vgrid = VelocityGridConfig(vg.integer("points", 16, minimum=3), vg.number("width_factor", 6.0, positive=True),
                               bmin, bmax)
    vg.close()

    tm = top.table("time")
    dt = tm.get("dt", "auto")
    if dt != "auto":
        if isinstance(dt, bool) or not isinstance(dt, (int, float)) or not dt > 0 or not math.isfinite(dt):
            raise ConfigurationError(f"field 'time.dt' must be \"auto\" or a positive number, got {dt!r}")
        dt = float(dt)
    cfl = tm.number("cfl", 0.9, positive=True)
    if cfl > 1:
        raise ConfigurationError(f"field 'time.cfl' must lie in (0, 1], got {cfl}")
    time = TimeConfig(
        t_end=tm.number("t_end", 1.0, positive=True),
        dt=dt,
        cfl=cfl,
        scheme=tm.choice("scheme", SCHEMES, "implicit_bgk_exponential"),
        epsilon=tm.number("epsilon", 1.0, positive=True),
        scaling=tm.choice("scaling", SCALINGS, "unscaled"),
        equilibrium_tolerance=tm.number("equilibrium_tolerance", 0.0, nonneg=True),
        wall_clock_limit=tm.number("wall_clock_limit", None, positive=True),
    )
    tm.close()

    out = top.table("output")
    fields = out.get("fields", list(FIELDS))
    if not isinstance(fields, list) or not fields or any(f not in FIELDS for f in fields) or len(set(fields)) != len(fields):
        raise ConfigurationError(f"field 'output.fields' must be a non-empty subset of {list(FIELDS)}")
    output = OutputConfig(
        directory=out.string("directory", "output"),
        interval=out.number("interval", None, positive=True),
        fields=tuple(f for f in FIELDS if f in fields),
        include_distributions=out.boolean("include_distributions", False),
        entropy=out.boolean("entropy", None),
    )
    out.close()

    st = top.table("epsilon_study")
    eps = st.get("epsilons", [0.1, 0.01])
    if (not isinstance(eps, list) or not eps
            or not all(isinstance(e, (int, float)) and not isinstance(e, bool) and e > 0 for e in eps)):
        raise ConfigurationError("field 'epsilon_study.epsilons' must be a non-empty list of positive numbers")
    study = StudyConfig(tuple(float(e) for e in eps),
                        st.choice("reference", ("euler_st", "euler_mt", "kinetic_fluid"), "euler_st"),
                        st.integer("reference_refinement", 4, minimum=1))
    st.close()
    top.close()

    if scenario == "space_homogeneous" and space.cells != 1:
        raise ConfigurationError("scenario 'space_homogeneous' needs space.cells = 1")
    if scenario in ("euler_mt", "kinetic_fluid") and S != 2:
        raise ConfigurationError(f"scenario '{scenario}' handles exactly two species")
    if time.scaling == "heavy_dominant" and S != 2:
        raise ConfigurationError("scaling 'heavy_dominant' needs exactly two species")
    if scenario == "epsilon_study" and study.reference != "euler_st" and S != 2:
        raise ConfigurationError(f"reference '{study.reference}' handles exactly two species")

    return RunConfig(scenario, species, tuple(pairs), tuple(rules), vgrid, space, collision, time, output,
                     study, seed, source)


def parse_config_text(text: str, source: str = "<string>") -> RunConfig:
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigurationError(f"{source}: parse error: {exc}") from None
    try:
        return _build(data, source)
    except ConfigurationError as exc:
        raise ConfigurationError(f"{source}: {exc}") from None


def parse_config(path: str | Path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigurationError(f"cannot read config file {path}: {exc.strerror or exc}") from None
    return parse_config_text(text, str(path))

