"""
Run configuration: a JSON document validated into nested frozen dataclasses.

Every experiment starts from its own defaults (``defaults_for``); a config
file only needs ``experiment`` plus the keys it changes. Unknown keys, wrong
types and out-of-range values are all collected and reported together with
their dotted paths.
"""

import dataclasses
import hashlib
import json
import logging
import typing
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

from . import core
from .brownian import CONVENTIONS, BrownianParams, InitialDistribution
from .semiclassical import ProposalConfig
from .utils import ConfigError

logger = logging.getLogger(__name__)

EXPERIMENTS = ("brownian-triple", "quantum-reference", "classical-limit", "quasi-langevin", "airy-figure")
HALF_PI = 1.5707963267948966


@dataclass(frozen=True)
class PotentialConfig:
    kind: str = "harmonic"
    omega: float = 1.0
    strength: float = 0.0
    coefficients: Optional[Tuple[float, ...]] = None

    def build(self, mass: float = 1.0) -> core.Potential1D:
        if self.kind == "harmonic":
            return core.harmonic(self.omega, mass)
        if self.kind == "quartic":
            return core.quartic(self.strength, mass)
        if self.kind == "cubic-perturbed-harmonic":
            return core.cubic_perturbed_harmonic(self.omega, self.strength, mass)
        if self.kind == "quartic-perturbed-harmonic":
            return core.quartic_perturbed_harmonic(self.omega, self.strength, mass)
        return core.polynomial(self.coefficients or (), mass)


@dataclass(frozen=True)
class PhysicsConfig:
    hbar: float = 1.0
    mass: float = 1.0
    gamma: float = 1.0
    temperature: float = 1.0
    k_b: float = 1.0

    def brownian(self) -> BrownianParams:
        return BrownianParams(self.mass, self.gamma, self.temperature, self.k_b)


@dataclass(frozen=True)
class GridConfig:
    x_min: float = -4.0
    x_max: float = 4.0
    n_points: int = 256
    n_xi: Optional[int] = None

    def build(self) -> core.SpatialGrid:
        return core.make_grid(self.x_min, self.x_max, self.n_points)


@dataclass(frozen=True)
class TimeConfig:
    t_a: float = 0.0
    t_b: float = 1.0
    n_slices: int = 100

    def build(self) -> core.TimeGrid:
        return core.make_time_grid(self.t_a, self.t_b, self.n_slices)


@dataclass(frozen=True)
class SolverConfig:
    theta: float = 0.5
    convention: str = "pre-point"


@dataclass(frozen=True)
class EnsembleConfig:
    n_traj: int = 100_000
    block_size: int = core.DEFAULT_BLOCK_SIZE
    workers: int = 1
    histogram_bins: int = 128


@dataclass(frozen=True)
class InitialConfig:
    x0: float = 0.0
    p0: float = 0.0
    sigma: float = 1.0

    def distribution(self) -> InitialDistribution:
        return InitialDistribution(self.x0, self.sigma)


@dataclass(frozen=True)
class ProposalSection:
    truncation: float = 20.0
    upper: float = 10.0
    sign_floor: float = 0.01
    measure_factor: bool = True

    def build(self) -> ProposalConfig:
        return ProposalConfig(self.truncation, self.upper, self.sign_floor, self.measure_factor)


@dataclass(frozen=True)
class OutputConfig:
    directory: str = "results"


@dataclass(frozen=True)
class RunConfig:
    experiment: str
    seed: int = 0
    potential: PotentialConfig = field(default_factory=PotentialConfig)
    physics: PhysicsConfig = field(default_factory=PhysicsConfig)
    grid: GridConfig = field(default_factory=GridConfig)
    time: TimeConfig = field(default_factory=TimeConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)
    ensemble: EnsembleConfig = field(default_factory=EnsembleConfig)
    initial: InitialConfig = field(default_factory=InitialConfig)
    proposal: ProposalSection = field(default_factory=ProposalSection)
    output: OutputConfig = field(default_factory=OutputConfig)

    def potential_model(self) -> core.Potential1D:
        return self.potential.build(self.physics.mass)

    def rng(self) -> core.RngStream:
        return core.RngStream(self.seed)


_EXPERIMENT_DEFAULTS: Dict[str, Dict[str, Dict[str, Any]]] = {
    "brownian-triple": {
        "initial": {"x0": 1.0, "sigma": 0.5},
    },
    "quantum-reference": {
        "grid": {"x_min": -6.0, "x_max": 6.0, "n_points": 64},
        "time": {"t_b": HALF_PI, "n_slices": 50},
        "initial": {"x0": 1.0, "sigma": 0.7071067811865476},
    },
    "classical-limit": {
        "grid": {"x_min": -8.0, "x_max": 8.0, "n_points": 257},
        "time": {"t_b": HALF_PI, "n_slices": 200},
        "ensemble": {"n_traj": 20_000},
        "initial": {"x0": 1.0, "sigma": 0.7071067811865476},
    },
    "quasi-langevin": {
        "potential": {"kind": "quartic-perturbed-harmonic", "strength": 0.05},
        "grid": {"x_min": -8.0, "x_max": 8.0, "n_points": 257},
        "time": {"t_b": 0.5, "n_slices": 3},
        "initial": {"x0": 1.0, "sigma": 0.7071067811865476},
    },
    "airy-figure": {
        "grid": {"x_min": -12.0, "x_max": 4.0, "n_points": 1601},
    },
}


def defaults_for(experiment: str) -> RunConfig:
    """Effective default configuration of an experiment."""
    if experiment not in EXPERIMENTS:
        raise ConfigError([("experiment", f"unknown experiment '{experiment}', expected one of {EXPERIMENTS}")])
    overrides = _EXPERIMENT_DEFAULTS[experiment]
    sections = {}
    for f in dataclasses.fields(RunConfig):
        if f.name in ("experiment", "seed"):
            continue
        section = f.default_factory()  # type: ignore[misc]
        sections[f.name] = dataclasses.replace(section, **overrides.get(f.name, {}))
    return RunConfig(experiment=experiment, **sections)


def _type_name(annotation: Any) -> str:
    return getattr(annotation, "__name__", str(annotation))


def _coerce(path: str, value: Any, annotation: Any, errors: List[Tuple[str, str]]) -> Any:
    origin = typing.get_origin(annotation)
    args = typing.get_args(annotation)
    if origin is typing.Union and type(None) in args:
        if value is None:
            return None
        inner = next(a for a in args if a is not type(None))
        return _coerce(path, value, inner, errors)
    if origin is tuple:
        if not isinstance(value, (list, tuple)):
            errors.append((path, f"expected a list of numbers, got {value!r}"))
            return None
        return tuple(_coerce(f"{path}[{k}]", item, float, errors) for k, item in enumerate(value))
    if annotation is bool:
        if not isinstance(value, bool):
            errors.append((path, f"expected true or false, got {value!r}"))
        return value
    if annotation is int:
        if isinstance(value, bool) or not isinstance(value, int):
            errors.append((path, f"expected an integer, got {value!r}"))
        return value
    if annotation is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            errors.append((path, f"expected a number, got {value!r}"))
            return value
        return float(value)
    if annotation is str:
        if not isinstance(value, str):
            errors.append((path, f"expected a string, got {value!r}"))
        return value
    errors.append((path, f"unsupported type {_type_name(annotation)}"))
    return value


def _merge_section(path: str, base: Any, given: Any, errors: List[Tuple[str, str]]) -> Any:
    if not isinstance(given, dict):
        errors.append((path, f"expected an object, got {given!r}"))
        return base
    hints = typing.get_type_hints(type(base))
    names = {f.name for f in dataclasses.fields(base)}
    updates = {}
    for key, value in given.items():
        if key not in names:
            errors.append((f"{path}.{key}", "unknown key"))
            continue
        updates[key] = _coerce(f"{path}.{key}", value, hints[key], errors)
    return dataclasses.replace(base, **updates)


def _check(errors: List[Tuple[str, str]], condition: bool, path: str, message: str) -> None:
    if not condition:
        errors.append((path, message))


def validate_config(cfg: RunConfig) -> List[Tuple[str, str]]:
    """Range checks; returns every (path, message) problem found."""
    errors: List[Tuple[str, str]] = []
    p, ph, g, t, e, i, pr = cfg.potential, cfg.physics, cfg.grid, cfg.time, cfg.ensemble, cfg.initial, cfg.proposal
    _check(errors, 0 <= cfg.seed < 2**64, "seed", "must be in [0, 2^64)")
    _check(errors, p.kind in core.POTENTIAL_KINDS, "potential.kind", f"must be one of {core.POTENTIAL_KINDS}")
    _check(errors, p.omega > 0, "potential.omega", "must be > 0")
    if p.kind == "quartic":
        _check(errors, p.strength > 0, "potential.strength", "must be > 0 for a pure quartic")
    if p.kind == "quartic-perturbed-harmonic":
        _check(errors, p.strength >= 0, "potential.strength", "must be >= 0")
    if p.kind == "polynomial":
        _check(errors, p.coefficients is not None, "potential.coefficients", "missing required key for a polynomial")
        if p.coefficients is not None:
            _check(errors, len(p.coefficients) <= 5, "potential.coefficients", "at most 5 coefficients (degree <= 4)")
    for name in ("hbar", "mass", "gamma", "k_b"):
        _check(errors, getattr(ph, name) > 0, f"physics.{name}", "must be > 0")
    _check(errors, ph.temperature >= 0, "physics.temperature", "must be >= 0")
    _check(errors, g.x_max > g.x_min, "grid.x_max", "must be greater than grid.x_min")
    _check(errors, g.n_points >= core.MIN_GRID_POINTS, "grid.n_points", f"must be >= {core.MIN_GRID_POINTS}")
    if g.n_xi is not None:
        valid_xi = g.n_xi % 2 == 1 and 9 <= g.n_xi <= g.n_points
        _check(errors, valid_xi, "grid.n_xi", "must be odd, >= 9 and <= grid.n_points")
    _check(errors, t.t_b > t.t_a, "time.t_b", "must be greater than time.t_a")
    _check(errors, t.n_slices >= 1, "time.n_slices", "must be >= 1")
    _check(errors, 0.0 <= cfg.solver.theta <= 1.0, "solver.theta", "must lie in [0, 1]")
    _check(errors, cfg.solver.convention in CONVENTIONS, "solver.convention", f"must be one of {CONVENTIONS}")
    _check(errors, e.n_traj >= 0, "ensemble.n_traj", "must be >= 0")
    _check(errors, e.block_size >= 1, "ensemble.block_size", "must be >= 1")
    _check(errors, e.workers >= 1, "ensemble.workers", "must be >= 1")
    bins_ok = e.histogram_bins >= core.MIN_GRID_POINTS
    _check(errors, bins_ok, "ensemble.histogram_bins", f"must be >= {core.MIN_GRID_POINTS}")
    _check(errors, i.sigma >= 0, "initial.sigma", "must be >= 0")
    if cfg.experiment in ("quantum-reference", "classical-limit", "quasi-langevin"):
        _check(errors, i.sigma > 0, "initial.sigma", "must be > 0 for a wave packet")
    if cfg.experiment == "brownian-triple":
        _check(errors, ph.temperature > 0, "physics.temperature", "must be > 0 for density evolution")
    _check(errors, pr.truncation > 0, "proposal.truncation", "must be > 0")
    _check(errors, pr.upper > 0, "proposal.upper", "must be > 0")
    _check(errors, 0.0 <= pr.sign_floor <= 1.0, "proposal.sign_floor", "must lie in [0, 1]")
    _check(errors, bool(cfg.output.directory), "output.directory", "must not be empty")
    return errors


def parse_config(text: str, experiment: Optional[str] = None) -> RunConfig:
    """
    Parse and validate a JSON run configuration.

    Args:
        text: JSON document
        experiment: Experiment implied by the caller (CLI subcommand); must
            agree with the document's ``experiment`` key when both are given

    Returns:
        RunConfig: Defaults of the experiment overlaid with the document

    Raises:
        ConfigError: With every problem found, each as (dotted path, message)
    """
    try:
        document = json.loads(text) if text.strip() else {}
    except json.JSONDecodeError as e:
        raise ConfigError([("", f"invalid JSON: {e}")])
    if not isinstance(document, dict):
        raise ConfigError([("", "top level must be an object")])

    named = document.get("experiment")
    if named is None and experiment is None:
        raise ConfigError([("experiment", "missing required key")])
    if named is not None and experiment is not None and named != experiment:
        raise ConfigError([("experiment", f"config is for '{named}' but '{experiment}' was requested")])
    name = named if named is not None else experiment
    if name not in EXPERIMENTS:
        raise ConfigError([("experiment", f"unknown experiment {name!r}, expected one of {EXPERIMENTS}")])

    errors: List[Tuple[str, str]] = []
    cfg = defaults_for(name)
    updates: Dict[str, Any] = {}
    for key, value in document.items():
        if key == "experiment":
            continue
        if key == "seed":
            updates["seed"] = _coerce("seed", value, int, errors)
        elif key in {f.name for f in dataclasses.fields(RunConfig)}:
            updates[key] = _merge_section(key, getattr(cfg, key), value, errors)
        else:
            errors.append((key, "unknown key"))
    if errors:
        raise ConfigError(errors)
    cfg = dataclasses.replace(cfg, **updates)
    errors = validate_config(cfg)
    if errors:
        raise ConfigError(errors)
    logger.debug("Parsed %s config with hash %s", name, config_hash(cfg))
    return cfg


def serialize_config(cfg: RunConfig) -> str:
    """Canonical JSON: sorted keys, two-space indent, trailing newline."""
    return json.dumps(dataclasses.asdict(cfg), sort_keys=True, indent=2) + "\n"


def config_hash(cfg: RunConfig) -> str:
    """SHA-256 of the canonical serialization."""
    return hashlib.sha256(serialize_config(cfg).encode("utf-8")).hexdigest()
