"""
Shared numeric foundations: polynomial potentials with exact derivatives,
uniform spatial and time grids, and deterministic random-number streams.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, List, Optional, Sequence, Tuple, TypeVar, Union

import numpy as np
from numpy.polynomial import Polynomial

from .utils import UsageError, require_finite, require_int, require_positive

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]
T = TypeVar("T")

POTENTIAL_KINDS = (
    "harmonic",
    "quartic",
    "cubic-perturbed-harmonic",
    "quartic-perturbed-harmonic",
    "polynomial",
)
MAX_DEGREE = 4
MIN_GRID_POINTS = 8
DEFAULT_BLOCK_SIZE = 4096


@dataclass(frozen=True)
class Potential1D:
    """
    One-dimensional polynomial potential V(x) of degree <= 4.

    ``coefficients`` are ascending powers of x (c0 + c1 x + ... + c4 x^4) in
    energy units. All derivatives are taken from the polynomial itself, never
    by finite differences.
    """

    kind: str
    coefficients: Tuple[float, ...]
    mass: float = 1.0

    def __post_init__(self) -> None:
        if self.kind not in POTENTIAL_KINDS:
            raise UsageError(
                f"Unsupported potential kind '{self.kind}', expected one of {POTENTIAL_KINDS}"
            )
        require_positive("mass", self.mass)
        coefficients = tuple(require_finite("coefficient", c) for c in self.coefficients)
        if not coefficients:
            coefficients = (0.0,)
        if len(coefficients) > MAX_DEGREE + 1:
            raise UsageError(
                f"Potentials are limited to degree {MAX_DEGREE}, "
                f"got {len(coefficients)} coefficients"
            )
        object.__setattr__(self, "coefficients", coefficients)

    @cached_property
    def _derivatives(self) -> Tuple[Polynomial, ...]:
        poly = Polynomial(self.coefficients)
        return tuple(poly.deriv(k) if k else poly for k in range(4))

    def derivative(self, x: ArrayLike, order: int = 0) -> ArrayLike:
        """Exact ``order``-th derivative of V at ``x`` (scalar or array)."""
        if isinstance(order, bool) or order not in (0, 1, 2, 3):
            raise UsageError(f"Derivative order must be 0..3, got {order!r}")
        result = self._derivatives[order](np.asarray(x, dtype=float))
        return float(result) if np.ndim(result) == 0 else result

    def value(self, x: ArrayLike) -> ArrayLike:
        return self.derivative(x, 0)

    def force(self, x: ArrayLike) -> ArrayLike:
        """Conservative force -dV/dx."""
        return -np.asarray(self.derivative(x, 1))

    @property
    def has_cubic_term(self) -> bool:
        """True when the third derivative is not identically zero."""
        return any(c != 0.0 for c in self.coefficients[3:])


def harmonic(omega: float = 1.0, mass: float = 1.0) -> Potential1D:
    """V = m omega^2 x^2 / 2."""
    omega = require_positive("omega", omega)
    return Potential1D("harmonic", (0.0, 0.0, 0.5 * mass * omega**2), mass)


def quartic(strength: float = 1.0, mass: float = 1.0) -> Potential1D:
    """V = strength x^4 / 4."""
    strength = require_positive("strength", strength)
    return Potential1D("quartic", (0.0, 0.0, 0.0, 0.0, 0.25 * strength), mass)


def cubic_perturbed_harmonic(
    omega: float = 1.0, strength: float = 0.1, mass: float = 1.0
) -> Potential1D:
    """V = m omega^2 x^2 / 2 + strength x^3 / 3 (constant third derivative)."""
    omega = require_positive("omega", omega)
    strength = require_finite("strength", strength)
    return Potential1D(
        "cubic-perturbed-harmonic",
        (0.0, 0.0, 0.5 * mass * omega**2, strength / 3.0),
        mass,
    )


def quartic_perturbed_harmonic(
    omega: float = 1.0, strength: float = 0.05, mass: float = 1.0
) -> Potential1D:
    """V = m omega^2 x^2 / 2 + strength x^4 / 4."""
    omega = require_positive("omega", omega)
    strength = require_non_negative_strength(strength)
    return Potential1D(
        "quartic-perturbed-harmonic",
        (0.0, 0.0, 0.5 * mass * omega**2, 0.0, 0.25 * strength),
        mass,
    )


def polynomial(coefficients: Sequence[float], mass: float = 1.0) -> Potential1D:
    """Arbitrary polynomial of degree <= 4 from ascending coefficients."""
    return Potential1D("polynomial", tuple(coefficients), mass)


def require_non_negative_strength(strength: float) -> float:
    strength = require_finite("strength", strength)
    if strength < 0:
        raise UsageError(f"strength must be >= 0 for a confining well, got {strength}")
    return strength


def potential_eval(pot: Potential1D, x: ArrayLike, order: int = 0) -> ArrayLike:
    """
    Evaluate V or one of its first three derivatives.

    Args:
        pot: The potential
        x: Position(s)
        order: Derivative order, 0..3

    Returns:
        Exact derivative of the configured polynomial at x

    Raises:
        UsageError: If the order is not in 0..3
    """
    return pot.derivative(x, order)


@dataclass(frozen=True)
class SpatialGrid:
    """Uniform grid of ``n_points`` nodes from ``x_min`` to ``x_max`` inclusive."""

    x_min: float
    x_max: float
    n_points: int

    def __post_init__(self) -> None:
        x_min = require_finite("x_min", self.x_min)
        x_max = require_finite("x_max", self.x_max)
        if not x_max > x_min:
            raise UsageError(f"Grid bounds are inverted: x_min={x_min}, x_max={x_max}")
        n_points = require_int("n_points", self.n_points, MIN_GRID_POINTS)
        object.__setattr__(self, "x_min", x_min)
        object.__setattr__(self, "x_max", x_max)
        object.__setattr__(self, "n_points", n_points)

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / (self.n_points - 1)

    @property
    def span(self) -> float:
        return self.x_max - self.x_min

    @cached_property
    def points(self) -> np.ndarray:
        points = np.linspace(self.x_min, self.x_max, self.n_points)
        points.flags.writeable = False
        return points

    def coordinate(self, index: Union[int, np.ndarray]) -> ArrayLike:
        return self.x_min + np.asarray(index) * self.dx

    def index_of(self, x: ArrayLike) -> Union[int, np.ndarray]:
        """Nearest node index for coordinate(s) x."""
        index = np.rint((np.asarray(x, dtype=float) - self.x_min) / self.dx).astype(int)
        return int(index) if index.ndim == 0 else index

    def integrate(self, values: np.ndarray, axis: int = -1) -> ArrayLike:
        """Rectangle-rule integral, the quadrature used for every grid density."""
        return np.sum(values, axis=axis) * self.dx

    def same_as(self, other: "SpatialGrid", rtol: float = 1e-12) -> bool:
        return self.n_points == other.n_points and bool(
            np.allclose(
                [self.x_min, self.x_max], [other.x_min, other.x_max], rtol=rtol, atol=rtol
            )
        )


def make_grid(x_min: float, x_max: float, n_points: int) -> SpatialGrid:
    """
    Build a uniform spatial grid.

    Raises:
        UsageError: If bounds are inverted or fewer than 8 points are requested
    """
    return SpatialGrid(x_min, x_max, n_points)


@dataclass(frozen=True)
class TimeGrid:
    """Polygonal time slicing: ``n_slices`` slices of length eps over [t_a, t_b]."""

    t_a: float
    t_b: float
    n_slices: int

    def __post_init__(self) -> None:
        t_a = require_finite("t_a", self.t_a)
        t_b = require_finite("t_b", self.t_b)
        if not t_b > t_a:
            raise UsageError(f"Time interval is empty or inverted: t_a={t_a}, t_b={t_b}")
        n_slices = require_int("n_slices", self.n_slices, 1)
        object.__setattr__(self, "t_a", t_a)
        object.__setattr__(self, "t_b", t_b)
        object.__setattr__(self, "n_slices", n_slices)

    @property
    def eps(self) -> float:
        return (self.t_b - self.t_a) / self.n_slices

    @property
    def duration(self) -> float:
        return self.t_b - self.t_a

    @property
    def times(self) -> np.ndarray:
        return self.t_a + self.eps * np.arange(self.n_slices + 1)

    def split(self, k: int) -> Tuple["TimeGrid", "TimeGrid"]:
        """Split after slice k into two grids with the same eps."""
        k = require_int("k", k, 1)
        if k >= self.n_slices:
            raise UsageError(f"Split point {k} must be below n_slices={self.n_slices}")
        t_m = self.t_a + k * self.eps
        return (
            TimeGrid(self.t_a, t_m, k),
            TimeGrid(t_m, self.t_b, self.n_slices - k),
        )


def make_time_grid(t_a: float, t_b: float, n_slices: int) -> TimeGrid:
    return TimeGrid(t_a, t_b, n_slices)


@dataclass(frozen=True)
class RngStream:
    """
    Deterministic random stream identified by (seed, index).

    Generators are PCG64 seeded through ``SeedSequence(seed, spawn_key=...)``,
    so distinct keys give independent sequences and a given key reproduces the
    same sequence on every run.
    """

    seed: int
    index: int = 0
    path: Tuple[int, ...] = field(default=())

    def __post_init__(self) -> None:
        seed = require_int("seed", self.seed, 0)
        if seed >= 2**64:
            raise UsageError(f"seed must fit in 64 bits, got {seed}")
        require_int("index", self.index, 0)

    def child(self, i: int) -> "RngStream":
        """Independent sub-stream, e.g. one for initial conditions, one for noise."""
        return RngStream(self.seed, self.index, self.path + (require_int("child", i, 0),))

    def generator(self, block: int = 0) -> np.random.Generator:
        key = (self.index,) + self.path + (block,)
        return np.random.Generator(np.random.PCG64(np.random.SeedSequence(self.seed, spawn_key=key)))

    @property
    def provenance(self) -> str:
        return f"seed={self.seed} index={self.index} path={'/'.join(map(str, self.path)) or '-'}"


def block_bounds(n_total: int, block_size: int = DEFAULT_BLOCK_SIZE) -> List[Tuple[int, int]]:
    """Fixed partition of ``n_total`` trajectories into [start, stop) blocks."""
    n_total = require_int("n_total", n_total, 0)
    block_size = require_int("block_size", block_size, 1)
    return [(start, min(start + block_size, n_total)) for start in range(0, n_total, block_size)]


def run_blocks(
    n_total: int,
    rng: RngStream,
    fn: Callable[[np.random.Generator, int, int], T],
    block_size: int = DEFAULT_BLOCK_SIZE,
    workers: int = 1,
) -> List[T]:
    """
    Run ``fn(generator, start, stop)`` over fixed trajectory blocks.

    Block b always draws from ``rng.generator(b)`` and results come back in
    block order, so the output does not depend on ``workers``.
    """
    bounds = block_bounds(n_total, block_size)
    workers = require_int("workers", workers, 1)

    def job(item: Tuple[int, Tuple[int, int]]) -> T:
        block, (start, stop) = item
        return fn(rng.generator(block), start, stop)

    if workers == 1 or len(bounds) <= 1:
        return [job(item) for item in enumerate(bounds)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(job, enumerate(bounds)))


def histogram_density(
    samples: np.ndarray, grid: SpatialGrid, weights: Optional[np.ndarray] = None
) -> np.ndarray:
    """
    Density estimate on grid nodes from (optionally weighted) samples.

    Bins are centered on the nodes with width dx and the result is divided by
    the total weight, so it integrates to the fraction of weight on the grid.
    """
    samples = np.asarray(samples, dtype=float)
    edges = np.concatenate(([grid.x_min - 0.5 * grid.dx], grid.points + 0.5 * grid.dx))
    if weights is None:
        total = float(samples.size)
        counts, _ = np.histogram(samples, bins=edges)
    else:
        weights = np.asarray(weights, dtype=float)
        total = float(np.sum(weights))
        counts, _ = np.histogram(samples, bins=edges, weights=weights)
    if total == 0:
        raise UsageError("Cannot form a density from zero total weight")
    return counts / (total * grid.dx)
