"""
Overdamped Brownian motion three ways: Langevin trajectories, the
Fokker-Planck equation and the path-integral propagator.

The dynamics are dx/dt = -V'(x) / (m gamma) + R(t) with <R(t) R(s)> = 2D delta(t - s)
and D = k_B T / (m gamma).
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
from scipy import linalg, special

from .core import DEFAULT_BLOCK_SIZE, Potential1D, RngStream, SpatialGrid, TimeGrid, run_blocks
from .functionals import gaussian_path_log_weight
from .utils import (
    AccuracyError,
    ConfigError,
    NumericalStabilityError,
    UsageError,
    require_finite,
    require_int,
    require_non_negative,
    require_positive,
)

logger = logging.getLogger(__name__)

LANGEVIN_STABILITY_LIMIT = 0.5
EXPLICIT_CFL_LIMIT = 0.5
NEGATIVE_DENSITY_LIMIT = -1e-12
KERNEL_POINTS_PER_WIDTH = 4
MIN_NOISE_SAMPLES = 10_000
CONVENTIONS = ("pre-point", "midpoint")


@dataclass(frozen=True)
class BrownianParams:
    """Physical constants of the overdamped particle; D and beta are derived."""

    mass: float = 1.0
    gamma: float = 1.0
    temperature: float = 1.0
    k_b: float = 1.0

    def __post_init__(self) -> None:
        require_positive("mass", self.mass)
        require_positive("gamma", self.gamma)
        require_non_negative("temperature", self.temperature)
        require_positive("k_b", self.k_b)

    @property
    def diffusion(self) -> float:
        """D = k_B T / (m gamma)."""
        return self.k_b * self.temperature / (self.mass * self.gamma)

    @property
    def beta(self) -> float:
        """1 / (k_B T); infinite at T = 0."""
        if self.temperature == 0:
            return float("inf")
        return 1.0 / (self.k_b * self.temperature)

    @property
    def mobility(self) -> float:
        return 1.0 / (self.mass * self.gamma)

    def require_thermal(self) -> None:
        if self.temperature == 0:
            raise ConfigError([("physics.temperature", "must be > 0 for density evolution")])


@dataclass(frozen=True)
class InitialDistribution:
    """Gaussian initial positions; std = 0 places every trajectory at ``mean``."""

    mean: float = 0.0
    std: float = 0.0

    def __post_init__(self) -> None:
        require_finite("mean", self.mean)
        require_non_negative("std", self.std)

    def sample(self, gen: np.random.Generator, n: int) -> np.ndarray:
        if self.std == 0:
            return np.full(n, self.mean, dtype=float)
        return gen.normal(self.mean, self.std, n)

    def density(self, grid: SpatialGrid) -> np.ndarray:
        """Density on the grid nodes, normalized by the grid rule."""
        if self.std == 0:
            density = np.zeros(grid.n_points)
            density[grid.index_of(self.mean)] = 1.0 / grid.dx
            return density
        density = np.exp(-0.5 * ((grid.points - self.mean) / self.std) ** 2)
        return density / grid.integrate(density)


@dataclass(frozen=True)
class TrajectoryEnsemble:
    """
    Discretized trajectories over a time grid.

    ``paths`` (n_traj, N + 1), ``noise`` (n_traj, N) and ``log_weights`` are
    only present when requested.
    """

    times: np.ndarray
    terminal: np.ndarray
    provenance: str
    initial: Optional[np.ndarray] = None
    paths: Optional[np.ndarray] = None
    noise: Optional[np.ndarray] = None
    log_weights: Optional[np.ndarray] = None
    velocities: Optional[np.ndarray] = None

    @property
    def n_traj(self) -> int:
        return int(self.terminal.shape[0])


def _check_langevin_step(pot: Potential1D, params: BrownianParams, x: np.ndarray, eps: float, slice_index: int) -> None:
    if x.size == 0:
        return
    stiffness = float(np.max(np.abs(pot.derivative(x, 2)))) * params.mobility
    if eps * stiffness >= LANGEVIN_STABILITY_LIMIT:
        logger.warning("Langevin step unstable at slice %d: eps*|V''|/(m gamma) = %.3g", slice_index, eps * stiffness)
        message = f"eps*max|V''|/(m gamma) = {eps * stiffness:.3g} must stay below {LANGEVIN_STABILITY_LIMIT}"
        raise ConfigError([("time.n_slices", message)])


def _concatenate(blocks: List[Tuple[Optional[np.ndarray], ...]], position: int) -> Optional[np.ndarray]:
    parts = [block[position] for block in blocks]
    if not parts or parts[0] is None:
        return None
    return np.concatenate(parts, axis=0)


def langevin_simulate(
    params: BrownianParams,
    pot: Potential1D,
    initial: InitialDistribution,
    time: TimeGrid,
    n_traj: int,
    rng: RngStream,
    store_paths: bool = False,
    record_noise: bool = False,
    block_size: int = DEFAULT_BLOCK_SIZE,
    workers: int = 1,
) -> TrajectoryEnsemble:
    """
    Euler-Maruyama integration of the overdamped Langevin equation.

    Each slice draws R_k ~ Normal(0, 2D / eps) and updates
    x_{k+1} = x_k + eps [-V'(x_k) / (m gamma) + R_k].

    Raises:
        ConfigError: If eps * max|V''(x_k)| / (m gamma) >= 0.5 on any slice
    """
    n_traj = require_int("n_traj", n_traj, 0)
    eps = time.eps
    noise_std = np.sqrt(2.0 * params.diffusion / eps)

    def block(gen: np.random.Generator, start: int, stop: int):
        x = initial.sample(gen, stop - start)
        x0 = x.copy()
        paths = np.empty((x.size, time.n_slices + 1)) if store_paths else None
        noise = np.empty((x.size, time.n_slices)) if record_noise else None
        if paths is not None:
            paths[:, 0] = x
        for k in range(time.n_slices):
            _check_langevin_step(pot, params, x, eps, k)
            r = gen.normal(0.0, noise_std, x.size) if noise_std > 0 else np.zeros(x.size)
            x = x + eps * (params.mobility * np.asarray(pot.force(x)) + r)
            if paths is not None:
                paths[:, k + 1] = x
            if noise is not None:
                noise[:, k] = r
        return x, x0, paths, noise

    blocks = run_blocks(n_traj, rng, block, block_size, workers)
    logger.info("Langevin: %d trajectories, %d slices, D=%g", n_traj, time.n_slices, params.diffusion)
    return TrajectoryEnsemble(
        times=time.times,
        terminal=_concatenate(blocks, 0) if blocks else np.empty(0),
        provenance=rng.provenance,
        initial=_concatenate(blocks, 1),
        paths=_concatenate(blocks, 2),
        noise=_concatenate(blocks, 3),
    )


def functional_form_simulate(
    params: BrownianParams,
    pot: Potential1D,
    initial: InitialDistribution,
    time: TimeGrid,
    n_traj: int,
    rng: RngStream,
    store_paths: bool = False,
    block_size: int = DEFAULT_BLOCK_SIZE,
    workers: int = 1,
) -> TrajectoryEnsemble:
    """
    Noise-first simulation: draw whole noise paths, then solve for x.

    Every path R is drawn at once from the Gaussian functional
    exp{-(eps / 4D) sum R_k^2} (the Gaussian weight with D -> 2D). The delta
    constraint then selects the unique trajectory of x' = -V'/(m gamma) + R.
    The log Gaussian weight of each noise path is returned in ``log_weights``.
    """
    n_traj = require_int("n_traj", n_traj, 0)
    params.require_thermal()
    eps = time.eps
    noise_std = np.sqrt(2.0 * params.diffusion / eps)

    def block(gen: np.random.Generator, start: int, stop: int):
        x = initial.sample(gen, stop - start)
        noise = gen.normal(0.0, noise_std, (x.size, time.n_slices))
        paths = np.empty((x.size, time.n_slices + 1)) if store_paths else None
        if paths is not None:
            paths[:, 0] = x
        for k in range(time.n_slices):
            _check_langevin_step(pot, params, x, eps, k)
            x = x + eps * (params.mobility * np.asarray(pot.force(x)) + noise[:, k])
            if paths is not None:
                paths[:, k + 1] = x
        log_weights = np.atleast_1d(gaussian_path_log_weight(noise, 2.0 * params.diffusion, eps))
        return x, paths, log_weights

    blocks = run_blocks(n_traj, rng, block, block_size, workers)
    return TrajectoryEnsemble(
        times=time.times,
        terminal=_concatenate(blocks, 0) if blocks else np.empty(0),
        provenance=rng.provenance,
        paths=_concatenate(blocks, 1),
        log_weights=_concatenate(blocks, 2),
    )


def implied_noise(
    paths: np.ndarray, params: BrownianParams, pot: Potential1D, eps: float, convention: str = "pre-point"
) -> np.ndarray:
    """Noise R_k = (x_{k+1} - x_k) / eps + V'(x*) / (m gamma) that a path implies."""
    if convention not in CONVENTIONS:
        raise UsageError(f"Unknown drift convention '{convention}', expected one of {CONVENTIONS}")
    paths = np.atleast_2d(np.asarray(paths, dtype=float))
    eps = require_positive("eps", eps)
    left, right = paths[:, :-1], paths[:, 1:]
    point = left if convention == "pre-point" else 0.5 * (left + right)
    return (right - left) / eps + params.mobility * np.asarray(pot.derivative(point, 1))


def path_action(
    paths: np.ndarray, params: BrownianParams, pot: Potential1D, eps: float, convention: str = "pre-point"
) -> np.ndarray:
    """
    Discretized Onsager-Machlup exponent (eps / 4D) sum_k R_k^2 of each path.

    exp(-action) equals ``gaussian_path_weight(R, 2D, eps)`` of the implied noise.
    """
    params.require_thermal()
    noise = implied_noise(paths, params, pot, eps, convention)
    return -np.asarray(gaussian_path_log_weight(noise, 2.0 * params.diffusion, eps))


@dataclass(frozen=True)
class NoiseMoments:
    """Sample mean and lagged autocovariance of noise realizations."""

    mean: float
    mean_error: float
    autocovariance: np.ndarray
    autocovariance_error: np.ndarray
    n_samples: int


def noise_moment_check(noise: np.ndarray, max_lag: int = 5) -> NoiseMoments:
    """
    Mean and autocovariance by lag of noise realizations R[traj, slice].

    Lags are taken along the slice axis within each trajectory. For white
    noise the lag-0 value estimates 2D / eps and higher lags estimate zero.

    Raises:
        UsageError: If fewer than 10^4 samples are given or max_lag >= slices
    """
    noise = np.atleast_2d(np.asarray(noise, dtype=float))
    max_lag = require_int("max_lag", max_lag, 0)
    if noise.size < MIN_NOISE_SAMPLES:
        raise UsageError(f"Need at least {MIN_NOISE_SAMPLES} noise samples, got {noise.size}")
    if max_lag >= noise.shape[1]:
        raise UsageError(f"max_lag {max_lag} must be below the {noise.shape[1]} slices per trajectory")
    mean = float(np.mean(noise))
    mean_error = float(np.std(noise) / np.sqrt(noise.size))
    centered = noise - mean
    autocovariance = np.empty(max_lag + 1)
    errors = np.empty(max_lag + 1)
    for lag in range(max_lag + 1):
        products = (centered[:, : centered.shape[1] - lag] * centered[:, lag:]).ravel()
        autocovariance[lag] = np.mean(products)
        errors[lag] = np.std(products) / np.sqrt(products.size)
    return NoiseMoments(mean, mean_error, autocovariance, errors, int(noise.size))


def boltzmann_density(grid: SpatialGrid, pot: Potential1D, params: BrownianParams) -> np.ndarray:
    """Z^-1 exp(-beta V) on the grid, normalized by the grid rule."""
    params.require_thermal()
    energy = np.asarray(pot.value(grid.points))
    weights = np.exp(-params.beta * (energy - energy.min()))
    return weights / grid.integrate(weights)


def _bernoulli(u: np.ndarray) -> np.ndarray:
    # u / (exp(u) - 1), finite at u = 0
    return 1.0 / special.exprel(u)


def fokker_planck_operator(
    grid: SpatialGrid, pot: Potential1D, params: BrownianParams
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Tridiagonal generator of the zero-flux Scharfetter-Gummel discretization.

    Face fluxes are J_{i+1/2} = (D / h) [B(u) P_i - B(-u) P_{i+1}] with
    u = beta (V_{i+1} - V_i) and B(u) = u / (e^u - 1). Columns sum to zero, and
    exp(-beta V_i) is an exact discrete steady state.

    Returns:
        (lower, diagonal, upper) of dP/dt = A P
    """
    params.require_thermal()
    energy = np.asarray(pot.value(grid.points))
    u = params.beta * np.diff(energy)
    rate = params.diffusion / grid.dx**2
    forward = rate * _bernoulli(u)
    backward = rate * _bernoulli(-u)
    diagonal = np.zeros(grid.n_points)
    diagonal[:-1] -= forward
    diagonal[1:] -= backward
    return forward, diagonal, backward


def fokker_planck_evolve(
    P0: np.ndarray,
    grid: SpatialGrid,
    pot: Potential1D,
    params: BrownianParams,
    time: Optional[TimeGrid],
    theta: float = 0.5,
) -> np.ndarray:
    """
    Evolve a density under dP/dt = d/dx [V' P / (m gamma) + D dP/dx].

    The theta scheme (I - theta eps A) P' = (I + (1 - theta) eps A) P is used;
    theta = 0.5 is Crank-Nicolson, 1 is backward Euler, 0 is explicit.
    Zero-flux walls conserve the grid mass.

    Args:
        P0: Initial density on the grid nodes
        grid: Spatial grid
        pot: Potential
        params: Brownian constants (T > 0)
        time: Time slicing; None returns P0
        theta: Implicitness in [0, 1]

    Raises:
        ConfigError: If theta = 0 and D eps / dx^2 > 0.5
        NumericalStabilityError: If the density drops below -1e-12
    """
    P = np.asarray(P0, dtype=float).copy()
    if P.shape != (grid.n_points,):
        raise UsageError(f"Initial density has shape {P.shape}, grid has {grid.n_points} points")
    if time is None:
        return P
    theta = require_finite("theta", theta)
    if not 0.0 <= theta <= 1.0:
        raise UsageError(f"theta must lie in [0, 1], got {theta}")
    eps = time.eps
    courant = params.diffusion * eps / grid.dx**2 if params.temperature > 0 else 0.0
    if theta == 0.0 and courant > EXPLICIT_CFL_LIMIT:
        message = f"explicit scheme needs D*eps/dx^2 <= {EXPLICIT_CFL_LIMIT}, got {courant:.3g}"
        raise ConfigError([("time.n_slices", message)])
    forward, diagonal, backward = fokker_planck_operator(grid, pot, params)

    def apply(P: np.ndarray, scale: float) -> np.ndarray:
        out = P + scale * diagonal * P
        out[:-1] += scale * backward * P[1:]
        out[1:] += scale * forward * P[:-1]
        return out

    banded = np.zeros((3, grid.n_points))
    banded[0, 1:] = -theta * eps * backward
    banded[1, :] = 1.0 - theta * eps * diagonal
    banded[2, :-1] = -theta * eps * forward

    mass0 = float(grid.integrate(P))
    for k in range(time.n_slices):
        rhs = apply(P, (1.0 - theta) * eps)
        P = linalg.solve_banded((1, 1), banded, rhs) if theta > 0 else rhs
        low = float(P.min())
        if low < NEGATIVE_DENSITY_LIMIT:
            raise NumericalStabilityError(f"Fokker-Planck density reached {low:.3g} at step {k + 1}")
    logger.info(
        "Fokker-Planck: %d steps, theta=%g, D*eps/dx^2=%.3g, mass drift %.3g",
        time.n_slices,
        theta,
        courant,
        abs(float(grid.integrate(P)) - mass0),
    )
    return P


@dataclass(frozen=True)
class PropagatorMatrix:
    """
    Transition density J(x_b | x_a) on a grid, ``matrix[b, a]``.

    Columns integrate to one over x_b.
    """

    grid: SpatialGrid
    matrix: np.ndarray
    n_slices: int

    def apply(self, P: np.ndarray) -> np.ndarray:
        """P(x_b) = int dx_a J(x_b | x_a) P(x_a)."""
        return self.matrix @ np.asarray(P, dtype=float) * self.grid.dx

    def compose(self, later: "PropagatorMatrix") -> "PropagatorMatrix":
        """Propagator for this interval followed by ``later``."""
        if not self.grid.same_as(later.grid):
            raise UsageError("Cannot compose propagators on different grids")
        return PropagatorMatrix(self.grid, later.matrix @ self.matrix * self.grid.dx, self.n_slices + later.n_slices)

    def column_integrals(self) -> np.ndarray:
        return self.grid.integrate(self.matrix, axis=0)


def slice_kernel(
    grid: SpatialGrid, pot: Potential1D, params: BrownianParams, eps: float, convention: str = "pre-point"
) -> np.ndarray:
    """
    One-slice transition density exp{-(x_b - x_a - eps v)^2 / (4 D eps)}, column-normalized.

    v = -V'(x*) / (m gamma) is the drift at x_a (pre-point) or at the
    midpoint of the step.

    Raises:
        AccuracyError: If sqrt(2 D eps) spans fewer than 4 grid spacings
        NumericalStabilityError: If a column has zero or non-finite mass
    """
    if convention not in CONVENTIONS:
        raise UsageError(f"Unknown drift convention '{convention}', expected one of {CONVENTIONS}")
    params.require_thermal()
    eps = require_positive("eps", eps)
    width = np.sqrt(2.0 * params.diffusion * eps)
    if width < KERNEL_POINTS_PER_WIDTH * grid.dx:
        raise AccuracyError(
            f"Kernel width sqrt(2 D eps) = {width:.3g} is resolved by fewer than "
            f"{KERNEL_POINTS_PER_WIDTH} points (dx = {grid.dx:.3g})"
        )
    x_b = grid.points[:, None]
    x_a = grid.points[None, :]
    point = x_a if convention == "pre-point" else 0.5 * (x_a + x_b)
    drift = params.mobility * np.asarray(pot.force(point))
    kernel = np.exp(-((x_b - x_a - eps * drift) ** 2) / (4.0 * params.diffusion * eps))
    mass = grid.integrate(kernel, axis=0)
    if not np.all(np.isfinite(mass)) or np.any(mass <= 0):
        raise NumericalStabilityError("Path-integral slice kernel has a column with zero or non-finite mass")
    return kernel / mass


def brownian_pathintegral_propagator(
    params: BrownianParams,
    pot: Potential1D,
    grid: SpatialGrid,
    time: TimeGrid,
    convention: str = "pre-point",
) -> PropagatorMatrix:
    """
    Chain the normalized one-slice kernel over all slices of ``time``.

    Returns:
        PropagatorMatrix: J(t_b | t_a) with columns integrating to one
    """
    kernel = slice_kernel(grid, pot, params, time.eps, convention)
    step = kernel * grid.dx
    matrix = np.linalg.matrix_power(step, time.n_slices) / grid.dx
    logger.info("Path-integral propagator: %d slices on %d points (%s)", time.n_slices, grid.n_points, convention)
    return PropagatorMatrix(grid, matrix, time.n_slices)
