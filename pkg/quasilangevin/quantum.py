"""
Exact quantum references on a uniform grid.

Conventions used throughout:

* Gaussian packets are psi(x) = (2 pi sigma^2)^(-1/4) exp(-(x-x0)^2 / 4 sigma^2 + i p0 x / hbar),
  so sigma is the standard deviation of |psi|^2.
* The relative frame is x = (q + q') / 2, xi = q' - q and
  rho(x, xi) = psi(x - xi/2) psi*(x + xi/2).
* W(x, p) = (1 / 2 pi hbar) int d(xi) exp(i p xi / hbar) rho(x, xi), which
  integrates to one over phase space. It is the bare xi-transform divided by
  2 pi hbar.
"""

import logging
from dataclasses import dataclass, replace
from functools import cached_property
from typing import Optional, Tuple

import numpy as np
from scipy import fft, special

from .core import Potential1D, SpatialGrid, TimeGrid
from .utils import (
    AccuracyError,
    NumericalStabilityError,
    UsageError,
    require_finite,
    require_int,
    require_positive,
)

logger = logging.getLogger(__name__)

NORM_TOLERANCE = 1e-8
STEP_NORM_DRIFT = 1e-10
EDGE_FRACTION = 0.05
EDGE_MASS_LIMIT = 1e-6
TAIL_MASS_LIMIT = 1e-10
XI_DECAY_LIMIT = 1e-10
IMAGINARY_RESIDUE_LIMIT = 1e-9
TRACE_DRIFT_LIMIT = 1e-3
MAX_TRANSFER_POINTS = 2048


@dataclass(frozen=True)
class WaveFunction:
    """Complex amplitudes on a spatial grid."""

    grid: SpatialGrid
    amplitudes: np.ndarray
    hbar: float = 1.0

    def __post_init__(self) -> None:
        amplitudes = np.asarray(self.amplitudes, dtype=complex)
        if amplitudes.shape != (self.grid.n_points,):
            raise UsageError(
                f"Wavefunction has {amplitudes.shape} amplitudes for a {self.grid.n_points}-point grid"
            )
        object.__setattr__(self, "amplitudes", amplitudes)
        require_positive("hbar", self.hbar)

    @property
    def norm(self) -> float:
        return float(self.grid.integrate(np.abs(self.amplitudes) ** 2))

    def mean_position(self) -> float:
        return float(self.grid.integrate(self.grid.points * probability_density(self)))

    def position_variance(self) -> float:
        mean = self.mean_position()
        return float(self.grid.integrate((self.grid.points - mean) ** 2 * probability_density(self)))


@dataclass(frozen=True)
class DensityMatrixXY:
    """
    Density matrix on the (x, xi) lattice.

    ``values[i, j]`` is rho(x_i, xi_j). The xi grid is symmetric about zero
    with an odd number of nodes, so column ``center`` is xi = 0.
    """

    x_grid: SpatialGrid
    xi_grid: SpatialGrid
    values: np.ndarray
    hbar: float = 1.0
    trace_drift: float = 0.0

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=complex)
        if values.shape != (self.x_grid.n_points, self.xi_grid.n_points):
            raise UsageError(
                f"Density matrix shape {values.shape} does not match grids "
                f"({self.x_grid.n_points}, {self.xi_grid.n_points})"
            )
        if self.xi_grid.n_points % 2 == 0 or not np.isclose(self.xi_grid.x_min, -self.xi_grid.x_max):
            raise UsageError("xi grid must be symmetric about zero with an odd number of nodes")
        object.__setattr__(self, "values", values)

    @property
    def center(self) -> int:
        return self.xi_grid.n_points // 2

    def diagonal(self) -> np.ndarray:
        """P(x) = rho(x, 0)."""
        return self.values[:, self.center].real.copy()

    @property
    def trace(self) -> float:
        return float(self.x_grid.integrate(self.diagonal()))

    def hermiticity_error(self) -> float:
        """max |rho(x, xi) - rho*(x, -xi)|."""
        return float(np.max(np.abs(self.values - np.conj(self.values[:, ::-1]))))


@dataclass(frozen=True)
class WignerState:
    """Real Wigner function on an (x, p) lattice, normalized to one."""

    x_grid: SpatialGrid
    p_grid: SpatialGrid
    values: np.ndarray
    hbar: float = 1.0

    @property
    def normalization(self) -> float:
        return float(self.x_grid.integrate(self.p_grid.integrate(self.values, axis=1)))

    def position_marginal(self) -> np.ndarray:
        return self.p_grid.integrate(self.values, axis=1)

    def momentum_marginal(self) -> np.ndarray:
        return self.x_grid.integrate(self.values, axis=0)

    @property
    def minimum(self) -> float:
        return float(np.min(self.values))


def _gaussian_amplitudes(x: np.ndarray, x0: float, p0: float, sigma: float, hbar: float) -> np.ndarray:
    return (2.0 * np.pi * sigma**2) ** -0.25 * np.exp(
        -((x - x0) ** 2) / (4.0 * sigma**2) + 1j * p0 * x / hbar
    )


def _normalized(grid: SpatialGrid, amplitudes: np.ndarray) -> np.ndarray:
    norm = grid.integrate(np.abs(amplitudes) ** 2)
    if not (np.isfinite(norm) and norm > 0):
        raise UsageError("Wavefunction has zero norm on the grid")
    return amplitudes / np.sqrt(norm)


def _check_tail_mass(grid: SpatialGrid, x0: float, sigma: float) -> None:
    tail = 0.5 * special.erfc((x0 - grid.x_min) / (np.sqrt(2.0) * sigma)) + 0.5 * special.erfc(
        (grid.x_max - x0) / (np.sqrt(2.0) * sigma)
    )
    if tail >= TAIL_MASS_LIMIT:
        raise UsageError(
            f"Packet at x0={x0} with sigma={sigma} leaks mass {tail:.3g} beyond "
            f"[{grid.x_min}, {grid.x_max}]"
        )


def make_gaussian_packet(
    grid: SpatialGrid, x0: float, p0: float, sigma: float, hbar: float = 1.0
) -> WaveFunction:
    """
    Minimum-uncertainty packet centered at (x0, p0).

    ``sigma`` is the position standard deviation; the momentum standard
    deviation is hbar / (2 sigma). The packet is normalized on the grid.

    Raises:
        UsageError: If sigma <= 0 or more than 1e-10 of the mass lies outside the grid
    """
    x0 = require_finite("x0", x0)
    p0 = require_finite("p0", p0)
    sigma = require_positive("sigma", sigma)
    hbar = require_positive("hbar", hbar)
    _check_tail_mass(grid, x0, sigma)
    amplitudes = _gaussian_amplitudes(grid.points, x0, p0, sigma, hbar)
    return WaveFunction(grid, _normalized(grid, amplitudes), hbar)


def make_cat_state(
    grid: SpatialGrid,
    x1: float,
    x2: float,
    sigma: float,
    p0: float = 0.0,
    hbar: float = 1.0,
) -> WaveFunction:
    """Equal superposition of two Gaussian packets; its Wigner function goes negative."""
    sigma = require_positive("sigma", sigma)
    hbar = require_positive("hbar", hbar)
    for center in (x1, x2):
        _check_tail_mass(grid, require_finite("x", center), sigma)
    amplitudes = _gaussian_amplitudes(grid.points, x1, p0, sigma, hbar) + _gaussian_amplitudes(
        grid.points, x2, p0, sigma, hbar
    )
    return WaveFunction(grid, _normalized(grid, amplitudes), hbar)


def _edge_mass(grid: SpatialGrid, density: np.ndarray) -> float:
    width = max(1, int(np.ceil(EDGE_FRACTION * grid.n_points)))
    return float(grid.integrate(density[:width]) + grid.integrate(density[-width:]))


def evolve_schrodinger(psi: WaveFunction, pot: Potential1D, dt: float, steps: int) -> WaveFunction:
    """
    Unitary evolution under H = p^2 / 2m + V by Strang split-step Fourier.

    Args:
        psi: Initial state
        pot: Potential (its mass is the particle mass)
        dt: Time step
        steps: Number of steps; 0 returns the input unchanged

    Raises:
        NumericalStabilityError: If the norm drifts by more than 1e-10 in one
            step, or more than 1e-6 of the mass reaches the outer 5% of the grid
    """
    steps = require_int("steps", steps, 0)
    if steps == 0:
        return psi
    dt = require_positive("dt", dt)
    grid, hbar, mass = psi.grid, psi.hbar, pot.mass

    k = 2.0 * np.pi * fft.fftfreq(grid.n_points, d=grid.dx)
    kinetic = np.exp(-1j * hbar * k**2 * dt / (2.0 * mass))
    half_potential = np.exp(-1j * np.asarray(pot.value(grid.points)) * dt / (2.0 * hbar))

    amplitudes = psi.amplitudes.copy()
    norm = psi.norm
    for step in range(steps):
        amplitudes = half_potential * fft.ifft(kinetic * fft.fft(half_potential * amplitudes))
        density = np.abs(amplitudes) ** 2
        new_norm = float(grid.integrate(density))
        if abs(new_norm - norm) > STEP_NORM_DRIFT:
            raise NumericalStabilityError(
                f"Norm drift {abs(new_norm - norm):.3g} at step {step + 1} exceeds {STEP_NORM_DRIFT}"
            )
        edge = _edge_mass(grid, density)
        if edge > EDGE_MASS_LIMIT:
            raise NumericalStabilityError(
                f"Edge mass {edge:.3g} at step {step + 1} exceeds {EDGE_MASS_LIMIT}; widen the grid"
            )
        norm = new_norm
    logger.debug("Split-step: %d steps of dt=%g, final norm %.15f", steps, dt, norm)
    return WaveFunction(grid, amplitudes, hbar)


def probability_density(psi: WaveFunction) -> np.ndarray:
    """P(x) = |psi(x)|^2 on the grid."""
    return np.abs(psi.amplitudes) ** 2


def momentum_density(psi: WaveFunction, p: np.ndarray) -> np.ndarray:
    """|psi~(p)|^2 with psi~(p) = (2 pi hbar)^(-1/2) int dx psi(x) exp(-i p x / hbar)."""
    p = np.asarray(p, dtype=float)
    phases = np.exp(-1j * np.outer(p, psi.grid.points) / psi.hbar)
    amplitudes = phases @ psi.amplitudes * psi.grid.dx / np.sqrt(2.0 * np.pi * psi.hbar)
    return np.abs(amplitudes) ** 2


def _xi_half_width(x_grid: SpatialGrid, n_xi: Optional[int]) -> int:
    if n_xi is None:
        n_xi = x_grid.n_points if x_grid.n_points % 2 else x_grid.n_points - 1
    n_xi = require_int("n_xi", n_xi, 9)
    if n_xi % 2 == 0:
        raise UsageError(f"n_xi must be odd so that xi = 0 is a node, got {n_xi}")
    if n_xi > x_grid.n_points:
        raise UsageError(
            f"xi grid with {n_xi} nodes spans more than twice the x grid ({x_grid.n_points} nodes)"
        )
    return n_xi // 2


def _xi_grid(x_grid: SpatialGrid, half: int) -> SpatialGrid:
    return SpatialGrid(-2.0 * half * x_grid.dx, 2.0 * half * x_grid.dx, 2 * half + 1)


def _relative_indices(n_x: int, half: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    i = np.arange(n_x)[:, None]
    m = np.arange(-half, half + 1)[None, :]
    q, q_prime = i - m, i + m
    valid = (q >= 0) & (q < n_x) & (q_prime >= 0) & (q_prime < n_x)
    return np.clip(q, 0, n_x - 1), np.clip(q_prime, 0, n_x - 1), valid


def to_relative_frame(psi: WaveFunction, n_xi: Optional[int] = None) -> DensityMatrixXY:
    """
    rho(x_i, xi_m) = psi(x_i - xi_m / 2) psi*(x_i + xi_m / 2) on grid nodes.

    xi_m = 2 m dx, so both arguments are x-grid nodes and no interpolation is
    involved. Pairs falling outside the x grid are zero.

    Raises:
        UsageError: If the xi grid would span more than twice the x grid
    """
    half = _xi_half_width(psi.grid, n_xi)
    q, q_prime, valid = _relative_indices(psi.grid.n_points, half)
    values = np.where(valid, psi.amplitudes[q] * np.conj(psi.amplitudes[q_prime]), 0.0)
    return DensityMatrixXY(psi.grid, _xi_grid(psi.grid, half), values, psi.hbar)


def density_matrix_qq(psi: WaveFunction) -> np.ndarray:
    """rho(q, q') = psi(q) psi*(q') on the x grid."""
    return np.outer(psi.amplitudes, np.conj(psi.amplitudes))


def from_qq(rho_qq: np.ndarray, grid: SpatialGrid, hbar: float = 1.0, n_xi: Optional[int] = None) -> DensityMatrixXY:
    """Change frame (q, q') -> (x, xi) by index arithmetic."""
    rho_qq = np.asarray(rho_qq, dtype=complex)
    if rho_qq.shape != (grid.n_points, grid.n_points):
        raise UsageError(f"rho(q, q') of shape {rho_qq.shape} does not match a {grid.n_points}-point grid")
    half = _xi_half_width(grid, n_xi)
    q, q_prime, valid = _relative_indices(grid.n_points, half)
    values = np.where(valid, rho_qq[q, q_prime], 0.0)
    return DensityMatrixXY(grid, _xi_grid(grid, half), values, hbar)


def to_qq(rho: DensityMatrixXY) -> Tuple[np.ndarray, np.ndarray]:
    """
    Change frame (x, xi) -> (q, q').

    Returns:
        (values, mask): rho(q, q') and the boolean mask of (q, q') pairs the
        lattice reaches (q + q' even and |q' - q| within the xi span)
    """
    n_x = rho.x_grid.n_points
    half = rho.center
    q, q_prime, valid = _relative_indices(n_x, half)
    values = np.zeros((n_x, n_x), dtype=complex)
    mask = np.zeros((n_x, n_x), dtype=bool)
    values[q[valid], q_prime[valid]] = rho.values[valid]
    mask[q[valid], q_prime[valid]] = True
    return values, mask


def default_momentum_grid(rho: DensityMatrixXY) -> SpatialGrid:
    """Momentum grid conjugate to the xi grid: dp = 2 pi hbar / (n_xi d_xi)."""
    n_xi = rho.xi_grid.n_points
    dp = 2.0 * np.pi * rho.hbar / (n_xi * rho.xi_grid.dx)
    half = n_xi // 2
    return SpatialGrid(-half * dp, half * dp, n_xi)


def wigner_transform(rho: DensityMatrixXY, p_grid: Optional[SpatialGrid] = None) -> WignerState:
    """
    W(x, p) = (1 / 2 pi hbar) sum_xi d_xi exp(i p xi / hbar) rho(x, xi).

    On the default conjugate momentum grid the discrete normalization and the
    position marginal are exact; a finer ``p_grid`` can be passed for plots.

    Raises:
        AccuracyError: If |rho| at the xi edges exceeds 1e-10, or the result has
            an imaginary residue above 1e-9 (non-hermitian input)
    """
    edge = float(max(np.max(np.abs(rho.values[:, 0])), np.max(np.abs(rho.values[:, -1]))))
    if edge > XI_DECAY_LIMIT:
        raise AccuracyError(f"rho has not decayed at the xi edges: |rho| = {edge:.3g} > {XI_DECAY_LIMIT}")
    if p_grid is None:
        p_grid = default_momentum_grid(rho)
    xi = rho.xi_grid.points
    kernel = np.exp(1j * np.outer(p_grid.points, xi) / rho.hbar) * rho.xi_grid.dx / (2.0 * np.pi * rho.hbar)
    values = rho.values @ kernel.T
    residue = float(np.max(np.abs(values.imag)))
    if residue > IMAGINARY_RESIDUE_LIMIT:
        raise AccuracyError(f"Wigner function has imaginary residue {residue:.3g}; input is not hermitian")
    return WignerState(rho.x_grid, p_grid, values.real.copy(), rho.hbar)


@dataclass(frozen=True)
class TransferKernel:
    """
    One time slice of the density-matrix path integral on the (x, xi) lattice.

    ``weights[j, n]`` is the free kernel for the offset (j dx, n d_xi), taken
    modulo the grid period. It is the band-limited lattice form of
    K_free(q) K_free*(q') = (m / 2 pi hbar eps) exp(-i m (x - x')(xi - xi') / hbar eps), so a
    Gaussian density matrix evolves exactly up to grid truncation. ``phase``
    is the potential factor exp{(i eps / 2 hbar)[V(x + xi/2) - V(x - xi/2)]}
    applied at both slice ends.
    """

    x_grid: SpatialGrid
    xi_grid: SpatialGrid
    eps: float
    weights: np.ndarray
    phase: np.ndarray

    @property
    def shape(self) -> Tuple[int, int]:
        return self.x_grid.n_points, self.xi_grid.n_points

    @property
    def density(self) -> np.ndarray:
        """Kernel per unit dx d_xi."""
        return self.weights / (self.x_grid.dx * self.xi_grid.dx)

    @cached_property
    def _spectrum(self) -> np.ndarray:
        return fft.fft2(self.weights)

    def apply(self, values: np.ndarray) -> np.ndarray:
        """rho'(x_i, xi_m) = phase(i, m) sum_jn weights[i - j, m - n] phase(j, n) rho(x_j, xi_n)."""
        values = np.asarray(values, dtype=complex)
        if values.shape != self.shape:
            raise UsageError(f"rho of shape {values.shape} does not match a {self.shape} kernel")
        # Circular contraction with the kernel by the convolution theorem
        return self.phase * fft.ifft2(self._spectrum * fft.fft2(self.phase * values))

    def matrix(self) -> np.ndarray:
        """
        The slice as a dense (n_x n_xi) x (n_x n_xi) matrix acting on rho.ravel().

        Raises:
            UsageError: If the lattice has more than 2048 points
        """
        n_x, n_xi = self.shape
        if n_x * n_xi > MAX_TRANSFER_POINTS:
            raise UsageError(
                f"A dense transfer matrix on {n_x} x {n_xi} points exceeds {MAX_TRANSFER_POINTS} points"
            )
        i, m = np.arange(n_x), np.arange(n_xi)
        row = (i[:, None] - i[None, :]) % n_x
        col = (m[:, None] - m[None, :]) % n_xi
        dense = self.weights[row[:, None, :, None], col[None, :, None, :]].reshape(n_x * n_xi, n_x * n_xi)
        phase = self.phase.ravel()
        return phase[:, None] * dense * phase[None, :]


def density_matrix_transfer_kernel(
    x_grid: SpatialGrid, xi_grid: SpatialGrid, pot: Potential1D, hbar: float, eps: float
) -> TransferKernel:
    """
    Short-time kernel of rho(x, xi) for one slice of length ``eps``.

    In (x, xi) the free equation is d rho / dt = -i (hbar / m) d_x d_xi rho, so the
    kernel weights are the inverse DFT of exp{i (hbar / m) k_x k_xi eps}.
    """
    eps = require_positive("eps", eps)
    hbar = require_positive("hbar", hbar)
    k_x = 2.0 * np.pi * fft.fftfreq(x_grid.n_points, d=x_grid.dx)
    k_xi = 2.0 * np.pi * fft.fftfreq(xi_grid.n_points, d=xi_grid.dx)
    weights = fft.ifft2(np.exp(1j * (hbar / pot.mass) * np.outer(k_x, k_xi) * eps))
    x, xi = x_grid.points[:, None], xi_grid.points[None, :]
    phase = np.exp(
        (1j * eps / (2.0 * hbar)) * (np.asarray(pot.value(x + xi / 2.0)) - np.asarray(pot.value(x - xi / 2.0)))
    )
    return TransferKernel(x_grid, xi_grid, eps, weights, np.broadcast_to(phase, weights.shape).copy())


def propagate_density_matrix_pathintegral(
    rho0: DensityMatrixXY, pot: Potential1D, time: Optional[TimeGrid]
) -> DensityMatrixXY:
    """
    Slice-by-slice propagation of rho(x, xi) through the short-time kernel.

    Every slice contracts rho with the same :class:`TransferKernel`. The trace
    is renormalized after every slice and the largest drift is reported.

    Args:
        rho0: Initial density matrix
        pot: Potential
        time: Time slicing; None propagates over zero slices

    Raises:
        NumericalStabilityError: If the trace drifts by more than 1e-3 in a
            slice or the diagonal reaches the grid edges
    """
    if time is None:
        return rho0
    kernel = density_matrix_transfer_kernel(rho0.x_grid, rho0.xi_grid, pot, rho0.hbar, time.eps)

    values = rho0.values.copy()
    center = rho0.center
    max_drift = rho0.trace_drift
    for k in range(time.n_slices):
        values = kernel.apply(values)
        diagonal = values[:, center].real
        trace = float(rho0.x_grid.integrate(diagonal))
        drift = abs(trace - 1.0)
        if not np.isfinite(trace) or drift > TRACE_DRIFT_LIMIT:
            raise NumericalStabilityError(
                f"Kernel normalization diverged at slice {k + 1}: trace {trace:.6g}"
            )
        edge = _edge_mass(rho0.x_grid, np.abs(diagonal))
        if edge > EDGE_MASS_LIMIT:
            raise NumericalStabilityError(
                f"Edge mass {edge:.3g} at slice {k + 1} exceeds {EDGE_MASS_LIMIT}; widen the grid"
            )
        values /= trace
        max_drift = max(max_drift, drift)
    logger.info(
        "Density-matrix path integral: %d slices of eps=%g, max trace drift %.3g",
        time.n_slices,
        time.eps,
        max_drift,
    )
    return replace(rho0, values=values, trace_drift=max_drift)
