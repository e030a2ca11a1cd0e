"""
Classical-limit ensembles and the signed-weight quasi-Langevin process.

Trajectories start from (x_a, p_a) drawn from a non-negative Wigner function
and follow m x'' = -V'(x) + hbar phi(x) R, where phi = (V''' / 8 hbar)^(1/3)
and R is drawn from the Airy proposal. The Airy weight is not a probability,
so every trajectory carries a sign and a log-magnitude; observables are
ratio estimates and the mean sign measures how much of the ensemble cancels.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Iterator, Optional, Tuple, Union

import numpy as np

from .brownian import TrajectoryEnsemble
from .core import DEFAULT_BLOCK_SIZE, Potential1D, RngStream, SpatialGrid, TimeGrid, run_blocks
from .functionals import DEFAULT_TRUNCATION, DEFAULT_UPPER, airy_proposal
from .quantum import WignerState
from .utils import (
    ConfigError,
    PositivityError,
    SignCollapseError,
    UsageError,
    require_int,
    require_non_negative,
    require_positive,
)

logger = logging.getLogger(__name__)

WIGNER_NEGATIVITY_LIMIT = -1e-10
DEGENERATE_THRESHOLD = 1e-10
DEFAULT_SIGN_FLOOR = 0.01
ENERGY_DRIFT_LIMIT = 1e-4
CANCELLATION_LIMIT = 1e-12
PHASE_ORDERS = ("exact", 2, 4)

Observable = Union[str, Callable[[np.ndarray], np.ndarray]]


@dataclass(frozen=True)
class PhiField:
    """phi(x) = (V'''(x) / 8 hbar)^(1/3) with the real cube root."""

    potential: Potential1D
    hbar: float = 1.0

    def __post_init__(self) -> None:
        require_positive("hbar", self.hbar)

    def __call__(self, x):
        value = np.cbrt(np.asarray(self.potential.derivative(x, 3)) / (8.0 * self.hbar))
        return float(value) if np.ndim(value) == 0 else value


def phi(field: PhiField, x):
    """Coupling of the quasi-noise at x; zero wherever V''' vanishes."""
    return field(x)


def effective_phase(pot: Potential1D, x, xi, order: Union[str, int] = "exact"):
    """
    Potential difference V(x + xi/2) - V(x - xi/2) of the effective propagator.

    ``order`` 2 keeps xi V'(x) (the classical limit), 4 adds xi^3 V'''(x) / 24.
    For polynomials of degree <= 4 the 4th-order form is exact.
    """
    if order not in PHASE_ORDERS:
        raise UsageError(f"Phase order must be one of {PHASE_ORDERS}, got {order!r}")
    x = np.asarray(x, dtype=float)
    xi = np.asarray(xi, dtype=float)
    if order == "exact":
        result = np.asarray(pot.value(x + xi / 2.0)) - np.asarray(pot.value(x - xi / 2.0))
    else:
        result = xi * np.asarray(pot.derivative(x, 1))
        if order == 4:
            result = result + xi**3 * np.asarray(pot.derivative(x, 3)) / 24.0
    return float(result) if np.ndim(result) == 0 else result


@dataclass(frozen=True)
class PhaseSpaceSamples:
    """Initial positions and momenta drawn from a Wigner function."""

    x: np.ndarray
    p: np.ndarray

    def __len__(self) -> int:
        return int(self.x.shape[0])

    def __iter__(self) -> Iterator[Tuple[float, float]]:
        return zip(self.x.tolist(), self.p.tolist())


def sample_initial_conditions(
    W0: WignerState, n_traj: int, rng: Union[RngStream, np.random.Generator]
) -> PhaseSpaceSamples:
    """
    Draw (x_a, p_a) from a non-negative Wigner function.

    A lattice node is picked with probability W dx dp by inverse CDF. Draws stay
    on the nodes: spreading them over the cell would add dx^2 / 12 and
    dp^2 / 12 to the sampled variances.

    Raises:
        PositivityError: If W0 goes below -1e-10 anywhere
    """
    n_traj = require_int("n_traj", n_traj, 0)
    minimum = W0.minimum
    if minimum < WIGNER_NEGATIVITY_LIMIT:
        raise PositivityError(
            f"Wigner function is negative (min {minimum:.3g}); it cannot be sampled as a probability"
        )
    if n_traj == 0:
        return PhaseSpaceSamples(np.empty(0), np.empty(0))
    gen = rng.generator(0) if isinstance(rng, RngStream) else rng
    cdf = np.cumsum(np.clip(W0.values, 0.0, None).ravel())
    cells = np.searchsorted(cdf, gen.random(n_traj) * cdf[-1], side="right")
    cells = np.minimum(cells, cdf.size - 1)
    i, j = np.unravel_index(cells, W0.values.shape)
    return PhaseSpaceSamples(W0.x_grid.points[i].copy(), W0.p_grid.points[j].copy())


Kick = Callable[[int, np.ndarray], np.ndarray]


def _verlet(
    x0: np.ndarray,
    v0: np.ndarray,
    pot: Potential1D,
    time: TimeGrid,
    kick: Optional[Kick] = None,
    store_paths: bool = False,
) -> Tuple[np.ndarray, np.ndarray, Optional[np.ndarray]]:
    # Position Verlet in two-step form; the first step uses the initial slope
    eps, mass = time.eps, pot.mass
    paths = np.empty((x0.size, time.n_slices + 1)) if store_paths else None
    x_prev = x0
    x = x0 + eps * v0 + 0.5 * eps**2 * np.asarray(pot.force(x0)) / mass
    if paths is not None:
        paths[:, 0] = x0
        paths[:, 1] = x
    for k in range(1, time.n_slices):
        force = np.asarray(pot.force(x))
        if kick is not None:
            force = force + kick(k, x)
        x_prev, x = x, 2.0 * x - x_prev + eps**2 * force / mass
        if paths is not None:
            paths[:, k + 1] = x
    v = (x - x_prev) / eps + 0.5 * eps * np.asarray(pot.force(x)) / mass
    return x, v, paths


def _energy(pot: Potential1D, x: np.ndarray, v: np.ndarray) -> np.ndarray:
    return 0.5 * pot.mass * v**2 + np.asarray(pot.value(x))


def classical_evolve(
    initials: PhaseSpaceSamples,
    pot: Potential1D,
    time: TimeGrid,
    store_paths: bool = False,
    energy_tolerance: float = ENERGY_DRIFT_LIMIT,
) -> TrajectoryEnsemble:
    """
    Newton trajectories m x'' = -V'(x) from sampled initial conditions.

    Raises:
        ConfigError: If the largest energy change exceeds ``energy_tolerance``
            relative to the mean initial |E|
    """
    x0 = np.asarray(initials.x, dtype=float)
    v0 = np.asarray(initials.p, dtype=float) / pot.mass
    x, v, paths = _verlet(x0, v0, pot, time, store_paths=store_paths)
    if x0.size:
        e_a, e_b = _energy(pot, x0, v0), _energy(pot, x, v)
        scale = float(np.mean(np.abs(e_a)))
        drift = float(np.max(np.abs(e_b - e_a)))
        relative = drift / scale if scale > 0 else drift
        if relative > energy_tolerance:
            logger.warning("Classical energy drift %.3g exceeds %.3g", relative, energy_tolerance)
            message = f"energy drift {relative:.3g} exceeds {energy_tolerance}; use more slices"
            raise ConfigError([("time.n_slices", message)])
    return TrajectoryEnsemble(
        times=time.times,
        terminal=x,
        provenance="deterministic",
        initial=x0,
        paths=paths,
        velocities=v,
    )


@dataclass(frozen=True)
class ProposalConfig:
    """Airy proposal and sign-handling settings of a quasi-Langevin run."""

    truncation: float = DEFAULT_TRUNCATION
    upper: float = DEFAULT_UPPER
    sign_floor: float = DEFAULT_SIGN_FLOOR
    measure_factor: bool = True
    degenerate_threshold: float = DEGENERATE_THRESHOLD

    def __post_init__(self) -> None:
        if not self.truncation > 0:
            raise UsageError(f"Proposal truncation L must be > 0, got {self.truncation}")
        require_positive("upper", self.upper)
        require_non_negative("sign_floor", self.sign_floor)
        require_non_negative("degenerate_threshold", self.degenerate_threshold)


@dataclass(frozen=True)
class SignedEnsemble:
    """
    Quasi-Langevin trajectories with signed weights sign * exp(log_magnitude).

    ``negative_counts[k]`` counts trajectories whose slice-k draw had sign -1;
    slice 0 never draws.
    """

    times: np.ndarray
    terminal: np.ndarray
    signs: np.ndarray
    log_magnitudes: np.ndarray
    initial_x: np.ndarray
    initial_p: np.ndarray
    negative_counts: np.ndarray
    degenerate_fraction: float
    provenance: str = ""
    velocities: Optional[np.ndarray] = None
    paths: Optional[np.ndarray] = None
    proposal: ProposalConfig = field(default_factory=ProposalConfig)

    @classmethod
    def from_weights(cls, terminal, weights) -> "SignedEnsemble":
        """Ensemble with given terminal positions and signed weights, no dynamics."""
        terminal = np.asarray(terminal, dtype=float)
        weights = np.asarray(weights, dtype=float)
        if terminal.shape != weights.shape:
            raise UsageError("terminal and weights must have the same shape")
        with np.errstate(divide="ignore"):
            log_magnitudes = np.log(np.abs(weights))
        return cls(
            times=np.array([0.0]),
            terminal=terminal,
            signs=np.where(weights < 0, -1, 1).astype(np.int8),
            log_magnitudes=log_magnitudes,
            initial_x=terminal.copy(),
            initial_p=np.zeros_like(terminal),
            negative_counts=np.zeros(1, dtype=np.int64),
            degenerate_fraction=0.0,
            provenance="explicit",
        )

    @property
    def n_traj(self) -> int:
        return int(self.terminal.shape[0])

    @property
    def n_slices(self) -> int:
        return int(self.times.shape[0]) - 1

    def weights(self) -> np.ndarray:
        """Signed weights rescaled so the largest magnitude is one."""
        if self.n_traj == 0:
            return np.empty(0)
        finite = self.log_magnitudes[np.isfinite(self.log_magnitudes)]
        shift = float(finite.max()) if finite.size else 0.0
        return self.signs * np.exp(self.log_magnitudes - shift)


@dataclass(frozen=True)
class SignDiagnostics:
    """How badly the signed ensemble cancels."""

    mean_sign: float
    effective_sample_size: float
    negative_fraction: np.ndarray
    negative_slice_fraction: float
    degenerate_fraction: float
    log_magnitude_counts: np.ndarray
    log_magnitude_edges: np.ndarray
    n_traj: int

    def summary(self) -> str:
        return (
            f"mean sign {self.mean_sign:.6g}, ESS {self.effective_sample_size:.6g} of {self.n_traj}, "
            f"negative-sign slice fraction {self.negative_slice_fraction:.6g}, "
            f"degenerate classical branch taken on {100.0 * self.degenerate_fraction:.6g}% of slices"
        )


def sign_diagnostics(ens: SignedEnsemble, bins: int = 20) -> SignDiagnostics:
    """
    Mean sign sum s|w| / sum |w|, ESS (sum |w|)^2 / sum w^2 and per-slice
    negative-draw fractions.
    """
    weights = ens.weights()
    magnitude = np.abs(weights)
    total = float(np.sum(magnitude))
    if ens.n_traj == 0 or total == 0:
        mean_sign, ess = float("nan"), 0.0
    else:
        mean_sign = float(np.sum(weights) / total)
        ess = total**2 / float(np.sum(weights**2))
    n = max(ens.n_traj, 1)
    negative_fraction = ens.negative_counts / n
    draws = ens.n_traj * max(ens.n_slices - 1, 0) * (1.0 - ens.degenerate_fraction)
    negative_slice_fraction = float(np.sum(ens.negative_counts) / draws) if draws > 0 else 0.0
    finite = ens.log_magnitudes[np.isfinite(ens.log_magnitudes)]
    if finite.size:
        counts, edges = np.histogram(finite, bins=bins)
    else:
        counts, edges = np.zeros(bins, dtype=np.int64), np.linspace(0.0, 1.0, bins + 1)
    return SignDiagnostics(
        mean_sign=mean_sign,
        effective_sample_size=ess,
        negative_fraction=negative_fraction,
        negative_slice_fraction=negative_slice_fraction,
        degenerate_fraction=ens.degenerate_fraction,
        log_magnitude_counts=counts,
        log_magnitude_edges=edges,
        n_traj=ens.n_traj,
    )


def quasi_langevin_simulate(
    W0: WignerState,
    pot: Potential1D,
    hbar: float,
    time: TimeGrid,
    n_traj: int,
    proposal: ProposalConfig,
    rng: RngStream,
    store_paths: bool = False,
    block_size: int = DEFAULT_BLOCK_SIZE,
    workers: int = 1,
) -> SignedEnsemble:
    """
    Signed-weight simulation of m x'' = -V'(x) + hbar phi(x) R.

    Initial conditions come from ``rng.child(0)``, proposal draws from
    ``rng.child(1)``. On each interior slice k = 1..N-1 a value u is drawn
    from |Ai| on [-L, upper] and R_k = eps^(-2/3) u; the trajectory takes the
    impulse eps^2 hbar phi(x_k) R_k / m, its sign is multiplied by sgn Ai(u) and
    its log-magnitude gains log Z_L (minus log|phi| with the measure factor
    on). Where |V'''(x_k)| is below the degenerate threshold the slice takes
    the classical update with unit weight.

    Raises:
        PositivityError: If W0 is materially negative
        SignCollapseError: If the mean sign falls below ``proposal.sign_floor``
    """
    n_traj = require_int("n_traj", n_traj, 0)
    hbar = require_positive("hbar", hbar)
    initials = sample_initial_conditions(W0, n_traj, rng.child(0))
    table = airy_proposal(proposal.truncation, proposal.upper)
    log_z = math.log(table.normalization)
    noise_scale = time.eps ** (-2.0 / 3.0)
    field_ = PhiField(pot, hbar)

    def block(gen: np.random.Generator, start: int, stop: int):
        size = stop - start
        signs = np.ones(size, dtype=np.int8)
        log_magnitudes = np.zeros(size)
        negative = np.zeros(time.n_slices, dtype=np.int64)
        degenerate_count = 0

        def kick(k: int, x: np.ndarray) -> np.ndarray:
            nonlocal signs, log_magnitudes, degenerate_count
            u, slice_sign = table.sample(gen, size)
            third = np.asarray(pot.derivative(x, 3))
            degenerate = np.abs(third) < proposal.degenerate_threshold
            coupling = field_(x)
            active = ~degenerate
            degenerate_count += int(np.sum(degenerate))
            negative[k] = int(np.sum((slice_sign < 0) & active))
            signs = signs * np.where(active, slice_sign, 1).astype(np.int8)
            log_magnitudes = log_magnitudes + np.where(active, log_z, 0.0)
            if proposal.measure_factor:
                with np.errstate(divide="ignore"):
                    log_magnitudes = log_magnitudes - np.where(active, np.log(np.abs(coupling)), 0.0)
            return np.where(degenerate, 0.0, hbar * coupling * noise_scale * u)

        x, v, paths = _verlet(
            initials.x[start:stop],
            initials.p[start:stop] / pot.mass,
            pot,
            time,
            kick=kick,
            store_paths=store_paths,
        )
        return x, v, paths, signs, log_magnitudes, negative, degenerate_count

    blocks = run_blocks(n_traj, rng.child(1), block, block_size, workers)

    def stack(position: int, empty) -> np.ndarray:
        parts = [b[position] for b in blocks]
        return np.concatenate(parts, axis=0) if parts else empty

    interior = n_traj * max(time.n_slices - 1, 0)
    degenerate_total = sum(b[6] for b in blocks)
    ens = SignedEnsemble(
        times=time.times,
        terminal=stack(0, np.empty(0)),
        velocities=stack(1, np.empty(0)),
        paths=stack(2, None) if store_paths else None,
        signs=stack(3, np.empty(0, dtype=np.int8)),
        log_magnitudes=stack(4, np.empty(0)),
        initial_x=initials.x,
        initial_p=initials.p,
        negative_counts=np.sum([b[5] for b in blocks], axis=0) if blocks else np.zeros(time.n_slices, dtype=np.int64),
        degenerate_fraction=degenerate_total / interior if interior else 1.0,
        provenance=rng.provenance,
        proposal=proposal,
    )
    diagnostics = sign_diagnostics(ens)
    logger.info("Quasi-Langevin: %d trajectories, %d slices: %s", n_traj, time.n_slices, diagnostics.summary())
    if n_traj and proposal.sign_floor > 0 and not diagnostics.mean_sign >= proposal.sign_floor:
        logger.warning("Sign collapse: mean sign %.3g below floor %.3g", diagnostics.mean_sign, proposal.sign_floor)
        raise SignCollapseError(
            f"mean sign {diagnostics.mean_sign:.3g} fell below the floor {proposal.sign_floor} "
            f"after {time.n_slices} slices; the Airy-weighted noise has no probabilistic reading here",
            diagnostics,
        )
    return ens


@dataclass(frozen=True)
class RatioEstimate:
    value: float
    error: float


def _observable_values(ens: SignedEnsemble, observable: Observable) -> np.ndarray:
    if callable(observable):
        return np.asarray(observable(ens.terminal), dtype=float)
    if observable == "x":
        return ens.terminal
    if observable == "x2":
        return ens.terminal**2
    if observable == "p" and ens.velocities is not None:
        return ens.velocities
    raise UsageError(f"Unknown observable {observable!r}; use 'x', 'x2', 'p' or a callable")


def _batch_sums(values: np.ndarray, n_batches: int) -> np.ndarray:
    return np.array([np.sum(chunk, axis=0) for chunk in np.array_split(values, n_batches)])


def _check_denominator(weights: np.ndarray, denominator) -> None:
    scale = float(np.sum(np.abs(weights)))
    if scale == 0 or np.any(np.abs(denominator) <= CANCELLATION_LIMIT * scale):
        raise SignCollapseError("signed weight sum cancels to zero; the ratio estimate is undefined")


def ratio_estimate(ens: SignedEnsemble, observable: Observable = "x", n_batches: int = 20) -> RatioEstimate:
    """
    <O> = sum w_i O_i / sum w_i with a jackknife error over contiguous batches.

    Raises:
        SignCollapseError: If the signed weight sum vanishes
    """
    n_batches = require_int("n_batches", n_batches, 2)
    weights = ens.weights()
    values = _observable_values(ens, observable)
    numerator, denominator = float(np.sum(weights * values)), float(np.sum(weights))
    _check_denominator(weights, denominator)
    estimate = numerator / denominator
    batches = min(n_batches, ens.n_traj)
    if batches < 2:
        return RatioEstimate(estimate, float("inf"))
    num_b = _batch_sums(weights * values, batches)
    den_b = _batch_sums(weights, batches)
    with np.errstate(divide="ignore", invalid="ignore"):
        leave_out = (numerator - num_b) / (denominator - den_b)
    if not np.all(np.isfinite(leave_out)):
        return RatioEstimate(estimate, float("inf"))
    error = math.sqrt((batches - 1) / batches * float(np.sum((leave_out - leave_out.mean()) ** 2)))
    return RatioEstimate(estimate, error)


def ratio_density(ens: SignedEnsemble, grid: SpatialGrid, n_batches: int = 20) -> Tuple[np.ndarray, np.ndarray]:
    """
    Signed histogram on grid nodes: per-bin signed sums over the total signed sum.

    Returns:
        (density, jackknife error) per node

    Raises:
        SignCollapseError: If the signed weight sum vanishes
    """
    weights = ens.weights()
    denominator = float(np.sum(weights))
    _check_denominator(weights, denominator)
    bins = grid.index_of(ens.terminal) if ens.n_traj else np.empty(0, dtype=int)
    inside = (bins >= 0) & (bins < grid.n_points)

    def binned(selection: slice) -> np.ndarray:
        keep = inside[selection]
        return np.bincount(bins[selection][keep], weights=weights[selection][keep], minlength=grid.n_points)

    totals = binned(slice(None))
    density = totals / (denominator * grid.dx)
    batches = min(require_int("n_batches", n_batches, 2), ens.n_traj)
    if batches < 2:
        return density, np.full(grid.n_points, np.inf)
    bounds = np.linspace(0, ens.n_traj, batches + 1).astype(int)
    num_b = np.array([binned(slice(lo, hi)) for lo, hi in zip(bounds[:-1], bounds[1:])])
    den_b = np.array([np.sum(weights[lo:hi]) for lo, hi in zip(bounds[:-1], bounds[1:])])
    with np.errstate(divide="ignore", invalid="ignore"):
        leave_out = (totals[None, :] - num_b) / ((denominator - den_b)[:, None] * grid.dx)
    error = np.sqrt((batches - 1) / batches * np.sum((leave_out - leave_out.mean(axis=0)) ** 2, axis=0))
    return density, error
