"""
Experiment runners behind the CLI subcommands.

Each runner writes CSV tables, SVG views of those tables and a plain-text
``report.txt`` into the configured output directory. Reports carry no
timestamps or timings, so a (config, seed) pair reproduces them exactly.
"""

import dataclasses
import logging
import time as clock
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional

import numpy as np
from scipy import optimize

from . import brownian, io, plotting, quantum, semiclassical
from .config import RunConfig, config_hash
from .core import SpatialGrid, histogram_density, make_grid
from .functionals import AIRY_FIRST_ZERO, airy_ai, airy_ai_prime
from .utils import SignCollapseError, UsageError

logger = logging.getLogger(__name__)

ORACLE_MIN_STEPS = 200


@dataclass
class ExperimentResult:
    """Files written by one run and the headline numbers of its report."""

    experiment: str
    directory: Path
    files: List[Path] = field(default_factory=list)
    summary: Dict[str, float] = field(default_factory=dict)
    report: str = ""


class _Run:
    """Output bookkeeping shared by the runners."""

    def __init__(self, cfg: RunConfig, directory: Path):
        self.cfg = cfg
        self.result = ExperimentResult(cfg.experiment, directory)
        self.metadata = {"experiment": cfg.experiment, "seed": cfg.seed, "config_hash": config_hash(cfg)}
        self.lines: List[str] = []

    def table(self, name: str, columns) -> None:
        self.result.files.append(io.write_table(self.result.directory / name, columns, self.metadata))

    def save(self, name: str, writer: Callable[..., Path], *objects) -> None:
        """Write ``objects`` with one of the ``io.write_*`` functions, stamped with the run metadata."""
        self.result.files.append(writer(self.result.directory / name, *objects, self.metadata))

    def figure(self, path: Path) -> None:
        self.result.files.append(path)

    def report(self, key: str, value) -> None:
        if isinstance(value, float):
            text = f"{value:.6g}"
            self.result.summary[key] = value
        else:
            text = str(value)
        self.lines.append(f"{key}: {text}")

    def note(self, line: str) -> None:
        self.lines.append(line)

    def finish(self) -> ExperimentResult:
        header = [f"{k}: {v}" for k, v in self.metadata.items()]
        self.result.report = "\n".join(header + [""] + self.lines) + "\n"
        path = self.result.directory / "report.txt"
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.result.report, encoding="utf-8")
        self.result.files.append(path)
        return self.result


def _moments(samples: np.ndarray):
    """Mean, variance and their standard errors."""
    n = samples.size
    mean = float(np.mean(samples))
    centered = samples - mean
    var = float(np.mean(centered**2))
    m4 = float(np.mean(centered**4))
    return mean, var, float(np.sqrt(var / n)), float(np.sqrt(max(m4 - var**2, 0.0) / n))


def _wave_packet(cfg: RunConfig, grid: SpatialGrid) -> quantum.WaveFunction:
    i = cfg.initial
    return quantum.make_gaussian_packet(grid, i.x0, i.p0, i.sigma, cfg.physics.hbar)


def _quantum_moments(psi: quantum.WaveFunction, pot, eps: float, steps: int):
    """<x> and Var(x) after each of ``steps`` split-step updates, starting at t_a."""
    means, variances = [psi.mean_position()], [psi.position_variance()]
    for _ in range(steps):
        psi = quantum.evolve_schrodinger(psi, pot, eps, 1)
        means.append(psi.mean_position())
        variances.append(psi.position_variance())
    return psi, np.array(means), np.array(variances)


def run_brownian_triple(cfg: RunConfig, run: _Run) -> None:
    pot, params = cfg.potential_model(), cfg.physics.brownian()
    grid, time = cfg.grid.build(), cfg.time.build()
    initial = cfg.initial.distribution()
    P0 = initial.density(grid)

    fp = brownian.fokker_planck_evolve(P0, grid, pot, params, time, cfg.solver.theta)
    propagator = brownian.brownian_pathintegral_propagator(params, pot, grid, time, cfg.solver.convention)
    pi = propagator.apply(P0)
    ens = brownian.langevin_simulate(
        params, pot, initial, time, cfg.ensemble.n_traj, cfg.rng().child(0),
        block_size=cfg.ensemble.block_size, workers=cfg.ensemble.workers,
    )
    bins = make_grid(grid.x_min, grid.x_max, cfg.ensemble.histogram_bins)
    langevin = histogram_density(ens.terminal, bins)
    fp_binned = np.interp(bins.points, grid.points, fp)
    pi_binned = np.interp(bins.points, grid.points, pi)

    run.table("densities.csv", {"x": grid.points, "initial": P0, "fokker_planck": fp, "path_integral": pi})
    run.table("histogram.csv", {
        "x": bins.points, "langevin": langevin, "fokker_planck": fp_binned, "path_integral": pi_binned,
    })
    run.save("fokker_planck.csv", io.write_density, grid, fp)
    run.save("path_integral.csv", io.write_density, grid, pi)
    run.save("langevin.csv", io.write_density, bins, langevin)
    run.save("trajectories.csv", io.write_ensemble, ens)
    run.figure(plotting.plot_densities(
        run.result.directory / "brownian_triple.svg", bins.points,
        {"Langevin": langevin, "Fokker-Planck": fp_binned, "path integral": pi_binned},
        title=f"t = {time.t_b - time.t_a:g}",
    ))

    pairs = {
        "langevin_vs_fokker_planck": io.density_distances(langevin, fp_binned, bins),
        "langevin_vs_path_integral": io.density_distances(langevin, pi_binned, bins),
        "fokker_planck_vs_path_integral": io.density_distances(fp, pi, grid),
    }
    for name, d in pairs.items():
        run.report(f"l1_{name}", d.l1)
        run.report(f"ks_{name}", d.ks)
    mean, var, se_mean, se_var = _moments(ens.terminal)
    run.report("langevin_mean", mean)
    run.report("langevin_mean_se", se_mean)
    run.report("langevin_variance", var)
    run.report("langevin_variance_se", se_var)
    run.report("fokker_planck_mass", float(grid.integrate(fp)))
    run.report("path_integral_min_column_mass", float(propagator.column_integrals().min()))


def run_quantum_reference(cfg: RunConfig, run: _Run) -> None:
    pot, grid, time = cfg.potential_model(), cfg.grid.build(), cfg.time.build()
    psi0 = _wave_packet(cfg, grid)
    psi, means, variances = _quantum_moments(psi0, pot, time.eps, time.n_slices)
    rho0 = quantum.to_relative_frame(psi0, cfg.grid.n_xi)
    rho = quantum.propagate_density_matrix_pathintegral(rho0, pot, time)
    W0 = quantum.wigner_transform(rho0)

    split = quantum.probability_density(psi)
    diagonal = rho.diagonal()
    initial = quantum.probability_density(psi0)
    run.table("densities.csv", {"x": grid.points, "initial": initial, "split_step": split, "path_integral": diagonal})
    run.save("split_step.csv", io.write_density, grid, split)
    run.save("path_integral.csv", io.write_density, grid, diagonal)
    run.save("psi_final.csv", io.write_wavefunction, psi)
    run.save("density_matrix.csv", io.write_density_matrix, rho)
    run.table("moments.csv", {"t": time.times, "mean_x": means, "variance_x": variances})
    x, p = np.meshgrid(W0.x_grid.points, W0.p_grid.points, indexing="ij")
    run.table("wigner.csv", {"x": x, "p": p, "W": W0.values})
    run.figure(plotting.plot_densities(
        run.result.directory / "quantum_reference.svg", grid.points,
        {"split-step": split, "density-matrix path integral": diagonal},
    ))

    run.report("l1_split_step_vs_path_integral", io.density_distances(split, diagonal, grid).l1)
    run.report("trace_drift_max", rho.trace_drift)
    run.report("hermiticity_error", rho.hermiticity_error())
    run.report("wigner_min", W0.minimum)
    run.report("wigner_normalization", W0.normalization)
    run.report("wigner_marginal_error", float(np.max(np.abs(W0.position_marginal() - initial))))
    run.report("final_mean_x", float(means[-1]))
    run.report("final_variance_x", float(variances[-1]))


def _classical_initials(cfg: RunConfig, grid: SpatialGrid):
    psi0 = _wave_packet(cfg, grid)
    W0 = quantum.wigner_transform(quantum.to_relative_frame(psi0, cfg.grid.n_xi))
    return psi0, W0


def run_classical_limit(cfg: RunConfig, run: _Run) -> None:
    pot, grid, time = cfg.potential_model(), cfg.grid.build(), cfg.time.build()
    psi0, W0 = _classical_initials(cfg, grid)
    initials = semiclassical.sample_initial_conditions(W0, cfg.ensemble.n_traj, cfg.rng().child(0))
    classical = semiclassical.classical_evolve(initials, pot, time, store_paths=True)
    _, q_means, q_vars = _quantum_moments(psi0, pot, time.eps, time.n_slices)

    stats = np.array([_moments(classical.paths[:, k]) for k in range(time.n_slices + 1)])
    z_mean = np.abs(stats[:, 0] - q_means) / np.maximum(stats[:, 2], 1e-300)
    z_var = np.abs(stats[:, 1] - q_vars) / np.maximum(stats[:, 3], 1e-300)
    run.table("moments.csv", {
        "t": time.times, "classical_mean": stats[:, 0], "classical_variance": stats[:, 1],
        "quantum_mean": q_means, "quantum_variance": q_vars, "se_mean": stats[:, 2], "se_variance": stats[:, 3],
    })
    run.figure(plotting.plot_series(
        run.result.directory / "classical_limit.svg", time.times,
        {"classical <x>": stats[:, 0], "quantum <x>": q_means, "classical Var x": stats[:, 1], "quantum Var x": q_vars},
    ))
    run.report("max_mean_z", float(z_mean.max()))
    run.report("max_variance_z", float(z_var.max()))

    proposal = dataclasses.replace(cfg.proposal.build(), sign_floor=0.0)
    quasi = semiclassical.quasi_langevin_simulate(
        W0, pot, cfg.physics.hbar, time, cfg.ensemble.n_traj, proposal, cfg.rng(),
        block_size=cfg.ensemble.block_size, workers=cfg.ensemble.workers,
    )
    identical = bool(np.array_equal(quasi.terminal, classical.terminal))
    run.report("quasi_langevin_bitwise_identical", "yes" if identical else "no")
    run.note(semiclassical.sign_diagnostics(quasi).summary())


def _quasi_run(cfg: RunConfig, W0, pot, time, **overrides) -> semiclassical.SignedEnsemble:
    proposal = dataclasses.replace(cfg.proposal.build(), **overrides)
    return semiclassical.quasi_langevin_simulate(
        W0, pot, cfg.physics.hbar, time, cfg.ensemble.n_traj, proposal, cfg.rng(),
        block_size=cfg.ensemble.block_size, workers=cfg.ensemble.workers,
    )


def run_quasi_langevin(cfg: RunConfig, run: _Run) -> None:
    pot, grid, time = cfg.potential_model(), cfg.grid.build(), cfg.time.build()
    psi0, W0 = _classical_initials(cfg, grid)
    run.report("slices", time.n_slices)
    run.report("proposal_truncation", cfg.proposal.truncation)
    run.report("measure_factor", "on" if cfg.proposal.measure_factor else "off")
    try:
        ens = _quasi_run(cfg, W0, pot, time)
    except SignCollapseError as e:
        run.note("SIGN COLLAPSE: the ensemble mean sign fell below the configured floor.")
        run.report("sign_floor", cfg.proposal.sign_floor)
        if e.diagnostics is not None:
            run.report("mean_sign", e.diagnostics.mean_sign)
            run.note(e.diagnostics.summary())
        run.note(str(e))
        run.finish()
        raise

    diagnostics = semiclassical.sign_diagnostics(ens)
    steps = max(time.n_slices, ORACLE_MIN_STEPS)
    oracle = quantum.evolve_schrodinger(psi0, pot, time.duration / steps, steps)
    q_mean, q_second = oracle.mean_position(), oracle.position_variance() + oracle.mean_position() ** 2
    first = semiclassical.ratio_estimate(ens, "x")
    second = semiclassical.ratio_estimate(ens, "x2")
    classical = semiclassical.classical_evolve(
        semiclassical.PhaseSpaceSamples(ens.initial_x, ens.initial_p), pot, time, energy_tolerance=np.inf
    )

    density, error = semiclassical.ratio_density(ens, grid)
    oracle_density = quantum.probability_density(oracle)
    run.save("signed_ensemble.csv", io.write_signed_ensemble, ens)
    run.table("density.csv", {
        "x": grid.points, "ratio_density": density, "ratio_error": error, "quantum": oracle_density,
    })
    run.save("ratio_density.csv", io.write_density, grid, density)
    run.save("quantum_density.csv", io.write_density, grid, oracle_density)
    run.table("sign.csv", {"slice": np.arange(time.n_slices), "negative_fraction": diagnostics.negative_fraction})
    run.figure(plotting.plot_densities(
        run.result.directory / "quasi_langevin.svg", grid.points,
        {"quasi-Langevin ratio estimate": density, "split-step": oracle_density},
        errors={"quasi-Langevin ratio estimate": error},
    ))

    run.report("mean_x", first.value)
    run.report("mean_x_se", first.error)
    run.report("quantum_mean_x", q_mean)
    run.report("mean_x_z", abs(first.value - q_mean) / first.error if first.error > 0 else float("inf"))
    run.report("second_moment", second.value)
    run.report("second_moment_se", second.error)
    run.report("quantum_second_moment", q_second)
    run.report("second_moment_z", abs(second.value - q_second) / second.error if second.error > 0 else float("inf"))
    run.report("classical_mean_x", float(np.mean(classical.terminal)))
    run.report("mean_sign", diagnostics.mean_sign)
    run.report("effective_sample_size", diagnostics.effective_sample_size)
    run.report("negative_slice_fraction", diagnostics.negative_slice_fraction)
    run.note(diagnostics.summary())

    # Same stream, so positions and signs match and only the magnitudes differ
    other = _quasi_run(cfg, W0, pot, time, measure_factor=not cfg.proposal.measure_factor, sign_floor=0.0)
    alternate = semiclassical.ratio_estimate(other, "x")
    run.report("other_bookkeeping_mean_x", alternate.value)
    run.report("other_bookkeeping_mean_x_se", alternate.error)
    run.report("other_bookkeeping_mean_sign", semiclassical.sign_diagnostics(other).mean_sign)

    doubled = 2.0 * cfg.proposal.truncation
    try:
        wide = semiclassical.ratio_estimate(_quasi_run(cfg, W0, pot, time, truncation=doubled), "x")
    except SignCollapseError:
        run.note(f"truncation L = {doubled:g}: sign collapse")
        return
    shift = abs(wide.value - first.value)
    run.report("truncation_doubled_mean_x", wide.value)
    run.report("truncation_shift_mean_x", shift)
    run.report("truncation_insensitive", "yes" if shift < max(first.error, wide.error) else "no")


def run_airy_figure(cfg: RunConfig, run: _Run) -> None:
    grid = cfg.grid.build()
    ai = np.asarray(airy_ai(grid.points))
    run.table("airy.csv", {"x": grid.points, "ai": ai})
    run.figure(plotting.plot_airy(run.result.directory / "airy.svg", grid.points, ai))
    first_zero = optimize.brentq(airy_ai, -3.0, -2.0, xtol=1e-14)
    run.report("ai_0", airy_ai(0.0))
    run.report("ai_prime_0", airy_ai_prime(0.0))
    run.report("first_zero", first_zero)
    run.report("first_zero_error", abs(first_zero - AIRY_FIRST_ZERO))
    run.report("min_plotted_value", float(ai.min()))
    run.report("negative_points", int(np.sum(ai < 0)))


RUNNERS: Dict[str, Callable[[RunConfig, _Run], None]] = {
    "brownian-triple": run_brownian_triple,
    "quantum-reference": run_quantum_reference,
    "classical-limit": run_classical_limit,
    "quasi-langevin": run_quasi_langevin,
    "airy-figure": run_airy_figure,
}


def run_experiment(cfg: RunConfig, out: Optional[Path] = None) -> ExperimentResult:
    """
    Run the configured experiment and write its tables, figures and report.

    Args:
        cfg: Validated configuration
        out: Output directory overriding ``cfg.output.directory``

    Returns:
        ExperimentResult: Written files and headline numbers

    Raises:
        QuasiLangevinError: Subclasses propagate from the numerical modules;
            a sign collapse still writes a report naming the condition first
    """
    runner = RUNNERS.get(cfg.experiment)
    if runner is None:
        raise UsageError(f"No runner for experiment '{cfg.experiment}'")
    directory = Path(out if out is not None else cfg.output.directory)
    run = _Run(cfg, directory)
    started = clock.perf_counter()
    logger.info("Running %s (seed %d) into %s", cfg.experiment, cfg.seed, directory)
    runner(cfg, run)
    result = run.finish()
    logger.info("%s finished in %.2f s", cfg.experiment, clock.perf_counter() - started)
    return result
