#!/usr/bin/env python3
"""
Acceptance Validation Suite
===========================

Runs each acceptance check of the lab end to end and prints a [PASS]/[FAIL]
line per claim:
- Brownian three-way equivalence and the white-noise contract
- Boltzmann equilibrium of the Fokker-Planck solver
- Quantum oracle, density-matrix path integral and Wigner contracts
- Airy function accuracy
- Classical limit, quasi-Langevin moments and the sign obstruction
"""

import dataclasses
import math
import os
import sys
import tempfile
from pathlib import Path

import numpy as np
from scipy import optimize, special

# Add the parent directory to the Python path to import quasilangevin
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from quasilangevin import brownian, quantum, semiclassical  # noqa: E402
from quasilangevin.config import parse_config  # noqa: E402
from quasilangevin.core import RngStream, harmonic, make_grid, make_time_grid, polynomial, quartic  # noqa: E402
from quasilangevin.experiments import run_experiment  # noqa: E402
from quasilangevin.functionals import airy_ai, airy_ai_prime, airy_proposal  # noqa: E402
from quasilangevin.utils import QuasiLangevinError, SignCollapseError  # noqa: E402

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"
CHECKS = (
    "test_brownian_triple",
    "test_noise_moments",
    "test_boltzmann",
    "test_quantum_oracle",
    "test_density_matrix",
    "test_wigner",
    "test_airy",
    "test_classical_limit",
    "test_quasi_langevin",
    "test_obstruction",
)


def _airy_series(x, terms=40):
    """Maclaurin series of Ai, accurate to double precision for |x| < 5."""
    c1 = 1.0 / (3 ** (2.0 / 3.0) * special.gamma(2.0 / 3.0))
    c2 = 1.0 / (3 ** (1.0 / 3.0) * special.gamma(1.0 / 3.0))
    k = np.arange(terms)
    f = np.sum(3.0**k * special.poch(1.0 / 3.0, k) * x ** (3 * k) / special.factorial(3 * k))
    g = np.sum(3.0**k * special.poch(2.0 / 3.0, k) * x ** (3 * k + 1) / special.factorial(3 * k + 1))
    return float(c1 * f - c2 * g)


class ValidationSuite:
    """Acceptance checks with a pass tally."""

    def __init__(self, full=False, n_traj=None, workdir=None):
        self.full = full
        self.n_traj = n_traj
        self.passed_tests = 0
        self.total_tests = 0
        self.workdir = Path(workdir) if workdir else Path(tempfile.mkdtemp(prefix="quasi-langevin-validation-"))

    def assert_test(self, condition, test_name, expected=None, actual=None):
        """Assert a test condition and track results."""
        self.total_tests += 1
        if condition:
            print(f"[PASS] {test_name}")
            self.passed_tests += 1
        else:
            print(f"[FAIL] {test_name}")
            if expected is not None and actual is not None:
                print(f"   Expected: {expected}")
                print(f"   Actual:   {actual}")

    def _config(self, name):
        cfg = parse_config((CONFIG_DIR / name).read_text(encoding="utf-8"))
        if self.n_traj is not None:
            cfg = dataclasses.replace(cfg, ensemble=dataclasses.replace(cfg.ensemble, n_traj=self.n_traj))
        return cfg

    def _header(self, title):
        print(f"*** {title} ***")
        print("=" * 50)

    def test_brownian_triple(self):
        """Langevin, Fokker-Planck and path-integral densities agree."""
        self._header("BROWNIAN THREE-WAY EQUIVALENCE")
        result = run_experiment(self._config("brownian_triple.json"), self.workdir / "brownian")
        for pair in ("langevin_vs_fokker_planck", "langevin_vs_path_integral", "fokker_planck_vs_path_integral"):
            value = result.summary[f"l1_{pair}"]
            self.assert_test(value < 0.05, f"L1 {pair.replace('_', ' ')}", "< 0.05", f"{value:.4g}")
        print()

    def test_noise_moments(self):
        """10^6 slice draws behave as white noise of variance 2D / eps."""
        self._header("NOISE MOMENT CONTRACT")
        params, eps = brownian.BrownianParams(), 0.01
        ens = brownian.langevin_simulate(
            params, polynomial([]), brownian.InitialDistribution(), make_time_grid(0.0, 1.0, 100), 10_000,
            RngStream(2), record_noise=True,
        )
        m = brownian.noise_moment_check(ens.noise, max_lag=3)
        target = 2.0 * params.diffusion / eps
        self.assert_test(abs(m.mean) < 3 * m.mean_error, "Noise mean within 3 SE of zero", 0, f"{m.mean:.4g}")
        self.assert_test(
            abs(m.autocovariance[0] / target - 1) < 0.05, "Lag-0 autocovariance within 5% of 2D/eps",
            target, f"{m.autocovariance[0]:.6g}",
        )
        for lag in range(1, 4):
            value, error = m.autocovariance[lag], m.autocovariance_error[lag]
            self.assert_test(abs(value) < 3 * error, f"Lag-{lag} autocovariance within 3 SE of zero", 0, f"{value:.4g}")
        print()

    def test_boltzmann(self):
        """Stationary Fokker-Planck solution against exp(-beta V) / Z."""
        self._header("BOLTZMANN EQUILIBRIUM")
        grid, params = make_grid(-4.0, 4.0, 256), brownian.BrownianParams()
        P0 = brownian.InitialDistribution(1.5, 0.3).density(grid)
        for name, pot in (("harmonic", harmonic()), ("quartic", quartic(0.25))):
            P = brownian.fokker_planck_evolve(P0, grid, pot, params, make_time_grid(0.0, 40.0, 800), theta=1.0)
            l1 = float(grid.integrate(np.abs(P - brownian.boltzmann_density(grid, pot, params))))
            self.assert_test(l1 < 1e-3, f"Equilibrium L1 ({name})", "< 1e-3", f"{l1:.3g}")
        print()

    def test_quantum_oracle(self):
        """Free spreading law and coherent-state mean."""
        self._header("QUANTUM ORACLE FIDELITY")
        grid = make_grid(-30.0, 30.0, 1024)
        psi = quantum.evolve_schrodinger(quantum.make_gaussian_packet(grid, 0.0, 0.0, 1.0), polynomial([]), 0.02, 100)
        expected = 1.0 + (2.0 / 2.0) ** 2
        actual = psi.position_variance()
        self.assert_test(abs(actual / expected - 1) < 1e-3, "Free packet variance law", expected, f"{actual:.6g}")

        grid = make_grid(-10.0, 10.0, 256)
        psi = quantum.make_gaussian_packet(grid, 1.0, 0.5, math.sqrt(0.5))
        psi = quantum.evolve_schrodinger(psi, harmonic(), math.pi / 400, 200)
        expected = 0.5
        actual = psi.mean_position()
        self.assert_test(abs(actual - expected) < 1e-3, "Coherent state mean at t = pi/2", expected, f"{actual:.6g}")
        print()

    def test_density_matrix(self):
        """Harmonic quarter period on 64-point grids."""
        self._header("DENSITY-MATRIX PATH INTEGRAL")
        result = run_experiment(self._config("quantum_reference.json"), self.workdir / "quantum")
        l1 = result.summary["l1_split_step_vs_path_integral"]
        self.assert_test(l1 < 1e-2, "Diagonal L1 against split-step", "< 1e-2", f"{l1:.3g}")
        print()

    def test_wigner(self):
        """Gaussian Wigner function is nonnegative with exact marginals."""
        self._header("WIGNER CONTRACT")
        grid = make_grid(-8.0, 8.0, 257)
        psi = quantum.make_gaussian_packet(grid, 1.0, 0.5, math.sqrt(0.5))
        W = quantum.wigner_transform(quantum.to_relative_frame(psi))
        marginal = float(np.max(np.abs(W.position_marginal() - quantum.probability_density(psi))))
        self.assert_test(W.minimum >= -1e-10, "Minimum >= -1e-10", ">= -1e-10", f"{W.minimum:.3g}")
        self.assert_test(abs(W.normalization - 1) < 1e-6, "Unit normalization", 1.0, f"{W.normalization:.10g}")
        self.assert_test(marginal < 1e-6, "Position marginal equals |psi|^2", "< 1e-6", f"{marginal:.3g}")
        print()

    def test_airy(self):
        """Ai(0), Ai'(0) and the first zero against independent oracles."""
        self._header("AIRY FUNCTION ACCURACY")
        ai0 = 1.0 / (3 ** (2.0 / 3.0) * special.gamma(2.0 / 3.0))
        aip0 = -1.0 / (3 ** (1.0 / 3.0) * special.gamma(1.0 / 3.0))
        self.assert_test(abs(airy_ai(0.0) - ai0) < 1e-9, "Ai(0) against the Gamma-function value", ai0, airy_ai(0.0))
        aip = airy_ai_prime(0.0)
        self.assert_test(abs(aip - aip0) < 1e-9, "Ai'(0) against the Gamma-function value", aip0, aip)

        zero = optimize.brentq(airy_ai, -3.0, -2.0, xtol=1e-14)
        oracle = optimize.brentq(_airy_series, -3.0, -2.0, xtol=1e-14)
        self.assert_test(abs(zero - oracle) < 1e-9, "First zero against the power-series root", oracle, zero)
        self.assert_test(abs(_airy_series(-1.5) - airy_ai(-1.5)) < 1e-9, "Ai(-1.5) against the power series")

        result = run_experiment(self._config("airy_figure.json"), self.workdir / "airy")
        self.assert_test("negative_points: 0\n" not in result.report, "Figure has negative values for x < 0")
        print()

    def test_classical_limit(self):
        """Harmonic quasi-Langevin reduces to Newton; moments match the oracle."""
        self._header("CLASSICAL LIMIT")
        result = run_experiment(self._config("classical_limit.json"), self.workdir / "classical")
        identical = "quasi_langevin_bitwise_identical: yes" in result.report
        self.assert_test(identical, "Quasi-Langevin equals the classical ensemble bitwise")
        for key in ("max_mean_z", "max_variance_z"):
            value = result.summary[key]
            self.assert_test(value < 3.0, f"{key.replace('_', ' ')} against the quantum oracle", "< 3", f"{value:.3g}")
        print()

    def test_quasi_langevin(self):
        """Ratio-estimated moments, sign statistics and truncation insensitivity."""
        self._header("QUASI-LANGEVIN SEMICLASSICAL CHECK")
        cfg = self._config("quasi_langevin.json")
        if self.full and self.n_traj is None:
            cfg = dataclasses.replace(cfg, ensemble=dataclasses.replace(cfg.ensemble, n_traj=1_000_000, workers=4))
        result = run_experiment(cfg, self.workdir / "quasi")
        for key in ("mean_x_z", "second_moment_z"):
            value = result.summary[key]
            self.assert_test(value < 3.0, f"{key} below 3 ratio standard errors", "< 3", f"{value:.3g}")
        mean_sign = result.summary["mean_sign"]
        self.assert_test(mean_sign > 0.01, "Mean sign above the floor", "> 0.01", mean_sign)
        self.assert_test(result.summary["negative_slice_fraction"] > 0, "Some slices draw negative Airy values")
        self.assert_test("truncation_insensitive: yes" in result.report, "Moments insensitive to L = 20 vs 40")

        # 25 slices multiply 24 per-slice mean signs; only the law is checkable.
        long_cfg = self._config("semiclassical_check.json")
        n_traj = self.n_traj or (1_000_000 if self.full else 100_000)
        long_cfg = dataclasses.replace(long_cfg, ensemble=dataclasses.replace(long_cfg.ensemble, n_traj=n_traj))
        psi0 = quantum.make_gaussian_packet(long_cfg.grid.build(), 1.0, 0.0, long_cfg.initial.sigma)
        W0 = quantum.wigner_transform(quantum.to_relative_frame(psi0))
        proposal = dataclasses.replace(long_cfg.proposal.build(), sign_floor=0.0, measure_factor=False)
        ens = semiclassical.quasi_langevin_simulate(
            W0, long_cfg.potential_model(), long_cfg.physics.hbar, long_cfg.time.build(), n_traj, proposal,
            long_cfg.rng(), workers=long_cfg.ensemble.workers,
        )
        measured = semiclassical.sign_diagnostics(ens).mean_sign
        law = airy_proposal(proposal.truncation, proposal.upper).expected_mean_sign ** (ens.n_slices - 1)
        print(f"   25-slice mean sign: measured {measured:.3g}, product law {law:.3g}")
        follows = abs(measured - law) < 4 / math.sqrt(n_traj)
        self.assert_test(follows, "25-slice mean sign follows the product law", law, measured)
        print()

    def test_obstruction(self):
        """A large-hbar, long-time run stops with a named sign collapse."""
        self._header("OBSTRUCTION SURFACING")
        out = self.workdir / "obstruction"
        try:
            run_experiment(self._config("obstruction.json"), out)
            collapsed = False
        except SignCollapseError as e:
            collapsed = e.exit_code == 4
        self.assert_test(collapsed, "Sign collapse raised")
        report = (out / "report.txt").read_text(encoding="utf-8") if (out / "report.txt").is_file() else ""
        self.assert_test("SIGN COLLAPSE" in report, "Report names the condition")
        print()

    def run_all_validations(self):
        """Run every acceptance check and print the tally."""
        print(f"Working directory: {self.workdir}")
        print()
        for name in CHECKS:
            try:
                getattr(self, name)()
            except QuasiLangevinError as e:
                # A failing check must not hide the ones after it
                self.assert_test(False, f"{name} completed", "no error", f"{type(e).__name__}: {e}")
                print()

        print("*** VALIDATION RESULTS ***")
        print("=" * 50)
        print()
        success_rate = (self.passed_tests / self.total_tests) * 100 if self.total_tests > 0 else 0
        print(f"Total tests run: {self.total_tests}")
        print(f"Tests passed: {self.passed_tests}")
        print(f"Tests failed: {self.total_tests - self.passed_tests}")
        print(f"Success rate: {success_rate:.1f}%")
        print()
        if self.passed_tests == self.total_tests:
            print("*** VALIDATION SUCCESSFUL! ***")
        else:
            print("*** VALIDATION FAILED ***")
            print(">>> Review the failed checks above.")
        return self.passed_tests == self.total_tests


if __name__ == "__main__":
    print("Starting acceptance validation suite...")
    print()

    validator = ValidationSuite(full="--full" in sys.argv)
    success = validator.run_all_validations()
    sys.exit(0 if success else 1)
