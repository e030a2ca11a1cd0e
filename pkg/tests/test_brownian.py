import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal
from scipy import stats

from quasilangevin.brownian import (
    BrownianParams,
    InitialDistribution,
    boltzmann_density,
    brownian_pathintegral_propagator,
    fokker_planck_evolve,
    fokker_planck_operator,
    functional_form_simulate,
    implied_noise,
    langevin_simulate,
    noise_moment_check,
    path_action,
    slice_kernel,
)
from quasilangevin.core import RngStream, harmonic, make_grid, make_time_grid, polynomial, quartic
from quasilangevin.functionals import gaussian_path_weight
from quasilangevin.utils import AccuracyError, ConfigError, UsageError

FREE = polynomial([])


def variance_standard_error(samples):
    centered = samples - samples.mean()
    return np.sqrt((np.mean(centered**4) - np.mean(centered**2) ** 2) / samples.size)


class TestBrownianParams:
    """Test derived Brownian constants."""

    def test_derived(self):
        """D = k_B T / (m gamma), beta = 1 / (k_B T)."""
        params = BrownianParams(mass=2.0, gamma=0.5, temperature=3.0, k_b=1.0)
        assert params.diffusion == pytest.approx(3.0)
        assert params.beta == pytest.approx(1.0 / 3.0)
        assert params.mobility == pytest.approx(1.0)

    def test_zero_temperature(self):
        """T = 0 is allowed; beta is infinite and density evolution refuses it."""
        params = BrownianParams(temperature=0.0)
        assert params.beta == float("inf")
        with pytest.raises(ConfigError):
            params.require_thermal()

    def test_invalid(self):
        """Negative temperature and non-positive masses are rejected."""
        with pytest.raises(UsageError):
            BrownianParams(temperature=-1.0)
        with pytest.raises(UsageError):
            BrownianParams(gamma=0.0)


class TestLangevin:
    """Test Euler-Maruyama ensembles."""

    def test_free_diffusion_variance(self):
        """V = 0, x0 = 0: Var x(t) = 2 D t within 3 standard errors."""
        ens = langevin_simulate(
            BrownianParams(), FREE, InitialDistribution(0.0, 0.0), make_time_grid(0.0, 1.0, 100), 100_000, RngStream(1)
        )
        variance = np.var(ens.terminal)
        assert abs(variance - 2.0) < 3 * variance_standard_error(ens.terminal)
        assert abs(ens.terminal.mean()) < 3 * np.sqrt(2.0 / ens.n_traj)

    def test_harmonic_stationary_variance(self):
        """Long runs settle at Var x = k_B T / (m omega^2)."""
        time = make_time_grid(0.0, 8.0, 800)
        ens = langevin_simulate(BrownianParams(), harmonic(), InitialDistribution(0.0, 1.0), time, 20_000, RngStream(2))
        variance = np.var(ens.terminal)
        assert abs(variance - 1.0) < 3 * variance_standard_error(ens.terminal)

    def test_zero_temperature_is_gradient_flow(self):
        """T = 0 relaxes deterministically: x(t) = x0 (1 - eps)^N for the unit well."""
        time = make_time_grid(0.0, 1.0, 100)
        ens = langevin_simulate(
            BrownianParams(temperature=0.0), harmonic(), InitialDistribution(2.0, 0.0), time, 10, RngStream(3)
        )
        assert_allclose(ens.terminal, 2.0 * (1.0 - time.eps) ** 100)

    def test_unstable_step(self):
        """eps * |V''| / (m gamma) >= 0.5 is a configuration error."""
        with pytest.raises(ConfigError) as info:
            time = make_time_grid(0.0, 1.0, 100)
            langevin_simulate(BrownianParams(), harmonic(omega=10.0), InitialDistribution(), time, 10, RngStream(0))
        assert info.value.errors[0][0] == "time.n_slices"

    def test_deterministic_across_workers(self):
        """Thread count does not change the trajectories."""
        time = make_time_grid(0.0, 1.0, 50)
        args = (BrownianParams(), harmonic(), InitialDistribution(1.0, 0.5), time, 5000, RngStream(4))
        serial = langevin_simulate(*args, block_size=512, workers=1)
        threaded = langevin_simulate(*args, block_size=512, workers=4)
        assert_array_equal(serial.terminal, threaded.terminal)
        assert serial.provenance == "seed=4 index=0 path=-"

    def test_stored_paths(self):
        """Paths start at the initial positions and end at the terminal ones."""
        ens = langevin_simulate(
            BrownianParams(), harmonic(), InitialDistribution(1.0, 0.5), make_time_grid(0.0, 1.0, 20), 100,
            RngStream(5), store_paths=True, record_noise=True,
        )
        assert ens.paths.shape == (100, 21)
        assert ens.noise.shape == (100, 20)
        assert_array_equal(ens.paths[:, 0], ens.initial)
        assert_array_equal(ens.paths[:, -1], ens.terminal)


class TestNoiseMoments:
    """Test the white-noise moment contract."""

    def setup_method(self):
        """10^6 slice draws from a free ensemble."""
        self.eps = 0.01
        ens = langevin_simulate(
            BrownianParams(), FREE, InitialDistribution(), make_time_grid(0.0, 1.0, 100), 10_000, RngStream(6),
            record_noise=True,
        )
        self.moments = noise_moment_check(ens.noise, max_lag=5)

    def test_mean(self):
        """Mean within 3 sqrt(2D / (eps n)) of zero."""
        assert abs(self.moments.mean) < 3 * np.sqrt(2.0 / (self.eps * self.moments.n_samples))

    def test_lag_zero(self):
        """Lag-0 autocovariance within 5% of 2D / eps."""
        assert self.moments.autocovariance[0] == pytest.approx(2.0 / self.eps, rel=0.05)

    def test_higher_lags(self):
        """Lags 1..5 vanish within 3 standard errors."""
        for lag in range(1, 6):
            assert abs(self.moments.autocovariance[lag]) < 3 * self.moments.autocovariance_error[lag]

    def test_too_few_samples(self):
        """Fewer than 10^4 samples cannot support the check."""
        with pytest.raises(UsageError):
            noise_moment_check(np.zeros((10, 10)))


class TestPathAction:
    """Test the functional form of the Brownian path integral."""

    def test_implied_noise_recovers_draws(self):
        """Differencing an Euler-Maruyama path gives back its noise."""
        params, pot, time = BrownianParams(), harmonic(), make_time_grid(0.0, 1.0, 50)
        ens = langevin_simulate(
            params, pot, InitialDistribution(0.5, 0.5), time, 200, RngStream(7), store_paths=True, record_noise=True
        )
        assert_allclose(implied_noise(ens.paths, params, pot, time.eps), ens.noise, rtol=1e-8, atol=1e-8)

    def test_action_matches_gaussian_weight(self):
        """exp(-action) is the Gaussian functional of the implied noise with D -> 2D."""
        params, pot, time = BrownianParams(temperature=0.5), quartic(), make_time_grid(0.0, 0.5, 25)
        ens = langevin_simulate(
            params, pot, InitialDistribution(0.0, 0.5), time, 50, RngStream(8), store_paths=True, record_noise=True
        )
        action = path_action(ens.paths, params, pot, time.eps)
        weight = gaussian_path_weight(ens.noise, 2 * params.diffusion, time.eps)
        assert_allclose(np.exp(-action), weight, rtol=1e-6)

    def test_unknown_convention(self):
        """Only pre-point and midpoint drifts exist."""
        with pytest.raises(UsageError):
            implied_noise(np.zeros((1, 3)), BrownianParams(), FREE, 0.1, convention="post-point")

    def test_functional_form_matches_langevin(self):
        """Noise-first simulation has the same law as step-by-step Langevin."""
        params, pot, time = BrownianParams(), harmonic(), make_time_grid(0.0, 1.0, 100)
        initial = InitialDistribution(1.0, 0.5)
        noise_first = functional_form_simulate(params, pot, initial, time, 50_000, RngStream(9))
        stepwise = langevin_simulate(params, pot, initial, time, 50_000, RngStream(10))
        standard_error = np.sqrt(np.var(stepwise.terminal) * 2 / 50_000)
        assert abs(noise_first.terminal.mean() - stepwise.terminal.mean()) < 4 * standard_error
        assert noise_first.log_weights.shape == (50_000,)
        assert np.all(noise_first.log_weights <= 0)

    def test_functional_form_ks_over_seed_pairs(self):
        """Two-sample KS over 20 seed pairs: p-values show no systematic disagreement."""
        params, pot, time = BrownianParams(), harmonic(), make_time_grid(0.0, 1.0, 100)
        initial = InitialDistribution(0.5, 0.5)
        p_values = []
        for pair in range(20):
            noise_first = functional_form_simulate(params, pot, initial, time, 4000, RngStream(100 + pair))
            stepwise = langevin_simulate(params, pot, initial, time, 4000, RngStream(200 + pair))
            p_values.append(stats.ks_2samp(noise_first.terminal, stepwise.terminal).pvalue)
        p_values = np.array(p_values)
        assert np.sum(p_values < 0.05) <= 4
        assert np.median(p_values) > 0.1


class TestFokkerPlanck:
    """Test the Scharfetter-Gummel Fokker-Planck solver."""

    def test_zero_steps(self):
        """No time grid returns P0."""
        grid = make_grid(-4.0, 4.0, 64)
        P0 = InitialDistribution(0.0, 1.0).density(grid)
        assert_array_equal(fokker_planck_evolve(P0, grid, harmonic(), BrownianParams(), None), P0)

    def test_free_variance_law(self):
        """V = 0: variance grows as sigma0^2 + 2 D t."""
        grid = make_grid(-15.0, 15.0, 601)
        P0 = InitialDistribution(0.0, 1.0).density(grid)
        P = fokker_planck_evolve(P0, grid, FREE, BrownianParams(), make_time_grid(0.0, 1.0, 100))
        variance = grid.integrate(grid.points**2 * P) / grid.integrate(P)
        assert variance == pytest.approx(3.0, rel=1e-3)

    def test_mass_and_positivity(self):
        """Mass is conserved to 1e-8 and P stays non-negative."""
        grid = make_grid(-4.0, 4.0, 256)
        P0 = InitialDistribution(1.0, 0.5).density(grid)
        P = fokker_planck_evolve(P0, grid, quartic(), BrownianParams(), make_time_grid(0.0, 2.0, 200))
        assert abs(grid.integrate(P) - grid.integrate(P0)) < 1e-8
        assert P.min() >= -1e-12

    def test_operator_columns_sum_to_zero(self):
        """The generator has zero column sums."""
        grid = make_grid(-3.0, 3.0, 32)
        forward, diagonal, backward = fokker_planck_operator(grid, quartic(), BrownianParams())
        columns = diagonal.copy()
        columns[:-1] += forward
        columns[1:] += backward
        assert np.max(np.abs(columns)) < 1e-9 * np.max(np.abs(diagonal))

    @pytest.mark.parametrize("pot", [harmonic(), quartic()], ids=["harmonic", "quartic"])
    def test_boltzmann_equilibrium(self, pot):
        """Long runs converge to exp(-beta V) / Z with L1 < 1e-3."""
        grid = make_grid(-4.0, 4.0, 256)
        params = BrownianParams()
        P0 = InitialDistribution(1.5, 0.3).density(grid)
        P = fokker_planck_evolve(P0, grid, pot, params, make_time_grid(0.0, 40.0, 800), theta=1.0)
        assert grid.integrate(np.abs(P - boltzmann_density(grid, pot, params))) < 1e-3

    def test_boltzmann_independent_of_start(self):
        """A narrow Gaussian and an off-center box relax to the same exp(-beta V) / Z."""
        grid = make_grid(-4.0, 4.0, 256)
        params, pot, time = BrownianParams(), quartic(), make_time_grid(0.0, 40.0, 800)
        gaussian = InitialDistribution(1.5, 0.3).density(grid)
        box = np.where(np.abs(grid.points + 1.0) < 0.5, 1.0, 0.0)
        box /= grid.integrate(box)
        target = boltzmann_density(grid, pot, params)
        relaxed = [fokker_planck_evolve(P0, grid, pot, params, time, theta=1.0) for P0 in (gaussian, box)]
        for P in relaxed:
            assert grid.integrate(np.abs(P - target)) < 1e-3
        assert grid.integrate(np.abs(relaxed[0] - relaxed[1])) < 1e-3

    def test_explicit_cfl(self):
        """theta = 0 with D eps / dx^2 > 0.5 is a configuration error."""
        grid = make_grid(-4.0, 4.0, 256)
        P0 = InitialDistribution(0.0, 1.0).density(grid)
        with pytest.raises(ConfigError):
            fokker_planck_evolve(P0, grid, harmonic(), BrownianParams(), make_time_grid(0.0, 1.0, 100), theta=0.0)

    def test_shape_mismatch(self):
        """P0 must live on the grid."""
        with pytest.raises(UsageError):
            fokker_planck_evolve(np.ones(5), make_grid(0, 1, 8), harmonic(), BrownianParams(), None)

    def test_zero_temperature_rejected(self):
        """Density evolution needs T > 0."""
        grid = make_grid(-4.0, 4.0, 64)
        with pytest.raises(ConfigError):
            fokker_planck_evolve(
                np.ones(64) / 8, grid, harmonic(), BrownianParams(temperature=0.0), make_time_grid(0, 1, 10)
            )


class TestPathIntegralPropagator:
    """Test the chained short-time kernel."""

    def setup_method(self):
        """Grid resolving a 0.01 slice of unit diffusion."""
        self.grid = make_grid(-2.0, 2.0, 161)
        self.params = BrownianParams()

    def test_free_one_slice_is_heat_kernel(self):
        """V = 0, one slice: Gaussian of variance 2 D eps."""
        eps = 0.01
        J = brownian_pathintegral_propagator(self.params, FREE, self.grid, make_time_grid(0.0, eps, 1))
        column = J.matrix[:, 80]
        expected = np.exp(-(self.grid.points**2) / (4 * eps)) / np.sqrt(4 * np.pi * eps)
        assert_allclose(column, expected, atol=1e-6)

    def test_columns_normalized(self):
        """Every column integrates to one."""
        J = brownian_pathintegral_propagator(self.params, harmonic(), self.grid, make_time_grid(0.0, 0.5, 50))
        assert_allclose(J.column_integrals(), 1.0, atol=1e-3)

    def test_composition(self):
        """J(t_a -> t_b) = J(t_m -> t_b) J(t_a -> t_m)."""
        time = make_time_grid(0.0, 0.4, 40)
        first, second = time.split(15)
        whole = brownian_pathintegral_propagator(self.params, harmonic(), self.grid, time)
        composed = brownian_pathintegral_propagator(self.params, harmonic(), self.grid, first).compose(
            brownian_pathintegral_propagator(self.params, harmonic(), self.grid, second)
        )
        assert composed.n_slices == 40
        assert np.sum(np.abs(whole.matrix - composed.matrix)) * self.grid.dx**2 < 1e-8

    def test_matches_fokker_planck(self):
        """The propagated density agrees with the Fokker-Planck solution."""
        grid = make_grid(-4.0, 4.0, 256)
        time = make_time_grid(0.0, 1.0, 100)
        P0 = InitialDistribution(1.0, 0.5).density(grid)
        pi = brownian_pathintegral_propagator(self.params, harmonic(), grid, time).apply(P0)
        fp = fokker_planck_evolve(P0, grid, harmonic(), self.params, time)
        assert grid.integrate(np.abs(pi - fp)) < 0.02

    def test_midpoint_convention(self):
        """Midpoint drift also gives normalized columns."""
        J = brownian_pathintegral_propagator(
            self.params, harmonic(), self.grid, make_time_grid(0.0, 0.5, 50), convention="midpoint"
        )
        assert_allclose(J.column_integrals(), 1.0, atol=1e-3)

    def test_under_resolved_kernel(self):
        """A kernel narrower than 4 grid spacings is an accuracy error."""
        with pytest.raises(AccuracyError):
            slice_kernel(make_grid(-2.0, 2.0, 41), FREE, self.params, 0.01)

    def test_compose_grid_mismatch(self):
        """Propagators on different grids cannot be composed."""
        time = make_time_grid(0.0, 0.1, 10)
        a = brownian_pathintegral_propagator(self.params, FREE, self.grid, time)
        b = brownian_pathintegral_propagator(self.params, FREE, make_grid(-2.0, 2.0, 121), time)
        with pytest.raises(UsageError):
            a.compose(b)
