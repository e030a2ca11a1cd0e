import dataclasses

import numpy as np
import pytest
from numpy.testing import assert_allclose

from quasilangevin.config import EXPERIMENTS, defaults_for
from quasilangevin.experiments import RUNNERS, run_experiment
from quasilangevin.io import compare_densities, read_density, read_table


def _small(experiment: str, n_traj: int, **sections):
    cfg = defaults_for(experiment)
    ensemble = dataclasses.replace(cfg.ensemble, n_traj=n_traj)
    return dataclasses.replace(cfg, ensemble=ensemble, **sections)


class TestExperiments:
    """End-to-end runs of each experiment."""

    def test_every_experiment_has_a_runner(self):
        """Each configurable experiment can be run."""
        assert set(RUNNERS) == set(EXPERIMENTS)

    def test_airy_figure(self, tmp_path):
        """The Airy run locates the first zero and dips below zero."""
        result = run_experiment(defaults_for("airy-figure"), tmp_path)
        assert result.summary["first_zero_error"] < 1e-10
        assert "negative_points: 0\n" not in result.report
        metadata, columns = read_table(tmp_path / "airy.csv")
        assert metadata["experiment"] == "airy-figure"
        assert columns["x"].size == 1601

    def test_report_is_reproducible(self, tmp_path):
        """The same config writes the same report."""
        cfg = _small("quasi-langevin", 3000)
        cfg = dataclasses.replace(cfg, proposal=dataclasses.replace(cfg.proposal, sign_floor=0.0))
        first = run_experiment(cfg, tmp_path / "a").report
        second = run_experiment(cfg, tmp_path / "b").report
        assert first == second
        table = "signed_ensemble.csv"
        assert (tmp_path / "a" / table).read_text() == (tmp_path / "b" / table).read_text()

    @pytest.mark.slow
    def test_brownian_triple(self, tmp_path):
        """Langevin, Fokker-Planck and path-integral densities agree."""
        result = run_experiment(defaults_for("brownian-triple"), tmp_path)
        for pair in ("langevin_vs_fokker_planck", "langevin_vs_path_integral", "fokker_planck_vs_path_integral"):
            assert result.summary[f"l1_{pair}"] < 0.05, pair
        assert result.summary["fokker_planck_mass"] == pytest.approx(1.0, abs=1e-3)
        assert (tmp_path / "brownian_triple.svg").is_file()

    def test_quantum_reference(self, tmp_path):
        """Split-step and density-matrix references agree on the harmonic quarter period."""
        result = run_experiment(defaults_for("quantum-reference"), tmp_path)
        assert result.summary["l1_split_step_vs_path_integral"] < 0.05
        assert result.summary["wigner_normalization"] == pytest.approx(1.0, abs=1e-6)
        assert result.summary["final_mean_x"] == pytest.approx(0.0, abs=0.02)
        written = compare_densities(tmp_path / "split_step.csv", tmp_path / "path_integral.csv")
        assert written.l1 == pytest.approx(result.summary["l1_split_step_vs_path_integral"], rel=1e-9)
        combined = compare_densities(
            tmp_path / "densities.csv", tmp_path / "densities.csv", column_a="split_step", column_b="path_integral"
        )
        assert combined.l1 == pytest.approx(written.l1, rel=1e-9)
        metadata, columns = read_table(tmp_path / "psi_final.csv")
        assert metadata["experiment"] == "quantum-reference"
        assert set(columns) == {"x", "re", "im"}
        assert "trace_drift" in read_table(tmp_path / "density_matrix.csv")[0]

    def test_classical_limit(self, tmp_path):
        """Classical moments track the quantum ones and the quasi-Langevin run reduces to Newton."""
        result = run_experiment(_small("classical-limit", 5000), tmp_path)
        assert "quasi_langevin_bitwise_identical: yes" in result.report
        assert result.summary["max_mean_z"] < 5.0
        assert result.summary["max_variance_z"] < 5.0

    def test_quasi_langevin(self, tmp_path):
        """A three-slice run keeps a usable mean sign with some negative slices."""
        result = run_experiment(defaults_for("quasi-langevin"), tmp_path)
        assert result.summary["mean_sign"] > 0.01
        assert result.summary["negative_slice_fraction"] > 0.0
        assert "truncation_insensitive:" in result.report or "sign collapse" in result.report
        assert "measure_factor: on" in result.report
        assert result.summary["other_bookkeeping_mean_sign"] > 0.0
        _, columns = read_table(tmp_path / "density.csv")
        assert columns["x"].size == 257
        grid, ratio, _ = read_density(tmp_path / "ratio_density.csv")
        assert grid.n_points == 257
        assert_allclose(ratio, columns["ratio_density"], rtol=1e-15)
        metadata, signed = read_table(tmp_path / "signed_ensemble.csv")
        assert metadata["slices"] == "3"
        assert set(np.unique(signed["sign"])) <= {-1.0, 1.0}
