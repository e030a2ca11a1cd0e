import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal
from scipy import stats

from quasilangevin.brownian import BrownianParams, InitialDistribution, langevin_simulate
from quasilangevin.core import RngStream, harmonic, make_grid, make_time_grid
from quasilangevin.io import (
    compare_densities,
    density_distances,
    read_density,
    read_table,
    write_density,
    write_density_matrix,
    write_ensemble,
    write_signed_ensemble,
    write_table,
    write_wavefunction,
)
from quasilangevin.quantum import make_gaussian_packet, to_relative_frame
from quasilangevin.semiclassical import SignedEnsemble
from quasilangevin.utils import UsageError


class TestTables:
    """Test the delimited-text table format."""

    def test_metadata_and_columns(self, tmp_path):
        """Metadata lines and columns survive a write and read."""
        path = write_table(tmp_path / "t.csv", {"a": [1.0, 2.0], "b": [0.1, 1e-300]}, {"seed": 7})
        metadata, columns = read_table(path)
        assert metadata == {"seed": "7"}
        assert_array_equal(columns["a"], [1.0, 2.0])
        assert columns["b"][1] == 1e-300

    def test_layout(self, tmp_path):
        """Comment lines, then a header, then comma-separated rows."""
        path = write_table(tmp_path / "t.csv", {"x": [0.5], "y": [2.0]}, {"experiment": "airy-figure"})
        assert path.read_text().splitlines() == ["# experiment: airy-figure", "x,y", "0.5,2"]

    def test_empty_table(self, tmp_path):
        """A table with no rows still has its header."""
        _, columns = read_table(write_table(tmp_path / "t.csv", {"x": []}))
        assert columns["x"].size == 0

    def test_ragged_columns(self, tmp_path):
        """Columns of different lengths are rejected."""
        with pytest.raises(UsageError):
            write_table(tmp_path / "t.csv", {"a": [1.0], "b": [1.0, 2.0]})

    def test_missing_file(self, tmp_path):
        """Reading a missing file is a usage error."""
        with pytest.raises(UsageError):
            read_table(tmp_path / "absent.csv")

    def test_density_file(self, tmp_path):
        """Density files rebuild their grid."""
        grid = make_grid(-2.0, 2.0, 41)
        density = stats.norm.pdf(grid.points)
        path = write_density(tmp_path / "d.csv", grid, density, {"seed": 1})
        read_grid, read_values, metadata = read_density(path)
        assert read_grid.same_as(grid)
        assert_allclose(read_values, density, rtol=1e-15)
        assert metadata["seed"] == "1"

    def test_density_column_selection(self, tmp_path):
        """Experiment tables with several densities are read one column at a time."""
        grid = make_grid(-2.0, 2.0, 41)
        columns = {"x": grid.points, "split_step": np.ones(41), "path_integral": np.zeros(41)}
        path = write_table(tmp_path / "d.csv", columns)
        _, values, _ = read_density(path, "path_integral")
        assert_array_equal(values, np.zeros(41))
        with pytest.raises(UsageError, match="several columns"):
            read_density(path)
        with pytest.raises(UsageError, match="no column 'initial'"):
            read_density(path, "initial")

    def test_single_column_picked(self, tmp_path):
        """The only column besides x is taken without naming it."""
        grid = make_grid(-2.0, 2.0, 41)
        path = write_table(tmp_path / "d.csv", {"x": grid.points, "ratio_density": np.full(41, 0.25)})
        _, values, _ = read_density(path)
        assert_array_equal(values, np.full(41, 0.25))

    def test_object_writers(self, tmp_path):
        """Wavefunctions, density matrices and ensembles have their own layouts."""
        grid = make_grid(-8.0, 8.0, 33)
        psi = make_gaussian_packet(grid, 0.0, 1.0, 1.0)
        _, columns = read_table(write_wavefunction(tmp_path / "psi.csv", psi))
        assert_allclose(columns["re"] + 1j * columns["im"], psi.amplitudes, rtol=1e-15)

        rho = to_relative_frame(psi, n_xi=9)
        _, columns = read_table(write_density_matrix(tmp_path / "rho.csv", rho))
        assert columns["x"].size == 33 * 9

        ens = langevin_simulate(
            BrownianParams(), harmonic(), InitialDistribution(0.0, 1.0), make_time_grid(0, 1, 10), 5, RngStream(0)
        )
        metadata, columns = read_table(write_ensemble(tmp_path / "ens.csv", ens))
        assert_array_equal(columns["x_terminal"], ens.terminal)
        assert metadata["provenance"] == "seed=0 index=0 path=-"

        signed = SignedEnsemble.from_weights([0.1, 0.2], [1.0, -0.5])
        _, columns = read_table(write_signed_ensemble(tmp_path / "signed.csv", signed))
        assert_array_equal(columns["sign"], [1, -1])


class TestCompareDensities:
    """Test density distances."""

    def setup_method(self):
        """Grid shared by the comparisons."""
        self.grid = make_grid(-3.0, 3.0, 601)

    def test_identical(self, tmp_path):
        """Identical files are at distance zero."""
        density = stats.norm.pdf(self.grid.points)
        a = write_density(tmp_path / "a.csv", self.grid, density)
        b = write_density(tmp_path / "b.csv", self.grid, density)
        result = compare_densities(a, b)
        assert (result.l1, result.linf, result.ks) == (0.0, 0.0, 0.0)

    def test_disjoint_boxes(self):
        """Two disjoint unit boxes are at L1 distance 2."""
        a = np.zeros(601)
        b = np.zeros(601)
        a[100:200] = 1.0
        b[400:500] = 1.0
        result = density_distances(a, b, self.grid)
        assert result.l1 == pytest.approx(2.0)
        assert result.linf == 1.0
        assert result.ks == pytest.approx(1.0)

    def test_shifted_gaussian(self):
        """L1 of a 0.1 shift matches 4 Phi(0.05) - 2."""
        grid = make_grid(-8.0, 8.0, 1601)
        result = density_distances(stats.norm.pdf(grid.points), stats.norm.pdf(grid.points, loc=0.1), grid)
        assert result.l1 == pytest.approx(4 * stats.norm.cdf(0.05) - 2, abs=1e-3)

    def test_grid_mismatch(self, tmp_path):
        """Files on different grids cannot be compared."""
        a = write_density(tmp_path / "a.csv", self.grid, np.ones(601))
        other = make_grid(-3.0, 3.0, 301)
        b = write_density(tmp_path / "b.csv", other, np.ones(301))
        with pytest.raises(UsageError):
            compare_densities(a, b)

    def test_columns_of_one_table(self, tmp_path):
        """Two columns of the same experiment table can be compared."""
        density = stats.norm.pdf(self.grid.points)
        path = write_table(tmp_path / "t.csv", {"x": self.grid.points, "a": density, "b": 0.5 * density})
        result = compare_densities(path, path, column_a="a", column_b="b")
        assert result.linf == pytest.approx(0.5 * density.max())

    def test_dump(self, tmp_path):
        """The per-bin differences can be written out."""
        density = stats.norm.pdf(self.grid.points)
        a = write_density(tmp_path / "a.csv", self.grid, density)
        b = write_density(tmp_path / "b.csv", self.grid, 0.5 * density)
        compare_densities(a, b, dump=tmp_path / "diff.csv")
        metadata, columns = read_table(tmp_path / "diff.csv")
        assert_allclose(columns["difference"], 0.5 * density, rtol=1e-12)
        assert float(metadata["l1"]) == pytest.approx(0.5 * (2 * stats.norm.cdf(3.0) - 1), abs=1e-3)
