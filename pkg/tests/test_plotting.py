import numpy as np

from quasilangevin.functionals import airy_ai
from quasilangevin.plotting import plot_airy, plot_densities, plot_series


class TestPlotting:
    """Test SVG output."""

    def setup_method(self):
        """Sample curve shared by the figures."""
        self.x = np.linspace(-12.0, 4.0, 401)
        self.ai = np.asarray(airy_ai(self.x))

    def test_airy_is_byte_stable(self, tmp_path):
        """Two renders of the same data are identical."""
        a = plot_airy(tmp_path / "a.svg", self.x, self.ai)
        b = plot_airy(tmp_path / "b.svg", self.x, self.ai)
        assert a.read_bytes() == b.read_bytes()
        assert b"<dc:date>" not in a.read_bytes()

    def test_densities_with_errors(self, tmp_path):
        """Error bands are optional per series."""
        density = np.exp(-self.x**2)
        path = plot_densities(
            tmp_path / "sub" / "d.svg", self.x, {"a": density, "b": 0.5 * density}, title="t = 1",
            errors={"a": 0.1 * density},
        )
        text = path.read_text()
        assert text.startswith("<?xml")
        assert "t = 1" in text

    def test_series(self, tmp_path):
        """Series share a common abscissa."""
        path = plot_series(tmp_path / "s.svg", [0.0, 1.0, 2.0], {"mean sign": [1.0, 0.2, 0.04]}, markers=True)
        assert "mean sign" in path.read_text()
