import numpy as np
import pytest

from quasilangevin.utils import (
    AccuracyError,
    ConfigError,
    NumericalStabilityError,
    PositivityError,
    QuasiLangevinError,
    SignCollapseError,
    UsageError,
    require_finite,
    require_int,
    require_non_negative,
    require_positive,
)


class TestExceptions:
    """Test the exception hierarchy and exit codes."""

    def test_exit_codes(self):
        """Each error family maps to its own exit code."""
        assert QuasiLangevinError.exit_code == 1
        assert UsageError.exit_code == 2
        assert ConfigError.exit_code == 2
        assert PositivityError.exit_code == 2
        assert NumericalStabilityError.exit_code == 3
        assert AccuracyError.exit_code == 3
        assert SignCollapseError.exit_code == 4

    def test_hierarchy(self):
        """Specific errors are caught by their family base."""
        assert issubclass(ConfigError, UsageError)
        assert issubclass(AccuracyError, NumericalStabilityError)
        for cls in (UsageError, NumericalStabilityError, SignCollapseError):
            assert issubclass(cls, QuasiLangevinError)

    def test_config_error_collects_paths(self):
        """ConfigError keeps every (path, message) pair and joins them."""
        error = ConfigError([("physics.temperature", "must be >= 0"), ("grid.n_points", "must be >= 8")])
        assert error.errors[0] == ("physics.temperature", "must be >= 0")
        assert "physics.temperature: must be >= 0" in str(error)
        assert "grid.n_points" in str(error)

    def test_config_error_without_path(self):
        """A pathless error prints just the message."""
        assert str(ConfigError([("", "invalid JSON")])) == "invalid JSON"

    def test_sign_collapse_carries_diagnostics(self):
        """Diagnostics travel with the exception."""
        error = SignCollapseError("collapsed", diagnostics={"mean_sign": 0.001})
        assert error.diagnostics == {"mean_sign": 0.001}
        assert SignCollapseError("collapsed").diagnostics is None


class TestValidators:
    """Test the scalar validators."""

    def test_require_positive(self):
        """Positive values pass through as floats."""
        assert require_positive("omega", 2) == 2.0
        assert isinstance(require_positive("omega", 2), float)

    def test_require_positive_errors(self):
        """Zero, negatives and non-finite values are rejected."""
        for bad in (0, -1.0, np.inf, np.nan):
            with pytest.raises(UsageError):
                require_positive("omega", bad)

    def test_message_names_parameter(self):
        """The parameter name appears in the error message."""
        with pytest.raises(UsageError, match="sigma"):
            require_positive("sigma", -1)

    def test_require_non_negative(self):
        """Zero passes, negatives do not."""
        assert require_non_negative("temperature", 0) == 0.0
        with pytest.raises(UsageError):
            require_non_negative("temperature", -0.1)

    def test_require_finite(self):
        """Strings and infinities are rejected."""
        assert require_finite("x0", "1.5") == 1.5
        with pytest.raises(UsageError):
            require_finite("x0", "abc")
        with pytest.raises(UsageError):
            require_finite("x0", None)  # type: ignore
        with pytest.raises(UsageError):
            require_finite("x0", -np.inf)

    def test_require_int(self):
        """Integers at or above the minimum pass; bools and floats do not."""
        assert require_int("n", 8, 8) == 8
        assert require_int("n", np.int64(3)) == 3
        with pytest.raises(UsageError):
            require_int("n", 7, 8)
        with pytest.raises(UsageError):
            require_int("n", True)
        with pytest.raises(UsageError):
            require_int("n", 3.0)  # type: ignore
