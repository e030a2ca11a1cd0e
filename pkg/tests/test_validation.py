from contextlib import ExitStack
from unittest.mock import patch

from quasilangevin.utils import AccuracyError
from validation.validation_suite import CHECKS, ValidationSuite


class TestValidationSuite:
    """Test the acceptance harness on small ensembles."""

    def test_quasi_langevin_check_completes(self, tmp_path, capsys):
        """The quasi-Langevin check reaches the 25-slice sign law."""
        suite = ValidationSuite(n_traj=20_000, workdir=tmp_path)
        suite.test_quasi_langevin()
        captured = capsys.readouterr()
        assert suite.total_tests == 6
        assert "25-slice mean sign: measured" in captured.out
        assert "25-slice mean sign follows the product law" in captured.out

    def test_errors_are_tallied(self, tmp_path, capsys):
        """A check that raises counts as a failure and later checks still run."""
        suite = ValidationSuite(workdir=tmp_path)
        with ExitStack() as stack:
            mocks = {}
            for name in CHECKS:
                side_effect = AccuracyError("Ai(0) is off") if name == "test_airy" else None
                mocks[name] = stack.enter_context(patch.object(suite, name, side_effect=side_effect))
            success = suite.run_all_validations()
        captured = capsys.readouterr()
        assert success is False
        assert suite.total_tests == 1
        assert "[FAIL] test_airy completed" in captured.out
        assert mocks["test_obstruction"].called
