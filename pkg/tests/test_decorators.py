"""
Unit tests for command decorators.
"""
import pytest

from utils.decorators import EXIT_BAD_INPUT, EXIT_FAILURE, EXIT_OK, cli_command
from utils.exceptions import (
    ConfigError,
    DiagnosticFailure,
    ImageReadError,
    IndivisibleDimensionError,
    ModeMismatchError,
)


@pytest.mark.unit
class TestCliCommand:
    """Tests for cli_command decorator."""

    def test_success(self):
        """Test decorator passes through an explicit exit code."""
        @cli_command
        def command(value):
            return 0 if value == 'ok' else 5

        assert command('ok') == EXIT_OK
        assert command(value='other') == 5

    def test_none_is_success(self):
        @cli_command
        def command():
            pass

        assert command() == EXIT_OK

    def test_preserves_name(self):
        @cli_command
        def cmd_named():
            return 0

        assert cmd_named.__name__ == 'cmd_named'

    def test_diagnostic_failure(self):
        """Test a failed diagnostic maps to exit code 1."""
        @cli_command
        def command():
            raise DiagnosticFailure('PR does not hold')

        assert command() == EXIT_FAILURE

    @pytest.mark.parametrize('error', [
        ConfigError('unknown key', key='warmup', line=2),
        ImageReadError('cannot read', path='x.png'),
        IndivisibleDimensionError('odd', axis='width', level=2, size=3),
        ValueError('plain'),
    ])
    def test_bad_input(self, error):
        """Test validation errors map to exit code 2."""
        @cli_command
        def command():
            raise error

        assert command() == EXIT_BAD_INPUT

    def test_unexpected_exception(self):
        """Test other exceptions map to exit code 1."""
        @cli_command
        def command():
            raise RuntimeError('boom')

        assert command() == EXIT_FAILURE

    def test_mode_mismatch_is_failure(self):
        @cli_command
        def command():
            raise ModeMismatchError('wrong mode', mode='whole')

        assert command() == EXIT_FAILURE
