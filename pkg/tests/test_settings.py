"""
Tests for environment configuration, validation helpers and the error hierarchy.
"""

import pytest
from pydantic import BaseModel, PositiveInt

from damctl.errors import (
    AmbiguityError,
    ConfigError,
    ConvergenceError,
    DamctlError,
    DomainError,
    IoError,
    RegimeError,
)
from damctl.settings import log_level, log_scaling_enabled, max_workers, validated


class _Sample(BaseModel):
    count: PositiveInt


class TestEnvironment:
    """Tests for the environment-backed settings."""

    def test_thread_cap(self, monkeypatch):
        """DAMCTL_THREADS caps the worker pools."""
        monkeypatch.setenv("DAMCTL_THREADS", "3")

        assert max_workers() == 3

    def test_thread_cap_default(self, monkeypatch):
        """Without DAMCTL_THREADS the cap is at least one worker."""
        monkeypatch.delenv("DAMCTL_THREADS", raising=False)

        assert max_workers() >= 1

    @pytest.mark.parametrize("value", ["0", "many"])
    def test_invalid_thread_cap(self, monkeypatch, value):
        """Non-integer or non-positive caps are configuration errors."""
        monkeypatch.setenv("DAMCTL_THREADS", value)

        with pytest.raises(ConfigError) as exc_info:
            max_workers()

        assert exc_info.value.field == "DAMCTL_THREADS"

    def test_log_scaling_switch(self, monkeypatch):
        """Log scaling is on unless DAMCTL_LOG_SCALING is 0."""
        monkeypatch.delenv("DAMCTL_LOG_SCALING", raising=False)
        assert log_scaling_enabled() is True

        monkeypatch.setenv("DAMCTL_LOG_SCALING", "0")
        assert log_scaling_enabled() is False

    def test_log_level(self, monkeypatch):
        """DAMCTL_LOG_LEVEL is upper-cased; the default is WARNING."""
        monkeypatch.delenv("DAMCTL_LOG_LEVEL", raising=False)
        assert log_level() == "WARNING"

        monkeypatch.setenv("DAMCTL_LOG_LEVEL", "debug")
        assert log_level() == "DEBUG"


class TestValidated:
    """Tests for validated()."""

    def test_valid_data(self):
        """Valid data builds the model."""
        assert validated(_Sample, {"count": 3}).count == 3

    def test_invalid_data(self):
        """The failing field is named in the ConfigError."""
        with pytest.raises(ConfigError) as exc_info:
            validated(_Sample, {"count": -1})

        assert exc_info.value.field == "count"
        assert str(exc_info.value).startswith("count: ")


class TestErrors:
    """Tests for the exception hierarchy."""

    def test_exit_codes(self):
        """Configuration and IO errors map to 2, numerical errors to 3."""
        assert ConfigError("bad").exit_code == 2
        assert IoError("out.csv", "denied").exit_code == 2
        assert RegimeError("wrong side", rho=1.5).exit_code == 3
        assert AmbiguityError(1.0, 1.0).exit_code == 3

    def test_context_in_message(self):
        """Errors render their context."""
        error = ConfigError("unknown key", field="speed", line=4)
        assert str(error) == "line 4: speed: unknown key"
        assert str(ConvergenceError("no root", bracket=(0.0, 1.0))) == "no root on [0, 1]"
        assert "rho=1.5" in str(RegimeError("tau exists only for rho < 1", rho=1.5))

    def test_domain_error_is_value_error(self):
        """Domain errors can be caught as ValueError."""
        error = DomainError("negative", argument=-1.0, boundary=0.0)

        assert isinstance(error, ValueError)
        assert isinstance(error, DamctlError)
        assert error.boundary == 0.0
