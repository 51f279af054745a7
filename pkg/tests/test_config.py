"""Tests for configuration loading."""

import os
from unittest.mock import patch

import pytest
from pydantic import ValidationError

from xdd_wcet.config import AnalysisConfig, WcetConfig, load_config


class TestLoadConfig:
    """Test cases for load_config."""

    def test_defaults(self):
        """Test defaults without any environment variables."""
        with patch.dict(os.environ, {}, clear=True):
            config = load_config()

        assert config.log_level == "INFO"
        assert config.pipeline == "teaching"
        assert config.analysis.max_states == 1024
        assert config.analysis.max_gen == 16
        assert config.analysis.widen is False
        assert config.analysis.use_matrices is True
        assert config.analysis.contention_window is None
        assert config.report.format == "text"

    def test_environment_overrides(self):
        """Test that environment variables override the defaults."""
        env = {
            "LOG_LEVEL": "DEBUG",
            "XDD_WCET_PIPELINE": "experimental",
            "XDD_WCET_MAX_STATES": "8",
            "XDD_WCET_MAX_GEN": "2",
            "XDD_WCET_MAX_ITERATIONS": "50",
            "XDD_WCET_WIDEN": "yes",
            "XDD_WCET_USE_MATRICES": "off",
            "XDD_WCET_CONTENTION_WINDOW": "3",
        }
        with patch.dict(os.environ, env, clear=True):
            config = load_config()

        assert config.log_level == "DEBUG"
        assert config.pipeline == "experimental"
        assert config.analysis.max_states == 8
        assert config.analysis.max_gen == 2
        assert config.analysis.max_iterations == 50
        assert config.analysis.widen is True
        assert config.analysis.use_matrices is False
        assert config.analysis.contention_window == 3

    def test_zero_window(self):
        """Test that a zero window is kept rather than treated as unset."""
        with patch.dict(os.environ, {"XDD_WCET_CONTENTION_WINDOW": "0"}, clear=True):
            assert load_config().analysis.contention_window == 0


class TestModels:
    """Test cases for the configuration models."""

    def test_bounds(self):
        """Test that out-of-range values are rejected."""
        with pytest.raises(ValidationError):
            AnalysisConfig(max_states=0)
        with pytest.raises(ValidationError):
            AnalysisConfig(max_gen=-1)
        with pytest.raises(ValidationError):
            AnalysisConfig(contention_window=-1)

    def test_report_format(self):
        """Test that only text and json reports exist."""
        with pytest.raises(ValidationError):
            WcetConfig(report={"format": "xml"})
