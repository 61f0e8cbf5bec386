"""Configuration, drivers, self-checks and the command line interface."""

from stocheuler.harness.config import ConfigError, InitialDataSpec, PassiveScalarSpec, SimConfig, load_config

__all__ = ["ConfigError", "InitialDataSpec", "PassiveScalarSpec", "SimConfig", "load_config"]
