from pathlib import Path

import yaml
from pytest import fixture

from kedro_speedmeter.config import RunConfig
from kedro_speedmeter.fit import FitConfig
from kedro_speedmeter.model import (
    MainCavityParams,
    PccParams,
    PhysicalConstants,
    derive_rates,
)
from kedro_speedmeter.plugin import DEFAULT_CONFIG_FILES


@fixture
def consts():
    return PhysicalConstants()


@fixture
def cav():
    return MainCavityParams()


@fixture
def pcc():
    return PccParams()


@fixture
def rates(consts, cav, pcc):
    return derive_rates(consts, cav, pcc)


@fixture
def fit_config():
    return FitConfig()


@fixture
def run_config():
    return RunConfig.load(DEFAULT_CONFIG_FILES)


@fixture
def write_config(tmp_path):
    """Write a configuration override and return its path."""

    def _write(document, name="override.yml") -> Path:
        path = tmp_path / name
        with path.open("w") as config_file:
            yaml.safe_dump(document, config_file)
        return path

    return _write
