import pytest
import os
import glob
import logging
import sys

import numpy as np

# Add project root to path
project_root = os.path.abspath(os.path.join(os.path.dirname(__file__), '..'))
sys.path.insert(0, project_root)

from core.channel.model import equal_gain_matrix, two_relay_example_gains

# Configure logging
logging.basicConfig(
    level=logging.INFO,
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
)
logger = logging.getLogger("RelayNetTest")


def pytest_addoption(parser):
    """Add custom command line options for the test system"""
    parser.addoption(
        "--update-snapshots",
        action="store_true",
        default=False,
        help="Update expected output snapshots instead of comparing"
    )
    parser.addoption(
        "--scenario",
        action="store",
        default=None,
        help="Run scenario tests whose directory name contains this string"
    )
    parser.addoption(
        "--runslow",
        action="store_true",
        default=False,
        help="Run the long acceptance sweeps marked slow"
    )


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running acceptance sweep (enable with --runslow)")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def update_snapshots(request):
    """Fixture that returns whether we should update snapshots"""
    return request.config.getoption("--update-snapshots")


@pytest.fixture
def example_gains():
    return two_relay_example_gains()


@pytest.fixture
def equal_gains():
    """Factory for equal-gain networks: equal_gains(m, h_sq=1.0)."""
    return equal_gain_matrix


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def output_root(tmp_path, monkeypatch):
    """Temporary output root, also exported as RELAYNET_OUTPUT_DIR."""
    root = tmp_path / "runs"
    root.mkdir()
    monkeypatch.setenv("RELAYNET_OUTPUT_DIR", str(root))
    return str(root)


def load_test_configs(directory_pattern):
    """
    Load all test configurations matching the pattern.

    Args:
        directory_pattern (str): Pattern to match test directories

    Returns:
        list: List of test configuration paths
    """
    abs_pattern = os.path.join(project_root, directory_pattern)
    configs = []
    for test_dir in sorted(glob.glob(abs_pattern)):
        config_path = os.path.join(test_dir, "test_config.yaml")
        if os.path.exists(config_path):
            configs.append(config_path)
    return configs


def pytest_generate_tests(metafunc):
    """
    Auto-discover scenario test cases.

    Every tests/test_data/scenarios/<case>/test_config.yaml becomes one
    parameter of the ``scenario_case`` argument.
    """
    if 'scenario_case' in metafunc.fixturenames:
        scenario_filter = metafunc.config.getoption("--scenario")
        configs = load_test_configs("tests/test_data/scenarios/*")
        if scenario_filter:
            configs = [c for c in configs if scenario_filter.lower() in c.lower()]
            if not configs:
                logger.warning(f"No scenario test configs match filter: {scenario_filter}")
        metafunc.parametrize("scenario_case", configs,
                             ids=[os.path.basename(os.path.dirname(c)) for c in configs])
