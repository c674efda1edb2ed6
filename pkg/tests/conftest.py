import pytest

from crowdloc.dataset import DatasetConfig, build_dataset
from crowdloc.synthgen import CampaignConfig, generate_building, generate_campaign, make_environment


@pytest.fixture(scope="session")
def small_grid():
    return generate_building(6, 6, 2.5)


@pytest.fixture(scope="session")
def small_campaign(small_grid):
    env = make_environment(small_grid, n_aps=12, seed=5)
    return generate_campaign(env, small_grid, CampaignConfig(n_paths=30, seed=5, emit_sensors=False))


@pytest.fixture(scope="session")
def small_dataset(small_campaign, small_grid):
    return build_dataset(small_campaign.logs, small_grid, DatasetConfig(min_checkpoint_presence=10))


def pytest_terminal_summary(terminalreporter):
    import sys

    module = sys.modules.get("tests.test_acceptance")
    if module is not None and module.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in module.RESULTS:
            terminalreporter.write_line(line)
