from ipaddress import IPv6Address

import pytest

from dlr import scenario_path
from dlr.sim import build, load_scenario


@pytest.fixture(scope="session")
def six_domain_path():
    return scenario_path("six_domain")


@pytest.fixture(scope="session")
def deadline_path():
    return scenario_path("deadline")


@pytest.fixture
def six_domain_sim(six_domain_path):
    return build(load_scenario(six_domain_path))


@pytest.fixture(scope="session")
def six_domain_run(six_domain_path):
    sim = build(load_scenario(six_domain_path))
    sim.run()
    return sim


@pytest.fixture(scope="session")
def addr():
    """Address of a named node in the reference network."""
    sim = build(load_scenario(scenario_path("six_domain")))
    return lambda node_id: sim.topology.nodes[node_id].address


DST = IPv6Address("2001:db8:5::9")


def pytest_terminal_summary(terminalreporter):
    from corpus import ACCEPTANCE_LINES
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
