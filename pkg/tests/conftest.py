import pytest

from kim import fixtures


@pytest.fixture(scope="session")
def lander_graph():
    return fixtures.load_fixture("lander_kim")


@pytest.fixture(scope="session")
def racing_graph():
    return fixtures.load_fixture("racing_kim")
