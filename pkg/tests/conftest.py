"""Session fixtures: the bundled six-bus networks, regions and NTC corridors."""

import numpy as np
import pytest
from oracles import load_fixture

from gridhull import casefmt


@pytest.fixture(scope="session")
def six():
    return load_fixture("six_bus.json")


@pytest.fixture(scope="session")
def six_strong():
    return load_fixture("six_bus_strong.json")


@pytest.fixture(scope="session")
def six_agg(six):
    return casefmt.parse_aggregation(casefmt.data_file("six_bus_regions.json").read_text(), six)


@pytest.fixture(scope="session")
def six_groups(six_agg):
    return six_agg.groups()


@pytest.fixture(scope="session")
def six_spec():
    spec = casefmt.parse_ntc(casefmt.data_file("six_bus_ntc.json").read_text())
    return spec.with_direction(np.ones(len(spec.corridors)))
