import functools

import pytest

from epiquant import appearance as ap
from epiquant import dsl
from epiquant.cli import read


@functools.lru_cache(maxsize=None)
def network(name):
    return dsl.parse_network(*read(name))


@functools.lru_cache(maxsize=None)
def scenario(name):
    return dsl.parse_scenario(*read(name))


@functools.lru_cache(maxsize=None)
def props(name):
    return dsl.parse_property_file(read(name)[0], file=name)


def amap(net, scn):
    return ap.build(scenario(scn), network(net))


def prop(file, label):
    return dict(props(file).properties)[label]


@pytest.fixture
def qss():
    return network("qss35.dmc")


@pytest.fixture
def qkd():
    return network("qkd.dmc")


ACCEPTANCE: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE):
            terminalreporter.write_line(line)
