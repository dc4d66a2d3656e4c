import math

import pytest

from acrelax.intervals import Interval, edge_params

# the worked-example line used throughout: vi=[0.9,1.2], vj=[0.8,1.0], theta=[pi/12, 5pi/12]
WORKED = dict(vi=(0.9, 1.2), vj=(0.8, 1.0), theta=(math.pi / 12, 5 * math.pi / 12))

TWO_BUS = """function mpc = tiny
mpc.baseMVA = 100;
mpc.bus = [
  1 3 0   0  0 0 1 1 0 230 1 1.1 0.9;
  2 1 100 30 0 0 1 1 0 230 1 1.1 0.9;
];
mpc.gen = [
  1 0 0 300 -300 1 100 1 300 0;
];
mpc.gencost = [
  2 0 0 3 0 10 0;
];
mpc.branch = [
  1 2 0 0.1 0 0 0 0 0 0 1 -30 30;
];
"""


@pytest.fixture
def worked():
    return edge_params(Interval(*WORKED["vi"]), Interval(*WORKED["vj"]), Interval(*WORKED["theta"]))


def symmetric_unit(theta_m: float):
    return edge_params(Interval(1.0, 1.0), Interval(1.0, 1.0), Interval(-theta_m, theta_m))


@pytest.fixture(scope="session")
def two_bus_grid():
    from acrelax.oracle import grid_global_opf, two_bus_network

    net = two_bus_network(r=0.01)
    return net, grid_global_opf(net, resolution=400)


@pytest.fixture(scope="session")
def three_bus_grid():
    from acrelax.oracle import grid_global_opf, three_bus_network

    net = three_bus_network()
    return net, grid_global_opf(net, resolution=400)


@pytest.fixture(scope="session")
def lossy_grid():
    from acrelax.oracle import grid_global_opf, lossy_asymmetric_network

    net = lossy_asymmetric_network()
    return net, grid_global_opf(net, resolution=400)


# --- acceptance reporting: one PASS/FAIL line per criterion -------------------------------

_CRITERIA: dict[int, tuple[str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion number and title")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or rep.when != "call" and not (rep.when == "setup" and rep.failed):
        return
    n, title = mark.args
    status = "PASS" if rep.passed else "FAIL"
    _CRITERIA[n] = (status, title)
    line = f"criterion {n:>2} {status}: {title}"
    print("\n" + line)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        status, title = _CRITERIA[n]
        terminalreporter.write_line(f"criterion {n:>2} {status}: {title}")
