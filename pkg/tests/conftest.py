import numpy as np
import pytest

from beltrami.grid import ComplexGrid, GridSpec, make_operators


@pytest.fixture(scope="session")
def ops64():
    return make_operators(GridSpec(64))


@pytest.fixture(scope="session")
def ops128():
    return make_operators(GridSpec(128))


@pytest.fixture(scope="session")
def ops256():
    return make_operators(GridSpec(256))


@pytest.fixture(scope="session")
def ops512():
    return make_operators(GridSpec(512))


def gaussian_mix(spec, centers, widths, amps):
    """Sum of Gaussians, numerically compactly supported inside the collar."""
    z = spec.z
    g = np.zeros(z.shape, complex)
    for c, s, a in zip(centers, widths, amps):
        g += a * np.exp(-np.abs(z - c) ** 2 / (2 * s * s))
    return ComplexGrid(spec, g)


_ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture
def acceptance(request, capsys):
    """``acceptance(num, title, ok, detail)`` prints one verdict line and asserts it."""

    def record(num, title, ok, detail):
        line = f"criterion {num:>2} {title}: {'PASS' if ok else 'FAIL'} | {detail}"
        request.config.stash.setdefault(_ACCEPTANCE, []).append(line)
        with capsys.disabled():
            print("\n" + line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
