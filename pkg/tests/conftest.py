import numpy as np
import pytest

from ramimo.bench import ScenarioParams, generate_scenario
from ramimo.channel import GainPattern, Scatterer, Scenario
from ramimo.geometry import SphericalCap, build_upa, rotation_to


def small_scenario(seed=0, n=(2, 2), m=(2, 2), p=1.0, D=3, theta=np.pi / 6, distance=3.0, wavelength=0.0857):
    """Compact randomised link with rich scattering; cheap enough for oracle loops."""
    rng = np.random.default_rng(seed)
    r0 = np.array([0.6, 0.4, distance]) + rng.normal(0, 0.1, 3)
    tx = build_upa(*n, wavelength / 2, (0, 0, 0))
    rx = build_upa(*m, wavelength / 2, r0, rotation_to(-r0))
    pos = rng.uniform([-1, -1, 0.5], [1.5, 1.5, distance - 0.5], (D, 3))
    scat = [Scatterer(pos[d], float(rng.uniform(50, 500)), float(rng.uniform(0, 2 * np.pi))) for d in range(D)]
    return Scenario(wavelength, tx, rx, scat, GainPattern(p), noise_power=1e-9, power_budget=1e-2,
                    tx_cap=SphericalCap(theta), rx_cap=SphericalCap(theta))


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture(scope="session")
def default_scenario():
    return generate_scenario(ScenarioParams(), 0)


@pytest.fixture
def small():
    return small_scenario()


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.summary_lines():
        terminalreporter.write_line(line)
