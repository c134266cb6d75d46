import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from wasabi_cgh.field import OpticalConfig

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

_ACCEPTANCE: list[tuple[str, bool, str]] = []


@pytest.fixture
def acceptance():
    """Record one criterion outcome; lines are echoed in the terminal summary."""

    def record(name: str, ok: bool, detail: str) -> None:
        line = f"{name}: {'PASS' if ok else 'FAIL'}  {detail}"
        print(line)
        _ACCEPTANCE.append((name, ok, detail))
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in sorted(_ACCEPTANCE, key=lambda r: r[0]):
        terminalreporter.write_line(f"{name}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def small_cfg():
    # two 256^2 tiles per side, PSFs capped to fit
    return OpticalConfig(n_w=512, n_h=256, z_min=-1e-3, z_max=1e-3, n_z=5, w_cap="auto", gamma=0.2)


@pytest.fixture
def tile_cfg():
    return OpticalConfig(n_w=256, n_h=256, z_min=-1e-3, z_max=1e-3, n_z=5, w_cap="auto", gamma=0.2)
