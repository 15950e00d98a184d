import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_field(grid, rng, decay=1.0, components=1, zero_mean=False):
    from spdelab.gaussian import hermitian_noise
    from spdelab.spectral import SpectralField

    std = (1.0 + grid.k2) ** (-decay)
    if zero_mean:
        std = np.where(grid.k2 > 0, std, 0.0)
    c = np.stack([hermitian_noise(grid, std, rng) for _ in range(components)])
    return SpectralField(grid, c)


ACCEPTANCE_LINES: list[str] = []


def acceptance_line(number, ok: bool, detail: str) -> None:
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
