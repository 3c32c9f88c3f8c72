from pathlib import Path

import numpy as np
import pytest

from oscdip.imagecore import load_image

DATA = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def natural_image() -> np.ndarray:
    """64x64 RGB crop of the public-domain NASA astronaut portrait."""
    return load_image(DATA / "astronaut64.png")


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)


_ACCEPTANCE: list[str] = []


@pytest.fixture
def acceptance():
    """Record one PASS/FAIL line per acceptance criterion."""

    def record(number: int, ok: bool, detail: str) -> bool:
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
        print(line)
        _ACCEPTANCE.append(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE):
            terminalreporter.write_line(line)
