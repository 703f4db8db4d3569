import os
from pathlib import Path

import numpy as np
import pytest

from topomap._backend import get_kernels

ROOT = Path(__file__).resolve().parent.parent
DATA_DIR = Path(os.environ.get("TOPOMAP_DATA_DIR", ROOT / "data"))


def _available_backends():
    names = ["python"]
    try:
        get_kernels("cython")
        names.append("cython")
    except ImportError:
        pass
    return names


BACKENDS = _available_backends()


@pytest.fixture(params=BACKENDS)
def backend(request):
    return request.param


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def data_file(name):
    path = DATA_DIR / name
    if not path.exists():
        pytest.skip(f"{path} missing; run scripts/fetch_data.py")
    return path


@pytest.fixture(scope="session")
def satimage_raw():
    from topomap.dataset import load_csv

    return load_csv(data_file("satimage.csv"), label_column=-1)


@pytest.fixture(scope="session")
def mnist5k():
    from topomap.dataset import load_csv, normalize

    return normalize(load_csv(data_file("mnist5k.csv"), label_column=-1))


# one summary line per acceptance criterion, echoed after the test session
_ACCEPTANCE_LINES: dict[int, str] = {}


@pytest.fixture
def record_criterion():
    def _record(number: int, title: str, ok: bool, detail: str) -> bool:
        line = f"criterion {number:2d} {'PASS' if ok else 'FAIL'}: {title} | {detail}"
        print(line)
        _ACCEPTANCE_LINES[number] = line
        return ok

    return _record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for number in sorted(_ACCEPTANCE_LINES):
            terminalreporter.write_line(_ACCEPTANCE_LINES[number])
