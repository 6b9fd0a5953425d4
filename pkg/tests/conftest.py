import os

import pytest

from pottstm import transfer as tm


def pytest_collection_modifyitems(config, items):
    if os.environ.get("POTTSTM_EXTENDED") == "1":
        return
    skip = pytest.mark.skip(reason="set POTTSTM_EXTENDED=1 to run")
    for item in items:
        if "extended" in item.keywords:
            item.add_marker(skip)


_DECOMPOSITIONS: dict = {}


def decomposition(k: int, family: str = "petersen") -> tm.TransferDecomposition:
    key = (family, k)
    if key not in _DECOMPOSITIONS:
        _DECOMPOSITIONS[key] = tm.block_decompose(k, family)
    return _DECOMPOSITIONS[key]


@pytest.fixture(scope="session")
def dec():
    return decomposition


_CRITERIA: list[tuple[str, str, str]] = []


@pytest.fixture
def verdict():
    """Record one PASS/FAIL line for the acceptance summary and print it."""

    def record(label: str, ok: bool, detail: str = "") -> bool:
        status = "PASS" if ok else "FAIL"
        _CRITERIA.append((label, status, detail))
        print(f"{status} {label}: {detail}")
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for label, status, detail in _CRITERIA:
        terminalreporter.write_line(f"{status} {label}: {detail}")
