from pathlib import Path

import pytest

from pointloc.board import BoardModel, build_grid
from pointloc.config import load_config

import _report

DATA = Path(__file__).parent / "data"


def pytest_terminal_summary(terminalreporter):
    if _report.LINES:
        terminalreporter.section("acceptance criteria")
        for line in _report.LINES:
            terminalreporter.write_line(line)


@pytest.fixture(autouse=True)
def _no_config_env(monkeypatch):
    monkeypatch.delenv("POINTLOC_CONFIG", raising=False)


@pytest.fixture(scope="session")
def cfg():
    return load_config(None)


@pytest.fixture(scope="session")
def board():
    return BoardModel.from_layout()


@pytest.fixture(scope="session")
def grid23(board):
    return build_grid(board, 2, 3)


@pytest.fixture(scope="session")
def grid34(board):
    return build_grid(board, 3, 4)


@pytest.fixture(scope="session")
def data_dir():
    return DATA
