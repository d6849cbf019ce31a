"""Shared fixtures: project root on sys.path, logs and outputs kept under tmp_path."""
from __future__ import annotations

import os
import sys

import pytest

_ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
sys.path.insert(0, _ROOT)


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long reproduction runs (deselect with -m 'not slow')")


@pytest.fixture(autouse=True)
def isolated_env(tmp_path, monkeypatch):
    monkeypatch.setenv("TUBES_LOG_DIR", str(tmp_path / "logs"))
    monkeypatch.setenv("TUBES_OUTPUT_DIR", str(tmp_path / "output"))
    monkeypatch.setenv("TUBES_CONCURRENCY", "2")
    return tmp_path
