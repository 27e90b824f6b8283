"""Shared fixtures: the offline corpus, a network guard, and result lines.

Every test runs fully offline; an autouse guard turns any attempted socket
connection into a hard failure so a regression toward live calls is caught
immediately.  Tests in ``test_acceptance.py`` (and the runtime budget check)
additionally print one PASS/FAIL line per criterion in the terminal summary.
"""

from __future__ import annotations

import socket
import time

import pytest
from hypothesis import settings

from fixture_corpus import build_all

settings.register_profile("offline", deadline=None, max_examples=50)
settings.load_profile("offline")

_REAL_CONNECT = socket.socket.connect


def _guarded_connect(self, address, *args, **kwargs):
    if self.family in (socket.AF_INET, socket.AF_INET6):
        raise RuntimeError(f"test attempted network access: {address!r}")
    return _REAL_CONNECT(self, address, *args, **kwargs)


@pytest.fixture(autouse=True, scope="session")
def _no_network():
    socket.socket.connect = _guarded_connect
    yield
    socket.socket.connect = _REAL_CONNECT


@pytest.fixture(scope="session")
def corpus_dir(tmp_path_factory):
    return build_all(tmp_path_factory.mktemp("corpus"))


def pytest_configure(config):
    config._acceptance_results = []
    config._suite_started = time.monotonic()


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    if report.when != "call":
        return
    path = str(item.fspath)
    if "test_acceptance" not in path and "test_zz_runtime" not in path:
        return
    doc = item.function.__doc__ or item.name
    label = doc.strip().splitlines()[0].strip().rstrip(".")
    item.config._acceptance_results.append((label, report.outcome))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    results = getattr(config, "_acceptance_results", [])
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for label, outcome in results:
        status = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"[acceptance] {label}: {status}")
