import os
from pathlib import Path

import pytest

_outcomes = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(label, text): acceptance criterion covered by a test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    label, text = marker.args
    prev = _outcomes.get(label, (text, "PASS"))[1]
    if report.failed:
        status = "FAIL"
    elif report.skipped:
        status = "SKIP" if prev == "PASS" else prev
    else:
        status = prev
    if report.when == "call" or report.failed or report.skipped:
        _outcomes[label] = (text, status)


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for label in sorted(_outcomes, key=lambda s: (int("".join(c for c in s if c.isdigit())), s)):
        text, status = _outcomes[label]
        terminalreporter.write_line(f"[{status}] criterion {label}: {text}")


@pytest.fixture(scope="session")
def mnist_dir():
    path = Path(os.environ.get("MNIST_DIR", "/root/data/mnist"))
    needed = ["train-images-idx3-ubyte", "train-labels-idx1-ubyte", "t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"]
    if not all((path / n).exists() for n in needed):
        pytest.skip(f"MNIST IDX files not found in {path} (set MNIST_DIR)")
    return path
