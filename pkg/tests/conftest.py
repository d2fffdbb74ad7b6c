import functools
from pathlib import Path

import numpy as np
import pytest

from polar_lab.decoder.reference import DecoderResources
from polar_lab.table1 import TABLE1

ROOT = Path(__file__).resolve().parents[1]
CONFIGS = ROOT / "configs"
SPEC_NAMES = [r.name for r in TABLE1]


@functools.cache
def resources(name):
    """Decoder resources for a Table 1 code, built once per session."""
    for r in TABLE1:
        if r.name == name:
            return DecoderResources(r.spec())
    raise KeyError(name)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# -- acceptance reporting -------------------------------------------------------
# Tests marked ``criterion(n)`` are gathered here and summarized as one
# PASS/FAIL line per criterion at the end of the run.

_CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number n")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or (rep.when != "call" and rep.passed):
        return
    details = [str(v) for k, v in item.user_properties if k == "detail"]
    if not rep.passed and rep.when == "call":
        details.append(f"failed: {rep.longrepr.reprcrash.message.splitlines()[0]}"
                       if hasattr(rep.longrepr, "reprcrash") else "failed")
    _CRITERIA.setdefault(marker.args[0], []).append((item.name, rep.passed, details))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        checks = _CRITERIA[n]
        ok = all(passed for _, passed, _ in checks)
        terminalreporter.write_line(
            f"criterion {n}: {'PASS' if ok else 'FAIL'} ({sum(p for _, p, _ in checks)}/"
            f"{len(checks)} checks)")
        for name, passed, details in checks:
            text = "; ".join(details)
            terminalreporter.write_line(f"    {'ok  ' if passed else 'FAIL'} {name}"
                                        + (f": {text}" if text else ""))
