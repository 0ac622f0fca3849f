import os
import sys

import pytest
from hypothesis import HealthCheck, settings

from speccompact.datamodel import normalize
from speccompact.guardband import train_guard_band
from speccompact.syngen import GeneratorConfig, generate_planted

# test helpers (oracles) live next to the tests
sys.path.insert(0, os.path.dirname(__file__))

settings.register_profile(
    "default",
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large],
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


def planted_pair(n_train, n_test, seed, **kw):
    """Normalized (train, test) planted populations with independent draws."""
    kw.setdefault("noise_scale", 0.005)
    tr, truth = generate_planted(GeneratorConfig("planted", n_train, seed=seed, **kw))
    te, _ = generate_planted(GeneratorConfig("planted", n_test, seed=seed + 10_000, **kw))
    return normalize(tr), normalize(te), truth


@pytest.fixture(scope="session")
def planted3():
    """Three-spec planted population: s3 = (s1 + s2) / 2."""
    return planted_pair(2000, 1000, seed=11, n_specs=3)


@pytest.fixture(scope="session")
def planted3_model(planted3):
    train, _, _ = planted3
    return train_guard_band(train, ["s1", "s2"], ["s3"], delta=0.025, seed=3)


# ---------------------------------------------------------------- acceptance report

_ACCEPTANCE = {}


def record_acceptance(number, title, passed, detail=""):
    _ACCEPTANCE[number] = (title, passed, detail)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or rep.when != "call":
        return
    number, title = marker.args
    detail = _ACCEPTANCE.get(number, (None, None, ""))[2]
    if rep.failed:
        short = str(call.excinfo.value).splitlines()[0] if call.excinfo else ""
        detail = detail or short
    _ACCEPTANCE[number] = (title, rep.passed, detail)


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion implemented by a test")


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        title, passed, detail = _ACCEPTANCE[number]
        status = "PASS" if passed else "FAIL"
        line = f"[{status}] {number:>2}. {title}"
        if detail:
            line += f"  ({detail})"
        tr.write_line(line)
