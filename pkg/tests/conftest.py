from pathlib import Path

import pytest

from sparq.preprocess import load_config
from sparq.store import SECRET_ENV, Store
from sparq.testkit import ScenarioSpec, generate_scenario

FIXTURES = Path(__file__).parent / "fixtures"
POOL_SECRET = "s3cret-pool-token"

_acceptance_results = {}


def pytest_runtest_logreport(report):
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        label = getattr(report, "acceptance_label", None)
        if label:
            _acceptance_results.setdefault(label, []).append(report.outcome)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker:
        report.acceptance_label = marker.args[0]


def pytest_terminal_summary(terminalreporter):
    if not _acceptance_results:
        return
    terminalreporter.section("acceptance criteria")
    for label in sorted(_acceptance_results, key=lambda s: int(s.split()[0].lstrip("AC"))):
        outcomes = _acceptance_results[label]
        status = "PASS" if all(o == "passed" for o in outcomes) else "FAIL"
        terminalreporter.write_line(f"[{status}] {label}")


@pytest.fixture
def lag8_spec():
    return ScenarioSpec.from_json((FIXTURES / "lag8_scenario.json").read_text())


@pytest.fixture
def lag8_config():
    return load_config(FIXTURES / "lag8.conf")


@pytest.fixture
def lag8_pair(lag8_spec):
    return generate_scenario(lag8_spec)


@pytest.fixture
def pool_secret(monkeypatch):
    monkeypatch.setenv(SECRET_ENV, POOL_SECRET)
    return POOL_SECRET


@pytest.fixture
def store(tmp_path, lag8_config):
    return Store.create(tmp_path / "store", lag8_config, POOL_SECRET)


def snapshot(root: Path) -> dict:
    """Relative path -> bytes for every file under ``root``."""
    return {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}
