import os
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

DATA = Path(__file__).parent / "data"
DATASET_ENV = "ZIOTP2025_DIR"

_criteria: list[tuple[str, str, str]] = []


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(name): acceptance criterion reported in the summary")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    name = marker.args[0]
    detail = "; ".join(str(v) for k, v in item.user_properties if k == "detail")
    if rep.when == "setup" and rep.skipped:
        _criteria.append((name, "SKIP", str(rep.longrepr[2]) if isinstance(rep.longrepr, tuple) else ""))
    elif rep.when == "call":
        if rep.skipped:
            status = "SKIP"
            detail = str(rep.longrepr[2]) if isinstance(rep.longrepr, tuple) else detail
        else:
            status = "PASS" if rep.passed else "FAIL"
        _criteria.append((name, status, detail))


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for name, status, detail in _criteria:
        terminalreporter.write_line(f"{status:4}  {name}" + (f"  ({detail})" if detail else ""))


@pytest.fixture(scope="session")
def dataset_dir():
    root = os.environ.get(DATASET_ENV)
    if not root:
        pytest.skip(f"{DATASET_ENV} not set; dataset captures unavailable")
    root = Path(root)
    needed = ["topology_a.pcap", "topology_b.pcap", "devices.csv"]
    missing = [n for n in needed if not (root / n).is_file()]
    if missing:
        pytest.skip(f"{DATASET_ENV} lacks {', '.join(missing)}")
    return root


@pytest.fixture(scope="session")
def scenario_path():
    return str(DATA / "mesh_scenario.json")
