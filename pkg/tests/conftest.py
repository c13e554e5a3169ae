import datetime as dt

import pytest

UTC = dt.timezone.utc


def hourly(start: dt.datetime, values):
    """(timestamp, value) pairs at one-hour spacing."""
    return [(start + dt.timedelta(hours=i), v) for i, v in enumerate(values)]


@pytest.fixture
def t0():
    return dt.datetime(2020, 6, 1, 0, 0, tzinfo=UTC)


def write_config(path, body):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(body)
    return path


MINIMAL_CONFIG = """\
[site]
site_id = {site_id}
feature_set = {feature_set}

[allometry]
alpha = 0.45
beta = 2.02

[cv]
k = 5
repeats = 2
mtry_grid = 3,6,9
seed = {seed}

[forest]
n_trees = 40

[synth]
n_weeks = {n_weeks}
n_trees = 6
cloud_fraction = {cloud_fraction}
noise_sd = {noise_sd}
"""


def minimal_config(path, site_id="siteA", feature_set="s2", seed=7, n_weeks=20,
                   cloud_fraction=0.1, noise_sd=0.3):
    return write_config(
        path,
        MINIMAL_CONFIG.format(site_id=site_id, feature_set=feature_set, seed=seed,
                              n_weeks=n_weeks, cloud_fraction=cloud_fraction,
                              noise_sd=noise_sd),
    )


# -- acceptance reporting -----------------------------------------------------

_acceptance_outcomes: list[tuple[str, str]] = []


def pytest_runtest_logreport(report):
    if report.when != "call":
        return
    marker_name = getattr(report, "_acceptance_name", None)
    if marker_name:
        _acceptance_outcomes.append((marker_name, report.outcome))


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker and marker.args:
        report._acceptance_name = marker.args[0]


def pytest_terminal_summary(terminalreporter):
    if not _acceptance_outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for name, outcome in _acceptance_outcomes:
        status = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"{status}: {name}")
