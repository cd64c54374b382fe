import numpy as np
import pytest

from strang_ac.spectral import Field


def random_fourier_field(grid, rng, max_abs, n_modes=6):
    """Random real trigonometric polynomial rescaled to the given max norm."""
    shape = grid.shape
    coef = np.zeros(shape, dtype=complex)
    idx = tuple(slice(0, n_modes) for _ in shape)
    coef[idx] = rng.standard_normal(coef[idx].shape) + 1j * rng.standard_normal(coef[idx].shape)
    values = np.fft.ifftn(coef).real
    values += rng.uniform(-0.2, 0.2) * np.max(np.abs(values))
    values *= max_abs / np.max(np.abs(values))
    return Field(grid, values)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def fourier_field():
    return random_fourier_field


# Acceptance criteria report: tests marked ``criterion(key, title)`` are
# summarised as one PASS/FAIL/SKIP line per key at the end of the session.

_CRITERIA: dict = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    if rep.when != "call" and rep.passed:
        return
    key, title = marker.args
    entry = _CRITERIA.setdefault(key, {"title": title, "outcomes": [], "details": []})
    entry["outcomes"].append("skipped" if rep.skipped else rep.outcome)
    entry["details"].extend(v for k, v in item.user_properties if k == "detail")


def _status(outcomes):
    if "failed" in outcomes:
        return "FAIL"
    if all(o == "skipped" for o in outcomes):
        return "SKIP"
    return "PASS"


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_CRITERIA, key=lambda k: (len(k), k)):
        entry = _CRITERIA[key]
        detail = "; ".join(entry["details"])
        line = f"{_status(entry['outcomes'])}  criterion {key}: {entry['title']}"
        terminalreporter.write_line(line + (f" ({detail})" if detail else ""))
