import numpy as np
import pytest

from cochleanet.events import RawStream


def random_stream(rng, n_events=None, max_gap_us=500, channels=32):
    n = int(rng.integers(0, 400)) if n_events is None else n_events
    gaps = rng.integers(0, max_gap_us, size=n)
    ts = np.cumsum(gaps) + int(rng.integers(0, 10_000))
    ch = rng.integers(0, channels, size=n)
    return RawStream(ts, ch)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# -- acceptance summary ----------------------------------------------------

_CRITERIA: dict = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or (rep.when != "call" and not rep.failed):
        return
    entry = _CRITERIA.setdefault(mark.args[0], {"ok": True, "notes": []})
    if rep.failed:
        entry["ok"] = False
        msg = str(rep.longrepr.reprcrash.message) if hasattr(rep.longrepr, "reprcrash") else ""
        entry["notes"].append(f"{item.name}: {msg.splitlines()[0] if msg else 'failed'}")
    for key, value in rep.user_properties:
        if key == "detail":
            entry["notes"].append(str(value))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_CRITERIA):
        entry = _CRITERIA[num]
        status = "PASS" if entry["ok"] else "FAIL"
        notes = "; ".join(entry["notes"])
        terminalreporter.write_line(f"criterion {num}: {status}" + (f"  ({notes})" if notes else ""))
