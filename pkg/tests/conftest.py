import sys
import warnings
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from opinion_game.nash import assemble_game  # noqa: E402
from opinion_game.scenarios import reference_grid  # noqa: E402

_VERDICTS: dict[str, tuple[str, str, list]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(cid, text): acceptance criterion check")


@pytest.fixture(scope="session")
def grid():
    """{(stubbornness, coupled, r_w): (scenario, game)} over the reference sweep."""
    out = {}
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for key, s in reference_grid():
            out[key] = (s, assemble_game(s))
    return out


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("acceptance")
    if mark is None or rep.when != "call":
        return
    cid, text = mark.args
    status = "PASS" if rep.passed else "FAIL"
    details = [f"{k}: {v}" for k, v in item.user_properties]
    prev = _VERDICTS.get(cid)
    if prev is not None and prev[0] == "FAIL":
        status = "FAIL"
        details = prev[2] + details
    _VERDICTS[cid] = (status, text, details)


def _order(cid: str):
    num = "".join(ch for ch in cid if ch.isdigit())
    return int(num), cid


def pytest_terminal_summary(terminalreporter):
    if not _VERDICTS:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for cid in sorted(_VERDICTS, key=_order):
        status, text, details = _VERDICTS[cid]
        tr.write_line(f"{status} [{cid}] {text}")
        for d in details:
            tr.write_line(f"        {d}")
