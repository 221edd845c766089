import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

# criterion number -> (title, status, detail); filled by test_acceptance.py
ACCEPTANCE = {}


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    num = getattr(item.function, "criterion", None)
    if num is None:
        return
    title = item.function.criterion_title
    detail = ACCEPTANCE.get(num, (None, None, ""))[2]
    if rep.when == "call":
        if rep.passed:
            status = "PASS"
        elif hasattr(rep, "wasxfail"):
            status = "FAIL"
            detail = detail or str(rep.wasxfail)
        else:
            status = "FAIL"
        ACCEPTANCE[num] = (title, status, detail)
    elif rep.when == "setup" and rep.skipped:
        ACCEPTANCE[num] = (title, "SKIP", str(rep.longrepr[-1]) if isinstance(rep.longrepr, tuple) else "")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for num in sorted(ACCEPTANCE):
        title, status, detail = ACCEPTANCE[num]
        tr.write_line(f"criterion {num:>2}  {status:4}  {title}" + (f"  [{detail}]" if detail else ""))
