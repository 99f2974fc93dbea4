import time
from contextlib import contextmanager

import pytest

# criterion id -> (passed, detail); filled by the acceptance tests
ACCEPTANCE = {}


@contextmanager
def _criterion(cid, budget_s):
    """Time a block, record pass/fail for ``cid``, and enforce its runtime budget."""
    t0 = time.perf_counter()
    detail = {}
    try:
        yield detail
        elapsed = time.perf_counter() - t0
        detail["runtime_s"] = round(elapsed, 2)
        assert elapsed < budget_s, f"{cid} took {elapsed:.1f} s, budget {budget_s} s"
    except BaseException as exc:
        detail.setdefault("runtime_s", round(time.perf_counter() - t0, 2))
        ACCEPTANCE[cid] = (False, detail, f"{type(exc).__name__}: {exc}".splitlines()[0])
        print(f"\n{cid} FAIL {detail}")
        raise
    ACCEPTANCE[cid] = (True, detail, "")
    print(f"\n{cid} PASS {detail}")


@pytest.fixture
def criterion():
    return _criterion


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for cid in sorted(ACCEPTANCE):
        ok, detail, why = ACCEPTANCE[cid]
        line = f"{cid} {'PASS' if ok else 'FAIL'} {detail}"
        terminalreporter.write_line(line + (f"  ({why})" if why else ""))
