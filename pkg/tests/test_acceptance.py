"""Acceptance criteria 1-11, one test each, at their stated tolerances.

Each test prints a PASS/FAIL line for its criterion and the measured defect
of every sub-check. Run directly for a standalone report:

    python3 tests/test_acceptance.py
"""

import sys
import time

import pytest

from gtdyn.verify import CRITERIA


def _line(key, checks, seconds):
    ok = all(c.passed for c in checks)
    worst = max(checks, key=lambda c: (not c.passed, c.defect / c.threshold if c.threshold else 0.0))
    return ok, (
        f"{'PASS' if ok else 'FAIL'} criterion {key}: {len(checks)} checks, "
        f"tightest {worst.name} = {worst.defect:.3g} (threshold {worst.threshold:.3g}), {seconds:.1f}s"
    )


@pytest.mark.parametrize("key", list(CRITERIA))
def test_criterion(key, capsys):
    t0 = time.perf_counter()
    checks = CRITERIA[key]()
    ok, line = _line(key, checks, time.perf_counter() - t0)
    with capsys.disabled():
        print("\n" + line)
    failed = [f"{c.name}: {c.defect:.3g} vs {c.threshold:.3g} {c.detail}" for c in checks if not c.passed]
    assert ok, "\n".join(failed)


if __name__ == "__main__":
    all_ok = True
    for key, fn in CRITERIA.items():
        t0 = time.perf_counter()
        ok, line = _line(key, fn(), time.perf_counter() - t0)
        print(line, flush=True)
        all_ok &= ok
    sys.exit(0 if all_ok else 1)
