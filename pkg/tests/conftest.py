import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from dpmseg import field  # noqa: E402
import oracles  # noqa: E402


@pytest.fixture(scope="session")
def circle_fb():
    """Field bundle for the canonical r=50 circle on a 256^2 grid."""
    mask, center = oracles.circle_mask(50.0)
    return field.build_dynamic(mask), mask, center


@pytest.fixture(scope="session")
def circle_small():
    """r=40 circle on 128^2, cheaper for rollout-heavy tests."""
    mask, center = oracles.circle_mask(40.0, n=128)
    return field.build_dynamic(mask), mask, center


def rng_masks(count, size, seed, p=0.5):
    """Random two-class masks, re-drawn until both classes appear."""
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < count:
        m = (rng.random((size, size)) < p).astype(np.uint8)
        if 0 < m.sum() < m.size:
            out.append(m)
    return out


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """One PASS/FAIL line per acceptance criterion at the end of the run."""
    import re

    pat = re.compile(r"test_acceptance\.py::test_criterion_(\d+)")
    rows = {}
    for outcome, label in (("passed", "PASS"), ("failed", "FAIL"),
                           ("error", "FAIL"), ("skipped", "SKIP")):
        for rep in terminalreporter.stats.get(outcome, []):
            m = pat.search(getattr(rep, "nodeid", ""))
            if m:
                rows[int(m.group(1))] = label
    if rows:
        terminalreporter.write_sep("-", "acceptance criteria")
        for k in sorted(rows):
            terminalreporter.write_line(f"criterion {k}: {rows[k]}")
