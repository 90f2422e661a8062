"""Shared fixtures and the acceptance-criterion summary reporter."""

import re

import numpy as np
import pytest

import evtcvar as ec


@pytest.fixture(scope="session", autouse=True)
def _warm_kernels():
    """Touch the compiled kernels once so JIT time never lands inside a
    timed assertion."""
    z = np.sort(np.linspace(0.1, 2.0, 50))
    ec._kernels.fit_gpd_core(z)
    ec._kernels.evt_estimate_core(z, 0.9, 10, 0.1, 10, 30)
    ec._kernels.ad_pvalue_core(1.0, 0.2)
    ec._kernels.forward_stop_core(np.array([0.5]), 0.1)
    ec._kernels.norm_ppf_vec(np.array([0.5]))
    yield


_CRITERION_RE = re.compile(r"test_c(\d+)_?(\w*)")


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """One pass/fail line per acceptance criterion at the end of the run."""
    lines = {}
    for outcome in ("passed", "failed", "error"):
        for report in terminalreporter.stats.get(outcome, []):
            nodeid = getattr(report, "nodeid", "")
            if "test_acceptance" not in nodeid:
                continue
            name = nodeid.split("::")[-1]
            match = _CRITERION_RE.match(name)
            if not match:
                continue
            num = int(match.group(1))
            verdict = "PASS" if outcome == "passed" else "FAIL"
            # a criterion spanning several tests fails if any part fails
            if num in lines and lines[num][1] == "FAIL":
                continue
            lines[num] = (name, verdict)
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(lines):
        name, verdict = lines[num]
        terminalreporter.write_line(f"criterion {num:>2} [{name}]: {verdict}")
