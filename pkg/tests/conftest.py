"""Shared fixtures and the session-wide metric recorder.

Every ``MetricBundle`` built anywhere during the session is recorded so the
conditioning chain ``c_inf <= kappa_2 <= kappa_fro`` and ``kappa_fro >= n``
can be checked over all runs, not only the ones a single test inspects.
"""

import numpy as np
import pytest

from moorepp import conditioning

RECORDED = []

#: acceptance criterion number -> (passed, detail)
ACCEPTANCE = {}

_original_init = conditioning.MetricBundle.__init__


def _recording_init(self, *args, **kwargs):
    _original_init(self, *args, **kwargs)
    RECORDED.append(self)


conditioning.MetricBundle.__init__ = _recording_init


def chain_violations(bundles, rtol=1e-9):
    """Bundles with finite metrics that break the chain inequality."""
    bad = []
    for b in bundles:
        if not np.isfinite(b.kappa_fro):
            continue
        if not b.chain_ok(rtol):
            bad.append(b)
    return bad


def record_acceptance(number, passed, detail):
    ACCEPTANCE[number] = (bool(passed), detail)
    print(f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}")


def pytest_sessionfinish(session, exitstatus):
    bad = chain_violations(RECORDED)
    if bad and session.exitstatus == 0:
        session.exitstatus = 1


def pytest_terminal_summary(terminalreporter):
    bad = chain_violations(RECORDED)
    terminalreporter.write_line(f"conditioning chain over the whole session: "
                                f"{len(RECORDED)} bundles, {len(bad)} violations")
    if not ACCEPTANCE:
        return
    ACCEPTANCE[3] = (not bad, f"whole session: {len(RECORDED)} bundles, "
                              f"{len(bad)} chain violations")
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def random_pair(rng, n, m):
    A = rng.uniform(-2, 2, (n, n))
    B = rng.uniform(-2, 2, (n, m))
    return A, B


def random_spectrum(rng, n, pairs=None):
    """Distinct self-conjugate values in the box [-2, 2] x [-2, 2]."""
    if pairs is None:
        pairs = int(rng.integers(0, n // 2 + 1))
    vals = []
    for _ in range(pairs):
        z = complex(rng.uniform(-2, 2), rng.uniform(0.1, 2))
        vals += [z, z.conjugate()]
    while len(vals) < n:
        vals.append(complex(rng.uniform(-2, 2), 0.0))
    return vals
