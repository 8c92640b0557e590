import math

import numpy as np
import pytest


def _pmf(n, p):
    return np.array([math.comb(n, k) * p**k * (1 - p) ** (n - k) for k in range(n + 1)])


def brute_pair(n, pz, pw):
    """O(n^2) double sums over the joint pmf: E min(Z, W) and Pr(Z<W) + Pr(Z=W)/2."""
    k = np.arange(n + 1)
    joint = np.outer(_pmf(n, pz), _pmf(n, pw))
    z, w = np.meshgrid(k, k, indexing="ij")
    emin = float(np.sum(np.minimum(z, w) * joint))
    a = float(np.sum(joint[z < w]) + 0.5 * np.sum(joint[z == w]))
    return emin, a


@pytest.fixture
def toy_sample():
    from predictivity.estimators import LabeledSample

    # two cases at x=1, two controls at x=0
    return LabeledSample([1, 1, -1, -1], [[1], [1], [0], [0]], ("x",))


ACCEPTANCE_LINES = []


@pytest.fixture
def verdict(capsys):
    """Record and print one PASS/FAIL line for an acceptance criterion."""

    def record(number, ok, detail):
        line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append(line)
        with capsys.disabled():
            print(f"\n{line}")
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
