from __future__ import annotations

import numpy as np
import pytest
from hypothesis import assume, strategies as st

from pgrad.params import ProblemParams, critical_exponent_qc


@st.composite
def admissible_params(draw, n_max: int = 8):
    """Random (N, p, q) with N >= 2, p > 1, q > p - 1."""
    n = draw(st.integers(2, n_max))
    p = draw(st.floats(1.1, 6.0))
    q = draw(st.floats(p - 1.0 + 0.05, p + 3.0))
    return ProblemParams(n, p, q)


@st.composite
def subcritical_params(draw):
    """1 < p <= N and p - 1 < q < q_c, away from both ends."""
    n = draw(st.integers(2, 6))
    p = draw(st.floats(1.2, float(n)))
    qc = critical_exponent_qc(ProblemParams(n, p, p))
    frac = draw(st.floats(0.1, 0.9))
    params = ProblemParams(n, p, p - 1.0 + frac * (qc - p + 1.0))
    assume(params.gap >= 0.02)
    return params


@st.composite
def supercritical_below_p(draw):
    """1 < p < N and q_c < q < p."""
    n = draw(st.integers(3, 6))
    p = draw(st.floats(1.3, n - 0.2))
    qc = critical_exponent_qc(ProblemParams(n, p, p))
    frac = draw(st.floats(0.05, 0.95))
    return ProblemParams(n, p, qc + frac * (p - qc))


@pytest.fixture
def u_params():
    return ProblemParams(3, 2.0, 4.0 / 3.0)


@pytest.fixture
def v_params():
    return ProblemParams(4, 2.0, 1.5)


def rel_err(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return float(np.max(np.abs(a - b) / np.maximum(np.abs(b), 1e-300)))


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def criterion():
    """Record a PASS/FAIL line for an acceptance criterion; lines are repeated in the summary."""
    def record(number: int, passed: bool, detail: str) -> bool:
        line = f"CRITERION {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
        print(line)
        ACCEPTANCE_LINES.append(line)
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
