import numpy as np
import pytest

import cfsurv.embedding as embedding
from cfsurv import RightCensoredSample

RESIDUAL_TOL = 1e-8


class ResidualLog:
    def __init__(self):
        self.checked = 0
        self.worst = 0.0


RESIDUALS = ResidualLog()


def _checked(solver):
    def wrapper(w, k, ne):
        m = solver(w, k, ne)
        # probe H = I covers every H: (WK + n eps I) M H - W H = ((WK + n eps I) M - W) H
        r = (w[:, None] * k + ne * np.eye(w.shape[0])) @ m - np.diag(w)
        rel = float(np.max(np.abs(r))) / (1.0 + float(np.max(np.abs(w))))
        RESIDUALS.checked += 1
        RESIDUALS.worst = max(RESIDUALS.worst, rel)
        assert rel <= RESIDUAL_TOL, f"representer residual {rel:.3e} exceeds {RESIDUAL_TOL}"
        return m

    return wrapper


@pytest.fixture(autouse=True, scope="session")
def representer_residual_guard():
    """Check the linear-system residual of every ridge fit made by the suite."""
    mp = pytest.MonkeyPatch()
    mp.setattr(embedding, "_solve_general", _checked(embedding._solve_general))
    mp.setattr(embedding, "_solve_symmetric", _checked(embedding._solve_symmetric))
    yield RESIDUALS
    mp.undo()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def three_obs():
    return RightCensoredSample.from_arrays([2.0, 3.0, 5.0], [1, 0, 1], [[0.0], [1.0], [2.0]])


def pytest_terminal_summary(terminalreporter):
    from helpers import ACCEPTANCE

    tr = terminalreporter
    if RESIDUALS.checked:
        tr.write_line(f"representer residual guard: {RESIDUALS.checked} fits checked, "
                      f"worst relative residual {RESIDUALS.worst:.2e} (limit {RESIDUAL_TOL:g})")
    if not ACCEPTANCE:
        return
    tr.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: (isinstance(k, str), k)):
        parts = ACCEPTANCE[key]
        ok = all(p for _, p, _ in parts)
        detail = "; ".join(f"{label}: {'pass' if p else 'FAIL'} ({d})" for label, p, d in parts)
        tr.write_line(f"criterion {key}: {'PASS' if ok else 'FAIL'} - {detail}")
