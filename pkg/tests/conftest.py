import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from nash_align import Coefficients, GameSpec, solve_interior  # noqa: E402
from nash_align.sweep import CellClass, CellResult, SweepConfig, SweepGrid  # noqa: E402


def dominant_psd_matrix(rng, d, scale=1.0):
    """Symmetric, non-negative off-diagonals, diagonal = off-diagonal row sum."""
    g = rng.standard_normal((d, d))
    c = np.abs(g.T @ g / d) * scale
    np.fill_diagonal(c, 0.0)
    c = 0.5 * (c + c.T)
    np.fill_diagonal(c, c.sum(axis=1))
    return c


def random_psd(rng, d):
    g = rng.standard_normal((d, d))
    c = g.T @ g / d
    return 0.5 * (c + c.T)


def log_uniform(rng, lo=1e-2, hi=1e2):
    return float(np.exp(rng.uniform(np.log(lo), np.log(hi))))


def random_spec(rng, d=None, m=None, beta_range=(1e-2, 1e2)):
    d = int(rng.integers(2, 9)) if d is None else d
    m = int(rng.integers(2, 17)) if m is None else m
    c = dominant_psd_matrix(rng, d)
    a = rng.dirichlet(np.ones(d))
    betas = Coefficients(*(log_uniform(rng, *beta_range) for _ in range(3)))
    return GameSpec(c, a, m, betas)


def random_profile(rng, m, d, floor=0.0):
    w = rng.dirichlet(np.ones(d), size=m)
    if floor:
        w = (w + floor) / (1 + d * floor)
    return w


def crafted_no_interior(rng, d=3, m=3):
    """NoInterior instance whose potential is strictly concave, so its NE is unique.

    Needs 2 beta_i mu_min > beta_d; a skewed a with a large beta_a pushes the
    relaxed solution off the simplex.
    """
    while True:
        c = dominant_psd_matrix(rng, d)
        mu_min = np.linalg.eigvalsh(c)[0]
        if mu_min < 0.05:
            continue
        a = rng.dirichlet(np.full(d, 0.4))
        coeffs = Coefficients(float(rng.uniform(5, 20)), 1.0, float(min(1.0, mu_min)))
        spec = GameSpec(c, a, m, coeffs)
        if not solve_interior(spec).ok:
            return spec


def fixture_grid(rows):
    """Grid from strings, one character per cell: v(alid), x (excluded), i(nvalid)."""
    names = {"v": CellClass.VALID, "x": CellClass.EXCLUDED, "i": CellClass.INVALID}
    cells = [[CellResult(Coefficients(1, 1, 1), names[ch]) for ch in row] for row in rows]
    return SweepGrid(SweepConfig(resolution=len(rows)), cells)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def symmetric_spec():
    return GameSpec(np.zeros((2, 2)), [0.5, 0.5], 2, Coefficients(1, 1, 1))


# --- acceptance summary -----------------------------------------------------------

_CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


def pytest_runtest_makereport(item, call):
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    number, title = marker.args
    failed = call.excinfo is not None and not call.excinfo.errisinstance(pytest.skip.Exception)
    if call.when == "call" or failed:
        previous = _CRITERIA.get(number, (title, True, 0.0))
        passed = previous[1] and not failed
        duration = previous[2] + (call.duration if call.when == "call" else 0.0)
        _CRITERIA[number] = (title, passed, duration)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        title, passed, duration = _CRITERIA[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {title}  ({duration:.2f}s)")
