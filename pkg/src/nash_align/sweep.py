"""Log-scaled two-coefficient sweeps and exclusion metrics.

One coefficient is held fixed; the other two span a ``resolution x resolution``
log grid. Row ``i`` of the grid follows the y coefficient, column ``j`` the x
coefficient, where (x, y) are the two free coefficients in the order
beta_a, beta_i, beta_d.
"""
from __future__ import annotations

import enum
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .game import Coefficients, GameSpec
from .interior import EquilibriumResult, Validity, solve_interior

COEFFICIENTS = ("beta_a", "beta_i", "beta_d")


class CellClass(str, enum.Enum):
    VALID = "valid"
    EXCLUDED = "excluded"
    INVALID = "invalid"


@dataclass(frozen=True)
class SweepConfig:
    fixed: str = "beta_d"
    fixed_value: float = 1.0
    range_x: tuple[float, float] = (1e-2, 1e2)
    range_y: tuple[float, float] = (1e-2, 1e2)
    resolution: int = 200
    threshold: float = 0.05
    focal: int | None = None

    def __post_init__(self):
        if self.fixed not in COEFFICIENTS:
            raise ValueError(f"fixed must be one of {COEFFICIENTS}, got {self.fixed!r}")
        if not self.fixed_value > 0:
            raise ValueError("fixed_value must be positive")
        for name in ("range_x", "range_y"):
            lo, hi = getattr(self, name)
            if not (0 < lo < hi and math.isfinite(hi)):
                raise ValueError(f"{name} must satisfy 0 < lo < hi, got ({lo}, {hi})")
            object.__setattr__(self, name, (float(lo), float(hi)))
        if int(self.resolution) != self.resolution or self.resolution < 2:
            raise ValueError("resolution must be an integer >= 2")
        if not 0 < self.threshold < 1:
            raise ValueError("threshold must lie in (0, 1)")

    @property
    def axes(self) -> tuple[str, str]:
        free = [c for c in COEFFICIENTS if c != self.fixed]
        return free[0], free[1]

    def axis_values(self, which: str) -> np.ndarray:
        lo, hi = self.range_x if which == "x" else self.range_y
        step = (math.log(hi) - math.log(lo)) / (self.resolution - 1)
        return np.exp(math.log(lo) + np.arange(self.resolution) * step)

    def coefficients(self, x: float, y: float) -> Coefficients:
        values = {self.fixed: self.fixed_value}
        ax, ay = self.axes
        values[ax] = x
        values[ay] = y
        return Coefficients(**values)


@dataclass(frozen=True)
class CellResult:
    betas: Coefficients
    cls: CellClass
    weights: np.ndarray | None = None
    excluded: frozenset = frozenset()
    note: str | None = None


@dataclass(frozen=True)
class ExclusionMetrics:
    exclusion_frac: float
    invalid_frac: float
    conditional_exclusion: float
    conditional_defined: bool = True

    def to_json(self) -> dict:
        return {
            "exclusion": _sig12(self.exclusion_frac),
            "invalid": _sig12(self.invalid_frac),
            "conditional_exclusion": _sig12(self.conditional_exclusion),
            "conditional_defined": self.conditional_defined,
        }


def _sig12(x: float) -> float:
    return float(f"{x:.12g}")


@dataclass
class SweepGrid:
    config: SweepConfig
    cells: list[list[CellResult]]
    metrics: ExclusionMetrics | None = field(default=None)

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.cells), len(self.cells[0]) if self.cells else 0

    def counts(self) -> dict[CellClass, int]:
        out = {c: 0 for c in CellClass}
        for row in self.cells:
            for cell in row:
                out[cell.cls] += 1
        return out

    def classes(self) -> np.ndarray:
        return np.array([[cell.cls.value for cell in row] for row in self.cells])


def classify_cell(result: EquilibriumResult, threshold: float, focal: int | None = None):
    """Return ``(class, excluded_set)``; exclusion is a strict ``weight < threshold``."""
    if not 0 < threshold < 1:
        raise ValueError("threshold must lie in (0, 1)")
    if result.validity is not Validity.INTERIOR_VALID:
        return CellClass.INVALID, frozenset()
    w = result.w_star
    if focal is not None:
        below = {focal} if w[focal] < threshold else set()
    else:
        below = {int(i) for i in np.flatnonzero(w < threshold)}
    if below:
        return CellClass.EXCLUDED, frozenset(below)
    return CellClass.VALID, frozenset()


def _cell(spec: GameSpec, config: SweepConfig, x: float, y: float) -> CellResult:
    betas = config.coefficients(x, y)
    result = solve_interior(spec.with_coeffs(betas))
    cls, excluded = classify_cell(result, config.threshold, config.focal)
    note = None
    if result.validity is Validity.SINGULAR:
        note = f"singular:{result.singular_kind}"
    weights = result.w_star if cls is not CellClass.INVALID else None
    return CellResult(betas=betas, cls=cls, weights=weights, excluded=excluded, note=note)


def _rows(args):
    spec, config, row_indices = args
    xs, ys = config.axis_values("x"), config.axis_values("y")
    return [[_cell(spec, config, x, ys[i]) for x in xs] for i in row_indices]


def run_sweep(spec: GameSpec, config: SweepConfig, jobs: int = 1) -> SweepGrid:
    """Classify every grid cell; ``spec.coeffs`` is ignored (each cell sets its own).

    Output is independent of ``jobs``: rows are reassembled by index.
    """
    if config.focal is not None and not 0 <= config.focal < spec.d:
        raise ValueError(f"focal subpopulation {config.focal} out of range")
    spec.spectral  # decompose once, before any fan-out
    res = config.resolution
    if jobs <= 1:
        cells = _rows((spec, config, range(res)))
    else:
        chunks = [list(range(res))[k::jobs] for k in range(jobs)]
        cells = [None] * res
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for chunk, rows in zip(chunks, pool.map(_rows, [(spec, config, c) for c in chunks])):
                for i, row in zip(chunk, rows):
                    cells[i] = row
    grid = SweepGrid(config=config, cells=cells)
    grid.metrics = exclusion_metrics(grid)
    return grid


def _metrics_from_counts(n_excluded: int, n_invalid: int, n_total: int) -> ExclusionMetrics:
    exclusion = n_excluded / n_total
    invalid = n_invalid / n_total
    if n_invalid < n_total:
        # exclusion / (1 - invalid) computed from counts to stay exact
        return ExclusionMetrics(exclusion, invalid, n_excluded / (n_total - n_invalid), True)
    return ExclusionMetrics(exclusion, invalid, 0.0, False)


def exclusion_metrics(grid: SweepGrid) -> ExclusionMetrics:
    counts = grid.counts()
    total = sum(counts.values())
    if total == 0:
        raise ValueError("grid has no cells")
    return _metrics_from_counts(counts[CellClass.EXCLUDED], counts[CellClass.INVALID], total)


def aggregate_metrics(grids) -> ExclusionMetrics:
    """Pool cell counts across grids, then take fractions (count-weighted)."""
    grids = list(grids)
    if not grids:
        raise ValueError("need at least one grid")
    shapes = {g.shape for g in grids}
    if len(shapes) != 1:
        raise ValueError(f"grids have different resolutions: {sorted(shapes)}")
    excluded = invalid = total = 0
    for g in grids:
        counts = g.counts()
        excluded += counts[CellClass.EXCLUDED]
        invalid += counts[CellClass.INVALID]
        total += sum(counts.values())
    return _metrics_from_counts(excluded, invalid, total)
