"""Nash equilibria of the subpopulation-alignment game and exclusion maps over incentive sweeps."""

__version__ = "0.1.0"

from .boundary import AnnealResult, AnnealSchedule, QreResult, anneal_to_nash, project_simplex, solve_qre
from .dataprep import (
    ProbabilityTable,
    PsdReport,
    Psi,
    build_attractiveness_from_alignment,
    build_attractiveness_from_shares,
    build_inconsistency,
    mixture_prob,
    validate_psd,
)
from .errors import (
    ConfigurationError,
    DivergenceError,
    DomainError,
    EmptyTableError,
    NashAlignError,
    ParseError,
    PoleError,
    ShapeError,
)
from .game import (
    Coefficients,
    GameSpec,
    QreParams,
    SpectralView,
    check_profile,
    entropy_grad_utility,
    eval_utility,
    grad_utility,
    homogeneous_profile,
    project_tangent,
    qre_loss,
    uniform_profile,
)
from .interior import EquilibriumResult, Validity, f_alpha, find_alpha_roots, solve_interior
from .oracle import BestResponse, best_response_exact, br_dynamics, exploitability
from .render import render_heatmap
from .sweep import CellClass, ExclusionMetrics, SweepConfig, SweepGrid, aggregate_metrics, classify_cell, exclusion_metrics, run_sweep
