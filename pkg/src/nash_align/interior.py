"""Closed-form interior equilibrium and the alpha-function machinery.

Relaxing the positivity constraint, every agent plays the same vector

    w* = B (beta_a a - lambda* 1),   B = (2 beta_i C + (M-1) beta_d I)^-1
    lambda* = (beta_a 1'Ba - 1) / 1'B1

which is an interior equilibrium iff all its components are positive. The
derivation also needs A = 2 beta_i C - beta_d I to be invertible and
alpha = 1'A^-1 1 to be non-zero; both fail only on finitely many ratios
beta_d / beta_i, located through the poles and roots of
f(beta) = sum_j q_j^2 / (2 mu_j - beta).
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .errors import PoleError
from .game import Coefficients, GameSpec, SpectralView

INTERIOR_FLOOR = 1e-12
SINGULARITY_TOL = 1e-10
RIDGE = 1e-8
POLE_TOL = 1e-12
# residues below this are treated as q_j = 0 (eigenvector orthogonal to 1)
RESIDUE_TOL = 1e-14


class Validity(str, enum.Enum):
    INTERIOR_VALID = "interior_valid"
    NO_INTERIOR = "no_interior"
    SINGULAR = "singular"


@dataclass
class EquilibriumResult:
    """Outcome of the closed-form solve.

    ``w_star`` is the relaxed solution (may contain non-positive entries when
    ``validity`` is NO_INTERIOR); it is None only for SINGULAR.
    """

    w_star: np.ndarray | None
    lambda_star: float
    validity: Validity
    min_weight: float = math.nan
    arg_min: int = -1
    singular_kind: str | None = None
    diagnostics: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.validity is Validity.INTERIOR_VALID

    def to_json(self) -> dict:
        out = {
            "validity": self.validity.value,
            "w": None if self.w_star is None else [float(x) for x in self.w_star],
            "lambda": _json_float(self.lambda_star),
            "alpha": _json_float(self.diagnostics.get("alpha", math.nan)),
            "ridge": float(self.diagnostics.get("ridge", 0.0)),
        }
        if self.validity is Validity.NO_INTERIOR:
            out["min_weight"] = float(self.min_weight)
            out["arg_min"] = int(self.arg_min)
        if self.singular_kind is not None:
            out["singular_kind"] = self.singular_kind
        return out


def _json_float(x):
    x = float(x)
    return x if math.isfinite(x) else None


def _singularity(spectral: SpectralView, beta_i: float, beta_d: float, m: int):
    """Return (kind, alpha, s-quantities) for the given coefficient pair."""
    a_eigs = 2.0 * beta_i * spectral.mu - beta_d
    b_eigs = 2.0 * beta_i * spectral.mu + (m - 1) * beta_d
    q2 = spectral.q ** 2
    if np.min(np.abs(a_eigs)) < SINGULARITY_TOL:
        return "a_singular", math.nan, math.nan
    alpha = float(np.sum(q2 / a_eigs))
    s2 = float(np.sum(q2 / (b_eigs * a_eigs)))
    if abs(alpha) < SINGULARITY_TOL:
        return "alpha_zero", alpha, s2
    return None, alpha, s2


def solve_interior(spec: GameSpec) -> EquilibriumResult:
    b = spec.coeffs
    spectral = spec.spectral
    ridge = 0.0
    kind, alpha, s2 = _singularity(spectral, b.beta_i, b.beta_d, spec.m)
    if kind is not None:
        ridge = RIDGE
        kind, alpha, s2 = _singularity(spectral, b.beta_i, b.beta_d + ridge, spec.m)
        if kind is not None:
            return EquilibriumResult(
                w_star=None,
                lambda_star=math.nan,
                validity=Validity.SINGULAR,
                singular_kind=kind,
                diagnostics={"alpha": alpha, "ridge": ridge},
            )
    beta_d = b.beta_d + ridge
    d = spec.d
    ones = np.ones(d)
    system = 2.0 * b.beta_i * spec.c + (spec.m - 1) * beta_d * np.eye(d)
    factor = cho_factor(system, lower=True)
    ba, b1 = cho_solve(factor, np.column_stack([spec.a, ones])).T
    s0 = b.beta_a * ba.sum()
    s1 = b1.sum()
    lam = (s0 - 1.0) / s1
    w = b.beta_a * ba - lam * b1

    b_eigs = 2.0 * b.beta_i * np.clip(spectral.mu, 0.0, None) + (spec.m - 1) * beta_d
    diagnostics = {
        "condition": float(b_eigs.max() / b_eigs.min()),
        "ridge": ridge,
        "alpha": alpha,
        "s0": float(s0),
        "s1": float(s1),
        "s2": s2,
    }
    arg_min = int(np.argmin(w))
    min_weight = float(w[arg_min])
    validity = Validity.INTERIOR_VALID if min_weight > INTERIOR_FLOOR else Validity.NO_INTERIOR
    return EquilibriumResult(
        w_star=w,
        lambda_star=float(lam),
        validity=validity,
        min_weight=min_weight,
        arg_min=arg_min,
        diagnostics=diagnostics,
    )


def solve_interior_at(spec: GameSpec, beta_a: float, beta_i: float, beta_d: float) -> EquilibriumResult:
    return solve_interior(spec.with_coeffs(Coefficients(beta_a, beta_i, beta_d)))


def _poles(spectral: SpectralView):
    """Distinct poles 2*mu_j with non-zero residue, merged when numerically equal."""
    q2 = spectral.q ** 2
    keep = q2 > RESIDUE_TOL * len(q2)
    locations = 2.0 * spectral.mu[keep]
    residues = q2[keep]
    order = np.argsort(locations)
    locations, residues = locations[order], residues[order]
    merged_loc, merged_res = [], []
    scale = max(1.0, float(np.max(np.abs(locations), initial=0.0)))
    for loc, res in zip(locations, residues):
        if merged_loc and loc - merged_loc[-1] <= 1e-12 * scale:
            merged_res[-1] += res
        else:
            merged_loc.append(float(loc))
            merged_res.append(float(res))
    return np.array(merged_loc), np.array(merged_res)


def _f(poles, residues, beta):
    beta = np.asarray(beta, dtype=float)
    return np.sum(residues / (poles - beta[..., None]), axis=-1)


def f_alpha(spec: GameSpec, beta_ratio: float) -> float:
    """f(beta) = sum_j q_j^2 / (2 mu_j - beta), so that beta_i * alpha = f(beta_d / beta_i)."""
    poles, residues = _poles(spec.spectral)
    gaps = np.abs(poles - beta_ratio)
    if gaps.size and gaps.min() < POLE_TOL:
        j = int(np.argmin(gaps))
        raise PoleError(
            f"beta ratio {beta_ratio!r} sits on the pole 2*mu = {poles[j]!r}", eigenvalue=poles[j] / 2.0
        )
    return float(_f(poles, residues, beta_ratio))


def f_alpha_many(spec: GameSpec, betas) -> np.ndarray:
    """Vectorised f without the pole check (values at a pole are +-inf or nan)."""
    poles, residues = _poles(spec.spectral)
    with np.errstate(divide="ignore", invalid="ignore"):
        return _f(poles, residues, betas)


def alpha_poles(spec: GameSpec) -> np.ndarray:
    return _poles(spec.spectral)[0]


def find_alpha_roots(spec: GameSpec, interval) -> list[float]:
    """All roots of f in ``[lo, hi]``.

    f is strictly increasing between consecutive poles, running from -inf just
    right of a pole to +inf just left of the next, so each sub-interval holds
    at most one root and bisection on a sign change finds it.
    """
    lo, hi = (float(x) for x in interval)
    if not lo > 0 or not hi > lo:
        raise ValueError(f"need 0 < lo < hi, got [{lo}, {hi}]")
    poles, residues = _poles(spec.spectral)
    inner = [p for p in poles if lo < p < hi]
    edges = [lo, *inner, hi]
    roots = []
    for left, right in zip(edges[:-1], edges[1:]):
        left_is_pole = left != lo or _is_pole(poles, left)
        right_is_pole = right != hi or _is_pole(poles, right)
        f_left = -math.inf if left_is_pole else float(_f(poles, residues, left))
        f_right = math.inf if right_is_pole else float(_f(poles, residues, right))
        if f_left == 0.0:
            roots.append(left)
            continue
        if not (f_left < 0.0 < f_right):
            if f_right == 0.0 and right == hi:
                roots.append(right)
            continue
        roots.append(_bisect(poles, residues, left, right))
    return roots


def _is_pole(poles, x):
    return bool(poles.size) and float(np.min(np.abs(poles - x))) < POLE_TOL


def _bisect(poles, residues, left, right):
    # f(left) < 0 < f(right); run to full floating-point resolution
    while True:
        mid = 0.5 * (left + right)
        if mid <= left or mid >= right:
            break
        value = float(_f(poles, residues, mid))
        if value == 0.0:
            return mid
        if value < 0.0:
            left = mid
        else:
            right = mid
    candidates = [x for x in (left, right) if not _is_pole(poles, x)]
    return min(candidates, key=lambda x: abs(float(_f(poles, residues, x))))
