"""Game types and per-agent utility machinery.

Each of the ``m`` agents picks a weight vector ``w_m`` on the D-simplex and earns

    u_m = beta_a * a.w_m - beta_i * w_m' C w_m - beta_d * sum_{j != m} <w_m, w_j>

Profiles are plain ``(m, d)`` float arrays, one row per agent.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import DomainError, ShapeError

PSD_TOL = 1e-9


@dataclass(frozen=True)
class Coefficients:
    """Attractiveness, inconsistency and diversity weights."""

    beta_a: float
    beta_i: float
    beta_d: float

    def __post_init__(self):
        for name in ("beta_a", "beta_i", "beta_d"):
            value = float(getattr(self, name))
            if not math.isfinite(value) or value <= 0.0:
                raise ValueError(f"{name} must be positive and finite, got {value!r}")
            object.__setattr__(self, name, value)

    def scaled(self, factor: float) -> "Coefficients":
        return Coefficients(self.beta_a * factor, self.beta_i * factor, self.beta_d * factor)

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.beta_a, self.beta_i, self.beta_d)


@dataclass(frozen=True)
class SpectralView:
    """Eigendecomposition ``C = Q diag(mu) Q'`` and ``q = Q' 1``."""

    mu: np.ndarray
    q: np.ndarray
    vectors: np.ndarray

    @classmethod
    def of(cls, c: np.ndarray) -> "SpectralView":
        mu, vectors = np.linalg.eigh(c)
        q = vectors.T @ np.ones(c.shape[0])
        for arr in (mu, q, vectors):
            arr.setflags(write=False)
        return cls(mu=mu, q=q, vectors=vectors)


@dataclass(frozen=True, eq=False)
class GameSpec:
    """A complete game instance.

    ``c`` must be exactly symmetric and PSD (min eigenvalue >= -1e-9); ``a`` must be
    non-negative. Arrays are copied and frozen on construction.
    """

    c: np.ndarray
    a: np.ndarray
    m: int
    coeffs: Coefficients

    def __post_init__(self):
        c = np.array(self.c, dtype=float)
        a = np.array(self.a, dtype=float)
        if c.ndim != 2 or c.shape[0] != c.shape[1]:
            raise ShapeError(f"c must be square, got shape {c.shape}")
        d = c.shape[0]
        if d < 2:
            raise ShapeError("need at least two subpopulations")
        if a.shape != (d,):
            raise ShapeError(f"a has shape {a.shape}, expected ({d},)")
        if int(self.m) != self.m or self.m < 2:
            raise ValueError(f"agent count must be an integer >= 2, got {self.m!r}")
        if not (np.all(np.isfinite(c)) and np.all(np.isfinite(a))):
            raise ValueError("c and a must be finite")
        if not np.array_equal(c, c.T):
            raise ValueError("c must be exactly symmetric")
        if np.any(a < 0):
            raise ValueError("a must be non-negative")
        c.setflags(write=False)
        a.setflags(write=False)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "m", int(self.m))
        if self.spectral.mu[0] < -PSD_TOL:
            raise ValueError(f"c is not PSD: min eigenvalue {self.spectral.mu[0]:.3e}")

    @property
    def d(self) -> int:
        return self.c.shape[0]

    @cached_property
    def spectral(self) -> SpectralView:
        return SpectralView.of(self.c)

    def with_coeffs(self, coeffs: Coefficients) -> "GameSpec":
        """Same C, a and M under new coefficients; the eigendecomposition is reused."""
        clone = object.__new__(GameSpec)
        for f in dataclasses.fields(self):
            object.__setattr__(clone, f.name, getattr(self, f.name))
        object.__setattr__(clone, "coeffs", coeffs)
        clone.__dict__["spectral"] = self.spectral
        return clone

    def with_agents(self, m: int) -> "GameSpec":
        return dataclasses.replace(self, m=m)


@dataclass(frozen=True)
class QreParams:
    tau: float
    eta: np.ndarray | None = None

    def __post_init__(self):
        if not (self.tau > 0 and math.isfinite(self.tau)):
            raise ValueError("tau must be positive")
        if self.eta is not None:
            eta = np.array(self.eta, dtype=float)
            if np.any(eta <= 0):
                raise ValueError("eta entries must be positive")
            object.__setattr__(self, "eta", eta)

    def weights(self, m: int) -> np.ndarray:
        if self.eta is None:
            return np.ones(m)
        if self.eta.shape != (m,):
            raise ShapeError(f"eta has shape {self.eta.shape}, expected ({m},)")
        return self.eta


def _profile(spec: GameSpec, w) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    if w.shape != (spec.m, spec.d):
        raise ShapeError(f"profile has shape {w.shape}, expected ({spec.m}, {spec.d})")
    return w


def _agent(spec: GameSpec, agent: int) -> int:
    if not 0 <= agent < spec.m:
        raise IndexError(f"agent {agent} out of range for {spec.m} agents")
    return agent


def check_profile(spec: GameSpec, w, tol: float = 1e-12) -> np.ndarray:
    """Validate shape and simplex membership of every row; returns the array."""
    w = _profile(spec, w)
    if np.any(w < 0):
        raise DomainError("profile has negative weights")
    if np.max(np.abs(w.sum(axis=1) - 1.0)) > tol:
        raise DomainError("profile rows must sum to 1")
    return w


def uniform_profile(spec: GameSpec) -> np.ndarray:
    return np.full((spec.m, spec.d), 1.0 / spec.d)


def homogeneous_profile(w, m: int) -> np.ndarray:
    """Stack one strategy vector ``m`` times."""
    return np.tile(np.asarray(w, dtype=float), (m, 1))


def eval_utility(spec: GameSpec, w, agent: int) -> float:
    w = _profile(spec, w)
    k = _agent(spec, agent)
    b = spec.coeffs
    wm = w[k]
    others = w.sum(axis=0) - wm
    return float(b.beta_a * spec.a @ wm - b.beta_i * wm @ spec.c @ wm - b.beta_d * wm @ others)


def _grad_rows(spec: GameSpec, w: np.ndarray) -> np.ndarray:
    b = spec.coeffs
    others = w.sum(axis=0)[None, :] - w
    return b.beta_a * spec.a[None, :] - 2.0 * b.beta_i * w @ spec.c - b.beta_d * others


def grad_utility(spec: GameSpec, w, agent: int) -> np.ndarray:
    """Gradient of ``eval_utility`` with respect to the agent's own weights."""
    w = _profile(spec, w)
    k = _agent(spec, agent)
    b = spec.coeffs
    others = w.sum(axis=0) - w[k]
    return b.beta_a * spec.a - 2.0 * b.beta_i * spec.c @ w[k] - b.beta_d * others


def project_tangent(v) -> np.ndarray:
    """Remove the mean: orthogonal projection onto ``{x : sum(x) = 0}``.

    Works row-wise on 2-D input.
    """
    v = np.asarray(v, dtype=float)
    return v - v.mean(axis=-1, keepdims=True)


def _require_interior(w: np.ndarray) -> None:
    if not np.all(w > 0):
        raise DomainError("entropy terms need strictly positive weights")


def entropy_grad_utility(spec: GameSpec, w, agent: int, qre: QreParams) -> np.ndarray:
    w = _profile(spec, w)
    k = _agent(spec, agent)
    _require_interior(w[k])
    return grad_utility(spec, w, k) - qre.tau * (np.log(w[k]) + 1.0)


def entropy_grad_rows(spec: GameSpec, w: np.ndarray, tau: float, log_w: np.ndarray | None = None) -> np.ndarray:
    """All agents' entropy-augmented gradients at once.

    ``log_w`` may be supplied when the caller tracks log-weights directly (the
    boundary solver does, so that underflowed weights keep a finite log).
    """
    if log_w is None:
        _require_interior(w)
        log_w = np.log(w)
    return _grad_rows(spec, w) - tau * (log_w + 1.0)


def qre_loss(spec: GameSpec, w, qre: QreParams) -> float:
    """Weighted sum of squared projected entropy-augmented gradients.

    Zero exactly at a logit quantal response equilibrium with temperature ``qre.tau``.
    """
    w = _profile(spec, w)
    _require_interior(w)
    eta = qre.weights(spec.m)
    p = project_tangent(entropy_grad_rows(spec, w, qre.tau))
    return float(np.sum(eta * np.sum(p * p, axis=1)))
