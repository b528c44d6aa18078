"""Boundary equilibria through annealed logit-QRE.

For a temperature tau the loss

    L_tau(w) = sum_m eta_m * || P( grad_m u_m(w) - tau (log w_m + 1) ) ||^2,   P = I - 11'/D

vanishes exactly at the logit quantal response equilibrium. Driving tau to zero
while warm-starting each stage from the last tracks that equilibrium to a Nash
equilibrium, which may sit on the simplex boundary.

Iterates are stored as per-agent log-weights (``w_m = softmax(z_m)``). Near the
boundary the equilibrium weight of an excluded subpopulation is roughly
exp(-gap / tau), far below anything a clamped-log representation can hold, and
a clamp there biases the minimiser. In log coordinates ``log w`` stays exact
while ``w`` itself may underflow to zero. Steps are damped Gauss-Newton
(Levenberg-Marquardt) on the residuals ``sqrt(eta_m) P g_m``: with heavy damping
a step is a plain gradient step of length ``step_size``, and every accepted step
strictly lowers the loss.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .errors import DivergenceError, DomainError
from .game import GameSpec, _profile, entropy_grad_rows, homogeneous_profile, project_tangent, uniform_profile
from .interior import solve_interior
from .oracle import exploitability

INTERIOR_CLAMP = 1e-12


@dataclass(frozen=True)
class AnnealSchedule:
    tau0: float = 1.0
    decay: float = 0.5
    tau_min: float = 1e-5
    max_outer: int = 100
    inner_steps: int = 5000
    step_size: float = 1e-2
    grad_tol: float = 1e-8
    max_halvings: int = 30

    def __post_init__(self):
        if not (0.0 < self.tau_min < self.tau0):
            raise ValueError("need 0 < tau_min < tau0")
        if not (0.0 < self.decay < 1.0):
            raise ValueError("decay must lie in (0, 1)")
        if self.max_outer < 1 or self.inner_steps < 1 or self.max_halvings < 1:
            raise ValueError("iteration counts must be >= 1")
        if not (self.step_size > 0 and self.grad_tol > 0):
            raise ValueError("step_size and grad_tol must be positive")

    def taus(self) -> list[float]:
        out, tau = [], self.tau0
        while len(out) < self.max_outer:
            out.append(max(tau, self.tau_min))
            if tau <= self.tau_min:
                break
            tau *= self.decay
        return out


def project_simplex(v) -> np.ndarray:
    """Euclidean projection onto the probability simplex (sort-and-threshold)."""
    v = np.asarray(v, dtype=float)
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    ks = np.arange(1, v.size + 1)
    rho = np.nonzero(u - css / ks > 0)[0][-1]
    theta = css[rho] / (rho + 1.0)
    w = np.maximum(v - theta, 0.0)
    return w / w.sum()


@dataclass
class QreResult:
    profile: np.ndarray
    log_weights: np.ndarray
    loss: float
    losses: list[float]
    iterations: int
    converged: bool


@dataclass
class AnnealResult:
    profile: np.ndarray
    exploitability: float
    stages: list[dict] = field(default_factory=list)


def _weights(z: np.ndarray):
    log_w = z - logsumexp(z, axis=1, keepdims=True)
    return np.exp(log_w), log_w


def _residuals(spec, z, tau, sqrt_eta):
    w, log_w = _weights(z)
    r = sqrt_eta[:, None] * project_tangent(entropy_grad_rows(spec, w, tau, log_w=log_w))
    return r, w


def _jacobian(spec, w, tau, sqrt_eta):
    """d r / d z as an (M*D, M*D) matrix, rows agent-major."""
    m, d = w.shape
    b = spec.coeffs
    proj = np.eye(d) - 1.0 / d
    jac = np.empty((m * d, m * d))
    softmax_jac = [np.diag(w[k]) - np.outer(w[k], w[k]) for k in range(m)]
    cross = [-b.beta_d * proj @ s for s in softmax_jac]
    pc = proj @ spec.c
    for i in range(m):
        rows = slice(i * d, (i + 1) * d)
        for k in range(m):
            cols = slice(k * d, (k + 1) * d)
            if i == k:
                block = -2.0 * b.beta_i * pc @ softmax_jac[k] - tau * proj
            else:
                block = cross[k]
            jac[rows, cols] = sqrt_eta[i] * block
    return jac


def _descend(spec, z, tau, schedule, eta):
    sqrt_eta = np.sqrt(eta)
    r, w = _residuals(spec, z, tau, sqrt_eta)
    loss = float(np.sum(r * r))
    if not math.isfinite(loss):
        raise DivergenceError("QRE loss is not finite at the starting point; try a smaller step_size")
    losses = [loss]
    damping = 1.0 / schedule.step_size
    converged = False
    it = 0
    for it in range(1, schedule.inner_steps + 1):
        if math.sqrt(loss) <= schedule.grad_tol:
            converged = True
            it -= 1
            break
        jac = _jacobian(spec, w, tau, sqrt_eta)
        jtj = jac.T @ jac
        jtr = jac.T @ r.ravel()
        accepted = False
        saw_finite = False
        for _ in range(schedule.max_halvings):
            step = np.linalg.solve(jtj + damping * np.eye(jtj.shape[0]), -jtr)
            z_new = z + step.reshape(z.shape)
            z_new -= z_new.max(axis=1, keepdims=True)
            r_new, w_new = _residuals(spec, z_new, tau, sqrt_eta)
            loss_new = float(np.sum(r_new * r_new))
            if math.isfinite(loss_new):
                saw_finite = True
                if loss_new < loss:
                    z, r, w, loss = z_new, r_new, w_new, loss_new
                    damping = max(damping / 3.0, 1e-12)
                    accepted = True
                    break
            damping *= 2.0
        if not accepted:
            if not saw_finite:
                raise DivergenceError("QRE loss overflowed on every trial step; try a smaller step_size")
            # no descent left at floating-point resolution
            break
        losses.append(loss)
    else:
        converged = math.sqrt(loss) <= schedule.grad_tol
    return z, w, loss, losses, it, converged


def _initial_logits(spec, init) -> np.ndarray:
    w = _profile(spec, init)
    if np.any(w < 0) or np.max(np.abs(w.sum(axis=1) - 1.0)) > 1e-9:
        raise DomainError("initial profile must lie on the simplex")
    return np.log(np.maximum(w, INTERIOR_CLAMP))


def solve_qre(spec: GameSpec, tau: float, init=None, schedule: AnnealSchedule = AnnealSchedule(), eta=None) -> QreResult:
    """Minimise L_tau from ``init`` (defaults to the uniform profile)."""
    if not tau > 0:
        raise ValueError("tau must be positive")
    eta = np.ones(spec.m) if eta is None else np.asarray(eta, dtype=float)
    z = _initial_logits(spec, uniform_profile(spec) if init is None else init)
    z, w, loss, losses, iters, converged = _descend(spec, z, tau, schedule, eta)
    return QreResult(profile=w, log_weights=z, loss=loss, losses=losses, iterations=iters, converged=converged)


def warm_start(spec: GameSpec) -> np.ndarray:
    """Positive part of the relaxed closed-form solution, or uniform when there is none."""
    result = solve_interior(spec)
    if result.w_star is None:
        return uniform_profile(spec)
    pos = np.maximum(result.w_star, 0.0)
    if not pos.sum() > 0:
        return uniform_profile(spec)
    return homogeneous_profile(pos / pos.sum(), spec.m)


def anneal_to_nash(
    spec: GameSpec, schedule: AnnealSchedule = AnnealSchedule(), init=None, eta=None, on_stage=None
) -> AnnealResult:
    """Follow the logit-QRE from ``tau0`` down to ``tau_min``.

    ``on_stage`` receives each stage record ``{"tau", "loss", "exploitability", "iters"}``.
    """
    eta = np.ones(spec.m) if eta is None else np.asarray(eta, dtype=float)
    z = _initial_logits(spec, warm_start(spec) if init is None else init)
    stages = []
    w = None
    for tau in schedule.taus():
        z, w, loss, _, iters, _ = _descend(spec, z, tau, schedule, eta)
        record = {"tau": tau, "loss": loss, "exploitability": exploitability(spec, w), "iters": iters}
        stages.append(record)
        if on_stage is not None:
            on_stage(record)
    return AnnealResult(profile=w, exploitability=stages[-1]["exploitability"], stages=stages)
