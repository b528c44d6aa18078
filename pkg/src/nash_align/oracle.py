"""Exact best responses by support enumeration, exploitability, best-response dynamics.

An agent's problem is a concave quadratic over the simplex,

    max_w  lin'w - beta_i w'Cw,    lin = beta_a a - beta_d * (sum of the other agents),

so KKT is necessary and sufficient and one of the 2^D - 1 supports carries the
global maximiser. This is deliberately brute force and independent of both
solvers; it is only meant for D up to about 20.
"""
from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .game import GameSpec, _agent, _profile, eval_utility

log = logging.getLogger(__name__)

MAX_D = 20
FEAS_TOL = 1e-12
COND_LIMIT = 1e13


@dataclass(frozen=True)
class BestResponse:
    w: np.ndarray
    value: float
    support: frozenset


@lru_cache(maxsize=32)
def _supports(d: int) -> tuple[tuple[int, ...], ...]:
    # descending size, lexicographic within a size
    out = []
    for size in range(d, 0, -1):
        out.extend(itertools.combinations(range(d), size))
    return tuple(out)


def _best_response_linear(spec: GameSpec, lin: np.ndarray) -> tuple[np.ndarray, frozenset]:
    d = spec.d
    if d > MAX_D:
        raise ValueError(f"support enumeration is capped at D={MAX_D}, got {d}")
    hess = 2.0 * spec.coeffs.beta_i * spec.c
    scale = max(1.0, float(np.max(np.abs(lin))), float(np.max(np.abs(hess))))
    best_w, best_val, best_support = None, -np.inf, None
    for support in _supports(d):
        idx = list(support)
        k = len(idx)
        kkt = np.zeros((k + 1, k + 1))
        kkt[:k, :k] = hess[np.ix_(idx, idx)]
        kkt[:k, k] = 1.0
        kkt[k, :k] = 1.0
        rhs = np.append(lin[idx], 1.0)
        if k > 1 and np.linalg.cond(kkt) > COND_LIMIT:
            log.debug("skipping singular support %s", support)
            continue
        sol = np.linalg.solve(kkt, rhs)
        w_s, lam = sol[:k], sol[k]
        if np.any(w_s < -FEAS_TOL):
            continue
        w = np.zeros(d)
        w[idx] = np.clip(w_s, 0.0, None)
        w /= w.sum()
        grad = lin - hess @ w
        # off-support multipliers lam - grad_i must be non-negative
        if k < d and np.max(np.delete(grad, idx) - lam) > FEAS_TOL * scale:
            continue
        value = float(lin @ w - 0.5 * w @ hess @ w)
        if value > best_val + FEAS_TOL * scale:
            best_w, best_val, best_support = w, value, frozenset(idx)
    assert best_w is not None, "no feasible support; the restricted KKT systems are all degenerate"
    return best_w, best_support


def best_response_exact(spec: GameSpec, w, agent: int) -> BestResponse:
    w = _profile(spec, w)
    k = _agent(spec, agent)
    b = spec.coeffs
    others = w.sum(axis=0) - w[k]
    lin = b.beta_a * spec.a - b.beta_d * others
    br, support = _best_response_linear(spec, lin)
    trial = w.copy()
    trial[k] = br
    return BestResponse(w=br, value=eval_utility(spec, trial, k), support=support)


def agent_gains(spec: GameSpec, w) -> np.ndarray:
    """Utility each agent gains by switching to its exact best response.

    Agents facing identical opponent sums share one enumeration.
    """
    w = _profile(spec, w)
    total = w.sum(axis=0)
    cache = {}
    gains = np.empty(spec.m)
    for k in range(spec.m):
        key = (w[k].tobytes(), (total - w[k]).tobytes())
        if key not in cache:
            br = best_response_exact(spec, w, k)
            cache[key] = br.value - eval_utility(spec, w, k)
        gains[k] = cache[key]
    return gains


def exploitability(spec: GameSpec, w) -> float:
    return float(max(0.0, agent_gains(spec, w).max()))


def br_dynamics(spec: GameSpec, init, max_rounds: int = 10_000, damping: float = 0.5, tol: float = 1e-9):
    """Round-robin damped best responses until the profile moves less than ``tol``.

    Returns ``(profile, converged)``. Non-convergence is a normal outcome.
    """
    if not 0.0 < damping <= 1.0:
        raise ValueError("damping must be in (0, 1]")
    w = _profile(spec, init).copy()
    for _ in range(max_rounds):
        moved = 0.0
        for k in range(spec.m):
            br = best_response_exact(spec, w, k).w
            new = (1.0 - damping) * w[k] + damping * br
            moved = max(moved, float(np.max(np.abs(new - w[k]))))
            w[k] = new
        if moved <= tol:
            return w, True
    return w, False
