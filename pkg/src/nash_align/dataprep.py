"""Build the inconsistency matrix C and attractiveness vector a from probability tables.

Inputs are probabilities already normalised upstream (softmax over option logits
happens before ingestion); nothing here touches a language model.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, EmptyTableError, ShapeError


@dataclass(frozen=True)
class Psi:
    """Monotone discrepancy transform: ``identity``, ``power`` (p >= 1) or ``log1p``."""

    kind: str = "identity"
    p: float = 1.0

    def __post_init__(self):
        if self.kind not in ("identity", "power", "log1p"):
            raise ValueError(f"unknown psi kind {self.kind!r}")
        if self.kind == "power" and not (self.p >= 1.0 and math.isfinite(self.p)):
            raise ValueError(f"power exponent must be >= 1, got {self.p!r}")

    @classmethod
    def parse(cls, text: str) -> "Psi":
        """Parse ``identity``, ``log1p`` or ``power:<p>``."""
        if text.startswith("power:"):
            return cls("power", float(text.split(":", 1)[1]))
        if text in ("identity", "log1p"):
            return cls(text)
        raise ValueError(f"cannot parse psi {text!r}; expected identity, log1p or power:<p>")

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        if self.kind == "identity":
            return r
        if self.kind == "power":
            return r ** self.p
        return np.log1p(r)

    def __str__(self):
        return f"power:{self.p:g}" if self.kind == "power" else self.kind


@dataclass(frozen=True, eq=False)
class ProbabilityTable:
    """Per-sample subpopulation probabilities.

    probs[k, i]        probability subpopulation model i assigns to sample k's response
    ground_truth[k, o] human preference distribution over the Kc options of sample k
    option_index[k]    which option column sample k's response corresponds to
    option_probs[k, i, o] per-option model distribution, needed for alignment-based a
    """

    probs: np.ndarray
    ground_truth: np.ndarray | None = None
    option_index: np.ndarray | None = None
    option_probs: np.ndarray | None = None

    def __post_init__(self):
        probs = np.array(self.probs, dtype=float)
        if probs.ndim != 2:
            raise ShapeError(f"probs must be K x D, got shape {probs.shape}")
        if probs.shape[1] < 2:
            raise ShapeError("need at least two subpopulations")
        if np.any(~np.isfinite(probs)) or np.any(probs < 0) or np.any(probs > 1):
            raise ValueError("probabilities must lie in [0, 1]")
        object.__setattr__(self, "probs", probs)
        k, d = probs.shape
        if self.ground_truth is not None:
            gt = np.array(self.ground_truth, dtype=float)
            if gt.ndim != 2 or gt.shape[0] != k:
                raise ShapeError(f"ground_truth must have {k} rows, got shape {gt.shape}")
            if np.any(gt < 0) or np.max(np.abs(gt.sum(axis=1) - 1.0), initial=0.0) > 1e-9:
                raise ValueError("ground-truth rows must be non-negative and sum to 1")
            object.__setattr__(self, "ground_truth", gt)
        if self.option_index is not None:
            idx = np.array(self.option_index, dtype=int)
            if idx.shape != (k,):
                raise ShapeError(f"option_index must have length {k}")
            object.__setattr__(self, "option_index", idx)
        if self.option_probs is not None:
            op = np.array(self.option_probs, dtype=float)
            if op.ndim != 3 or op.shape[:2] != (k, d):
                raise ShapeError(f"option_probs must be {k} x {d} x Kc, got shape {op.shape}")
            if self.ground_truth is not None and op.shape[2] != self.ground_truth.shape[1]:
                raise ShapeError("option_probs and ground_truth disagree on the number of options")
            if np.any(op < 0) or np.any(op > 1):
                raise ValueError("option probabilities must lie in [0, 1]")
            object.__setattr__(self, "option_probs", op)

    @property
    def k(self) -> int:
        return self.probs.shape[0]

    @property
    def d(self) -> int:
        return self.probs.shape[1]


def build_inconsistency(table: ProbabilityTable, psi: Psi = Psi()) -> np.ndarray:
    """Average transformed pairwise discrepancies; diagonal is the off-diagonal row sum.

    The diagonal is summed from the already averaged off-diagonals so that
    ``c[i, i] == sum_{j != i} c[i, j]`` holds in floating point.
    """
    probs = table.probs
    if probs.shape[0] == 0:
        raise EmptyTableError("probability table has no samples")
    diff = np.abs(probs[:, :, None] - probs[:, None, :])
    c = psi(diff).mean(axis=0)
    np.fill_diagonal(c, 0.0)
    c = 0.5 * (c + c.T)
    np.fill_diagonal(c, c.sum(axis=1))
    return c


def build_attractiveness_from_shares(sizes) -> np.ndarray:
    sizes = np.asarray(sizes, dtype=float)
    if sizes.ndim != 1 or np.any(~(sizes > 0)) or np.any(~np.isfinite(sizes)):
        raise ValueError("population sizes must be positive and finite")
    return sizes / sizes.sum()


def build_attractiveness_from_alignment(table: ProbabilityTable) -> np.ndarray:
    """Mean inner product of each subpopulation's option distribution with the human one.

    Scores are renormalised onto the simplex.
    """
    if table.ground_truth is None:
        raise ConfigurationError("alignment-based attractiveness needs ground-truth distributions")
    if table.option_probs is None:
        raise ConfigurationError("alignment-based attractiveness needs per-option model probabilities")
    if table.k == 0:
        raise EmptyTableError("probability table has no samples")
    raw = np.einsum("kio,ko->i", table.option_probs, table.ground_truth) / table.k
    total = raw.sum()
    if not total > 0:
        raise ConfigurationError("all alignment scores are zero; cannot normalise")
    return raw / total


def mixture_prob(weights, nu_values) -> float:
    return float(np.dot(np.asarray(weights, dtype=float), np.asarray(nu_values, dtype=float)))


@dataclass(frozen=True)
class PsdReport:
    min_eigenvalue: float
    symmetric_error: float
    dominance_error: float
    tol: float

    @property
    def passed(self) -> bool:
        return self.min_eigenvalue >= -self.tol

    def as_dict(self) -> dict:
        return {
            "min_eigenvalue": self.min_eigenvalue,
            "symmetric_error": self.symmetric_error,
            "dominance_error": self.dominance_error,
            "tol": self.tol,
            "passed": self.passed,
        }


def validate_psd(c, tol: float = 1e-9) -> PsdReport:
    c = np.asarray(c, dtype=float)
    if c.ndim != 2 or c.shape[0] != c.shape[1]:
        raise ShapeError(f"expected a square matrix, got shape {c.shape}")
    sym_err = float(np.max(np.abs(c - c.T), initial=0.0))
    off_diag = c.copy()
    np.fill_diagonal(off_diag, 0.0)
    off = off_diag.sum(axis=1)
    dom_err = float(np.max(np.abs(np.diag(c) - off), initial=0.0))
    min_eig = float(np.linalg.eigvalsh(0.5 * (c + c.T))[0])
    return PsdReport(min_eig, sym_err, dom_err, tol)
