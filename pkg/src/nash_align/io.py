"""File formats: probability-table CSVs, the C/a exchange JSON, profiles and grid CSVs.

All parsing is locale independent ('.' decimal separator, UTF-8). Floats are
written with ``repr`` so that values round-trip exactly.
"""
from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path

import numpy as np

from .dataprep import ProbabilityTable
from .errors import ParseError
from .sweep import CellClass, SweepGrid


def _read_rows(path):
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read file: {exc.strerror}", path=path) from exc
    rows = list(csv.reader(io.StringIO(text)))
    rows = [(n, [cell.strip() for cell in row]) for n, row in enumerate(rows, start=1) if row and any(row)]
    if not rows:
        raise ParseError("file is empty", path=path)
    return path, rows


def _float(text, path, line):
    try:
        value = float(text)
    except ValueError:
        raise ParseError(f"not a number: {text!r}", path=path, line=line) from None
    if not math.isfinite(value):
        raise ParseError(f"non-finite value: {text!r}", path=path, line=line)
    return value


def _check_header(header, expected_prefix, path, stem):
    if header[: len(expected_prefix)] != expected_prefix:
        raise ParseError(f"header must start with {','.join(expected_prefix)}", path=path, line=1)
    rest = header[len(expected_prefix):]
    want = [f"{stem}_{i}" for i in range(len(rest))]
    if rest != want or not rest:
        raise ParseError(f"expected columns {stem}_0..{stem}_<n-1>, got {rest}", path=path, line=1)
    return len(rest)


def read_probs_csv(path):
    """Return ``(sample_ids, probs)`` from a ``sample_id,subpop_0..`` file."""
    path, rows = _read_rows(path)
    (_, header), body = rows[0], rows[1:]
    d = _check_header(header, ["sample_id"], path, "subpop")
    ids, probs, seen = [], [], set()
    for line, row in body:
        if len(row) != d + 1:
            raise ParseError(f"expected {d + 1} fields, got {len(row)}", path=path, line=line)
        if row[0] in seen:
            raise ParseError(f"duplicate sample_id {row[0]!r}", path=path, line=line)
        values = [_float(x, path, line) for x in row[1:]]
        if any(v < 0 or v > 1 for v in values):
            raise ParseError("probabilities must lie in [0, 1]", path=path, line=line)
        seen.add(row[0])
        ids.append(row[0])
        probs.append(values)
    return ids, np.array(probs, dtype=float).reshape(len(probs), d)


def read_ground_truth_csv(path, sample_ids):
    """``sample_id,option_index,gt_0..`` aligned to ``sample_ids``."""
    path, rows = _read_rows(path)
    (_, header), body = rows[0], rows[1:]
    kc = _check_header(header, ["sample_id", "option_index"], path, "gt")
    by_id = {}
    for line, row in body:
        if len(row) != kc + 2:
            raise ParseError(f"expected {kc + 2} fields, got {len(row)}", path=path, line=line)
        try:
            opt = int(row[1])
        except ValueError:
            raise ParseError(f"option_index is not an integer: {row[1]!r}", path=path, line=line) from None
        if not 0 <= opt < kc:
            raise ParseError(f"option_index {opt} out of range", path=path, line=line)
        gt = [_float(x, path, line) for x in row[2:]]
        if min(gt) < 0 or abs(sum(gt) - 1.0) > 1e-9:
            raise ParseError("ground-truth row must be non-negative and sum to 1", path=path, line=line)
        by_id[row[0]] = (opt, gt, line)
    missing = [s for s in sample_ids if s not in by_id]
    if missing:
        raise ParseError(f"no ground truth for sample_id {missing[0]!r}", path=path)
    return (
        np.array([by_id[s][0] for s in sample_ids], dtype=int),
        np.array([by_id[s][1] for s in sample_ids], dtype=float),
    )


def read_option_probs_csv(path, sample_ids, d):
    """``sample_id,subpop,opt_0..`` into a ``(K, D, Kc)`` array."""
    path, rows = _read_rows(path)
    (_, header), body = rows[0], rows[1:]
    kc = _check_header(header, ["sample_id", "subpop"], path, "opt")
    index = {s: k for k, s in enumerate(sample_ids)}
    out = np.full((len(sample_ids), d, kc), np.nan)
    for line, row in body:
        if len(row) != kc + 2:
            raise ParseError(f"expected {kc + 2} fields, got {len(row)}", path=path, line=line)
        if row[0] not in index:
            raise ParseError(f"unknown sample_id {row[0]!r}", path=path, line=line)
        try:
            sub = int(row[1])
        except ValueError:
            raise ParseError(f"subpop is not an integer: {row[1]!r}", path=path, line=line) from None
        if not 0 <= sub < d:
            raise ParseError(f"subpop {sub} out of range", path=path, line=line)
        values = [_float(x, path, line) for x in row[2:]]
        if any(v < 0 or v > 1 for v in values):
            raise ParseError("probabilities must lie in [0, 1]", path=path, line=line)
        out[index[row[0]], sub] = values
    if np.isnan(out).any():
        k, i = np.argwhere(np.isnan(out[:, :, 0]))[0]
        raise ParseError(f"missing option row for sample_id {sample_ids[k]!r}, subpop {i}", path=path)
    return out


def read_table(probs_path, ground_truth_path=None, options_path=None) -> ProbabilityTable:
    ids, probs = read_probs_csv(probs_path)
    gt = idx = opts = None
    if ground_truth_path is not None:
        idx, gt = read_ground_truth_csv(ground_truth_path, ids)
    if options_path is not None:
        opts = read_option_probs_csv(options_path, ids, probs.shape[1])
    return ProbabilityTable(probs=probs, ground_truth=gt, option_index=idx, option_probs=opts)


def game_to_json(c, a) -> str:
    c = np.asarray(c, dtype=float)
    doc = {"d": int(c.shape[0]), "c": [[float(x) for x in row] for row in c], "a": [float(x) for x in a]}
    return json.dumps(doc, indent=2) + "\n"


def read_game_json(path):
    """Return ``(c, a)`` from a ``{"d", "c", "a"}`` exchange file."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ParseError(f"cannot read file: {exc.strerror}", path=path) from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg}", path=path, line=exc.lineno) from None
    try:
        d = int(doc["d"])
        c = np.array(doc["c"], dtype=float)
        a = np.array(doc["a"], dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"expected keys d, c, a: {exc}", path=path) from None
    if c.shape != (d, d) or a.shape != (d,):
        raise ParseError(f"shapes disagree with d={d}: c {c.shape}, a {a.shape}", path=path)
    return c, a


def read_profile_json(path, m=None):
    """Profile file ``{"w": [[...], ...]}``; a single vector is stacked ``m`` times."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
        w = np.array(doc["w"], dtype=float)
    except OSError as exc:
        raise ParseError(f"cannot read file: {exc.strerror}", path=path) from exc
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"expected a JSON object with key 'w': {exc}", path=path) from None
    if w.ndim == 1:
        if m is None:
            raise ParseError("a single strategy vector needs --agents", path=path)
        w = np.tile(w, (m, 1))
    if w.ndim != 2:
        raise ParseError("w must be a vector or a matrix", path=path)
    return w


def grid_to_csv(grid: SweepGrid, d: int) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["beta_x", "beta_y", "class", *[f"w_{i}" for i in range(d)]])
    ax, ay = grid.config.axes
    for row in grid.cells:
        for cell in row:
            x, y = getattr(cell.betas, ax), getattr(cell.betas, ay)
            weights = [""] * d if cell.cls is CellClass.INVALID else [repr(float(v)) for v in cell.weights]
            writer.writerow([repr(x), repr(y), cell.cls.value, *weights])
    return buf.getvalue()


def metrics_to_json(grid: SweepGrid) -> str:
    return json.dumps(grid.metrics.to_json(), indent=2) + "\n"
