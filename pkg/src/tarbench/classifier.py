"""Soft-margin linear classifier trained by sequential minimal optimization.

The primal problem is

    minimize 0.5 ||w||^2 + C * sum_i max(0, 1 - y_i (w . x_i + b))

with an unregularized bias b. Training solves the dual with the equality
constraint sum_i y_i alpha_i = 0 (the free-bias condition) by repeatedly
updating the maximally violating pair, and stops when the relative gap
between the primal objective (at the best piecewise-linear bias) and the
dual objective falls below a tolerance. Training is a pure function of its
inputs; no randomness is involved, so repeated runs are bit-identical.

C="auto" resolves to 1 / mean(||x_i||^2) over the training set, which is 1
for unit-normalized document vectors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy import sparse

from .vectors import SparseVector, rows_to_csr

AUTO_C = "auto"

_DENSE_GRAM_MAX_ROWS = 6000
_DENSE_GRAM_MAX_FEATURES = 8192
_KKT_EPS = 1e-10
_GAP_CHECK_EVERY = 256

REVIEWED = "reviewed"
PRESUMPTIVE = "presumptive"
SEED = "seed"

_PROVENANCES = frozenset({REVIEWED, PRESUMPTIVE, SEED})


class TrainingError(ValueError):
    pass


class SingleClassError(TrainingError):
    """Training requires at least one example of each label."""


class ConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class LabeledExample:
    vector: SparseVector
    label: int
    provenance: str = REVIEWED

    def __post_init__(self):
        if self.label not in (-1, 1):
            raise ValueError(f"label must be +1 or -1, got {self.label!r}")
        if self.provenance not in _PROVENANCES:
            raise ValueError(f"unknown provenance {self.provenance!r}")
        if self.provenance == PRESUMPTIVE and self.label != -1:
            raise ValueError("presumptive examples must carry label -1")


@dataclass
class LinearModel:
    weights: np.ndarray
    bias: float
    converged_gap: float = 0.0
    dual_steps: int = 0

    @property
    def n_features(self) -> int:
        return int(self.weights.shape[0])

    def score(self, vector: SparseVector) -> float:
        w = self.weights
        acc = self.bias
        for fid, wt in zip(vector.feature_ids, vector.weights):
            acc += w[fid] * wt
        return float(acc)

    def score_matrix(self, matrix: sparse.csr_matrix) -> np.ndarray:
        return np.asarray(matrix @ self.weights).ravel() + self.bias


def resolve_c(c, mean_squared_norm: float) -> float:
    if c == AUTO_C:
        if mean_squared_norm <= 0.0:
            raise TrainingError(
                "C='auto' is undefined when every training vector is empty"
            )
        return 1.0 / mean_squared_norm
    value = float(c)
    if not value > 0.0 or not math.isfinite(value):
        raise TrainingError(f"C must be positive and finite, got {c!r}")
    return value


def hinge_objective(
    weights: np.ndarray, bias: float, matrix: sparse.csr_matrix, y: np.ndarray, c: float
) -> float:
    margins = y * (np.asarray(matrix @ weights).ravel() + bias)
    hinge = np.maximum(0.0, 1.0 - margins)
    return 0.5 * float(weights @ weights) + c * float(hinge.sum())


def _best_bias(f: np.ndarray, y: np.ndarray, c: float) -> float:
    """Bias minimizing the hinge sum for fixed per-document scores f."""
    # The hinge sum is piecewise linear in b with breakpoints y_i - f_i.
    # Scan them in order, tracking the derivative, and stop at the first
    # point where it becomes non-negative.
    points = y - f
    order = np.argsort(points, kind="stable")
    slope = -c * float(np.count_nonzero(y > 0))
    best = points[order[0]] if len(order) else 0.0
    for idx in order:
        if slope >= 0.0:
            break
        best = points[idx]
        slope += c
    return float(best)


class _GramProvider:
    """Dense Gram matrix when small, per-column cache otherwise."""

    def __init__(self, matrix: sparse.csr_matrix):
        self._matrix = matrix
        n, n_features = matrix.shape
        self.diag: np.ndarray
        if n <= _DENSE_GRAM_MAX_ROWS and n_features <= _DENSE_GRAM_MAX_FEATURES:
            dense = matrix.toarray()
            self._full = dense @ dense.T
            self.diag = np.ascontiguousarray(np.diag(self._full))
        else:
            self._full = None
            self._cache: dict[int, np.ndarray] = {}
            sq = matrix.copy()
            sq.data **= 2
            self.diag = np.asarray(sq.sum(axis=1)).ravel()

    def column(self, i: int) -> np.ndarray:
        if self._full is not None:
            return self._full[i]
        col = self._cache.get(i)
        if col is None:
            xi = self._matrix[i].toarray().ravel()
            col = np.asarray(self._matrix @ xi).ravel()
            self._cache[i] = col
        return col


def train_arrays(
    matrix: sparse.csr_matrix,
    y: np.ndarray,
    c=AUTO_C,
    tol: float = 1e-4,
    max_steps: int | None = None,
) -> LinearModel:
    """Train on a CSR matrix of examples and a +1/-1 label vector."""
    n = matrix.shape[0]
    y = np.asarray(y, dtype=np.float64)
    if y.shape != (n,):
        raise TrainingError("label vector length must match the matrix rows")
    if not np.all(np.abs(y) == 1.0):
        raise TrainingError("labels must be +1 or -1")
    if not (np.any(y > 0) and np.any(y < 0)):
        raise SingleClassError("training set must contain both labels")
    gram = _GramProvider(matrix)
    c_value = resolve_c(c, float(gram.diag.mean()))
    if max_steps is None:
        max_steps = max(20_000, 80 * n)

    alpha = np.zeros(n, dtype=np.float64)
    f = np.zeros(n, dtype=np.float64)
    pos = y > 0
    neg = ~pos
    gap = math.inf
    steps = 0
    while True:
        fv = y - f
        # Movable sets for the equality-constrained box problem: "lower"
        # rows force b >= F_i at optimality, "upper" rows force b <= F_j.
        lower_ok = (pos & (alpha < c_value)) | (neg & (alpha > 0.0))
        upper_ok = (pos & (alpha > 0.0)) | (neg & (alpha < c_value))
        lo_vals = np.where(lower_ok, fv, -np.inf)
        up_vals = np.where(upper_ok, fv, np.inf)
        i = int(np.argmax(lo_vals))
        j = int(np.argmin(up_vals))
        violation = lo_vals[i] - up_vals[j]
        if violation <= _KKT_EPS:
            break
        if steps % _GAP_CHECK_EVERY == 0:
            gap = _relative_gap(alpha, f, y, c_value)
            if gap <= tol:
                break
        if steps >= max_steps:
            raise ConvergenceError(
                f"no convergence after {steps} dual steps "
                f"(violation {violation:.3e}, relative gap {gap:.3e})"
            )
        col_i = gram.column(i)
        col_j = gram.column(j)
        eta = gram.diag[i] + gram.diag[j] - 2.0 * col_i[j]
        # Box headroom for the transfer step delta > 0.
        hi_i = c_value - alpha[i] if y[i] > 0 else alpha[i]
        hi_j = alpha[j] if y[j] > 0 else c_value - alpha[j]
        delta = min(hi_i, hi_j)
        if eta > 1e-12:
            delta = min(delta, violation / eta)
        # Clip so box-limited steps land exactly on a bound despite
        # floating point rounding; otherwise the movable-set masks could
        # keep selecting a pair with no usable headroom.
        alpha[i] = min(max(alpha[i] + y[i] * delta, 0.0), c_value)
        alpha[j] = min(max(alpha[j] - y[j] * delta, 0.0), c_value)
        f += delta * (col_i - col_j)
        steps += 1

    w = np.asarray(matrix.T @ (alpha * y)).ravel()
    f_exact = np.asarray(matrix @ w).ravel()
    bias = _best_bias(f_exact, y, c_value)
    gap = _relative_gap(alpha, f_exact, y, c_value)
    return LinearModel(weights=w, bias=bias, converged_gap=gap, dual_steps=steps)


def _relative_gap(alpha: np.ndarray, f: np.ndarray, y: np.ndarray, c: float) -> float:
    w_sq = float((alpha * y) @ f)
    dual = float(alpha.sum()) - 0.5 * w_sq
    bias = _best_bias(f, y, c)
    margins = y * (f + bias)
    primal = 0.5 * w_sq + c * float(np.maximum(0.0, 1.0 - margins).sum())
    return (primal - dual) / max(1.0, abs(primal))


def train(
    examples: Sequence[LabeledExample],
    n_features: int,
    c=AUTO_C,
    tol: float = 1e-4,
    max_steps: int | None = None,
) -> LinearModel:
    """Train from labeled sparse vectors."""
    if not examples:
        raise TrainingError("empty training set")
    matrix = rows_to_csr([e.vector for e in examples], n_features)
    y = np.asarray([e.label for e in examples], dtype=np.float64)
    return train_arrays(matrix, y, c=c, tol=tol, max_steps=max_steps)


def training_objective(
    model: LinearModel, examples: Sequence[LabeledExample], c: float
) -> float:
    matrix = rows_to_csr([e.vector for e in examples], model.n_features)
    y = np.asarray([e.label for e in examples], dtype=np.float64)
    return hinge_objective(model.weights, model.bias, matrix, y, c)


def dump_model(model: LinearModel, path, digits: int = 9) -> None:
    """Write the bias line then one fid<SPACE>weight line per nonzero."""
    fmt = f"%.{digits}g"
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"bias {fmt % model.bias}\n")
        for fid in np.flatnonzero(model.weights):
            fh.write(f"{int(fid)} {fmt % model.weights[fid]}\n")


def load_model(path, n_features: int) -> LinearModel:
    weights = np.zeros(n_features, dtype=np.float64)
    bias = 0.0
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            parts = raw.split()
            if not parts:
                continue
            if parts[0] == "bias":
                bias = float(parts[1])
            else:
                weights[int(parts[0])] = float(parts[1])
    return LinearModel(weights=weights, bias=bias)
