"""Matrix completion with the fully connected kernel.

The kernel between matrix coordinates (i, j) and (i', j') is
kappa_d(<z_j, z_j'>) when i = i' and zero otherwise, so completion
decomposes into independent per-row kernel regressions that share one
column kernel.  Whole rows reuse a single factorization when every row
observes the same column set.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .activations import Activation, kappa
from .errors import ShapeError
from .priors import FeaturePrior
from .solve import SolveOptions, SolveReport, direct_solve, predict


@dataclass(frozen=True)
class ObservationSet:
    """Sparse observed coordinates of an m x n matrix."""

    rows: np.ndarray
    cols: np.ndarray
    values: np.ndarray
    shape: tuple[int, int]

    def __post_init__(self) -> None:
        m, n = self.shape
        if not (len(self.rows) == len(self.cols) == len(self.values)):
            raise ShapeError("rows, cols, values must have equal length")
        if len(self.rows) and (self.rows.min() < 0 or self.rows.max() >= m
                               or self.cols.min() < 0 or self.cols.max() >= n):
            raise ValueError("observation index out of range")
        flat = self.rows.astype(np.int64) * n + self.cols
        if len(np.unique(flat)) != len(flat):
            raise ValueError("duplicate observation coordinates")

    def __len__(self) -> int:
        return len(self.values)

    @classmethod
    def from_triples(cls, triples, shape) -> "ObservationSet":
        triples = list(triples)
        rows = np.array([t[0] for t in triples], dtype=np.intp)
        cols = np.array([t[1] for t in triples], dtype=np.intp)
        values = np.array([t[2] for t in triples], dtype=np.float64)
        return cls(rows, cols, values, tuple(shape))

    @classmethod
    def from_dense(cls, matrix: np.ndarray) -> "ObservationSet":
        """Observed entries are the finite ones; NaN marks missing."""
        matrix = np.asarray(matrix, dtype=np.float64)
        rows, cols = np.where(np.isfinite(matrix))
        return cls(rows, cols, matrix[rows, cols], matrix.shape)

    @classmethod
    def from_csv(cls, path, shape=None) -> "ObservationSet":
        """Read row,col,value triples (with a header line)."""
        rows, cols, values = [], [], []
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None:
                raise ValueError(f"{path}: empty observations file")
            for lineno, rec in enumerate(reader, start=2):
                if not rec:
                    continue
                if len(rec) != 3:
                    raise ValueError(f"{path}: line {lineno}: expected row,col,value")
                try:
                    rows.append(int(rec[0])); cols.append(int(rec[1]))
                    values.append(float(rec[2]))
                except ValueError as exc:
                    raise ValueError(f"{path}: line {lineno}: {exc}") from None
        if shape is None:
            shape = (max(rows) + 1, max(cols) + 1)
        return cls(np.array(rows, dtype=np.intp), np.array(cols, dtype=np.intp),
                   np.array(values), tuple(shape))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["row", "col", "value"])
            for r, c, v in zip(self.rows, self.cols, self.values):
                writer.writerow([int(r), int(c), repr(float(v))])

    def row_columns(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        """Observed column indices and values of row i."""
        sel = self.rows == i
        order = np.argsort(self.cols[sel], kind="stable")
        return self.cols[sel][order], self.values[sel][order]


@dataclass(frozen=True)
class ColumnKernel:
    """The shared n x n column kernel kappa_d(Z^T Z)."""

    matrix: np.ndarray
    depth: int
    activation: Activation

    def __post_init__(self) -> None:
        if not np.allclose(self.matrix, self.matrix.T, atol=1e-12):
            raise ValueError("column kernel must be symmetric")


def column_kernel(prior: FeaturePrior, depth: int, act: Activation) -> ColumnKernel:
    """Apply the depth-d kernel scalar elementwise to the prior Gram."""
    gram = prior.gram()
    return ColumnKernel(np.asarray(kappa(act, depth, gram)), depth, act)


def observed_kernel_matrix(obs: ObservationSet, kernel: ColumnKernel) -> np.ndarray:
    """Full kernel over the observed coordinates, in their stored order.

    Entry (a, b) is kappa_d(<z_{j_a}, z_{j_b}>) if the observations share a
    row and zero otherwise; mainly useful for small worked examples and
    cross-checks against the per-row solver.
    """
    same_row = obs.rows[:, None] == obs.rows[None, :]
    return np.where(same_row, kernel.matrix[np.ix_(obs.cols, obs.cols)], 0.0)


def _shared_pattern(obs: ObservationSet) -> np.ndarray | None:
    """Sorted column set observed by every row, or None if patterns differ."""
    m, _ = obs.shape
    first, _ = obs.row_columns(0)
    if len(first) * m != len(obs):
        return None
    for i in range(1, m):
        cols, _ = obs.row_columns(i)
        if len(cols) != len(first) or np.any(cols != first):
            return None
    return first


def complete_matrix(obs: ObservationSet, prior: FeaturePrior, depth: int,
                    act: Activation, opts: SolveOptions | None = None,
                    report: SolveReport | None = None) -> np.ndarray:
    """Fill the missing entries by per-row ridgeless (or ridged) regression.

    Observed entries are copied through to the output unchanged.  When all
    rows observe the same column set a single factorization is reused for
    every row; otherwise factorizations are cached per distinct pattern.
    """
    opts = opts or SolveOptions()
    m, n = obs.shape
    if prior.n_columns != n:
        raise ShapeError(
            f"prior has {prior.n_columns} columns but observations expect {n}")
    counts = np.bincount(obs.rows, minlength=m)
    empty = np.where(counts == 0)[0]
    if empty.size:
        raise ValueError(f"row {int(empty[0])} has no observations")

    kern = column_kernel(prior, depth, act).matrix
    out = np.empty((m, n))
    out[:] = np.nan

    shared = _shared_pattern(obs)
    if report is not None:
        report.shared_pattern = shared is not None

    if shared is not None:
        missing = np.setdiff1d(np.arange(n), shared)
        targets = np.empty((m, len(shared)))
        for i in range(m):
            _, vals = obs.row_columns(i)
            targets[i] = vals
        if missing.size:
            alpha = direct_solve(kern[np.ix_(shared, shared)], targets.T, opts, report)
            preds = predict(alpha, kern[np.ix_(shared, missing)], opts)
            out[:, missing] = preds.T
        out[:, shared] = targets
    else:
        for i in range(m):
            cols, vals = obs.row_columns(i)
            missing = np.setdiff1d(np.arange(n), cols)
            if missing.size:
                alpha = direct_solve(kern[np.ix_(cols, cols)], vals, opts, report)
                out[i, missing] = predict(alpha, kern[np.ix_(cols, missing)], opts)
            out[i, cols] = vals
    return out
