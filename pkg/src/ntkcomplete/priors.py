"""Feature priors: column embeddings for tabular completion and channel
images (explicit or analytic infinite-channel) for convolutional kernels."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import ShapeError


@dataclass(frozen=True)
class FeaturePrior:
    """Column-embedding prior: a p x n matrix whose columns are unit vectors.

    column_norms records the pre-normalization norms for diagnostics.
    """

    data: np.ndarray
    column_norms: np.ndarray

    def __post_init__(self) -> None:
        norms = np.linalg.norm(self.data, axis=0)
        if not np.allclose(norms, 1.0, atol=1e-12):
            raise ValueError("columns must be unit vectors; use normalize_prior")

    @property
    def n_columns(self) -> int:
        return self.data.shape[1]

    def gram(self) -> np.ndarray:
        return self.data.T @ self.data


def normalize_prior(raw: np.ndarray) -> FeaturePrior:
    """Normalize each column of raw to unit length.

    Raises ValueError naming the first zero column, which cannot be
    normalized.
    """
    raw = np.asarray(raw, dtype=np.float64)
    if raw.ndim != 2:
        raise ShapeError(f"prior must be a 2-d matrix, got shape {raw.shape}")
    norms = np.linalg.norm(raw, axis=0)
    zero = np.where(norms == 0.0)[0]
    if zero.size:
        raise ValueError(f"prior column {int(zero[0])} is zero and cannot be normalized")
    return FeaturePrior(raw / norms, norms)


def augment_identity(raw: np.ndarray, scale: float = 1.5) -> np.ndarray:
    """Append scale * I below the prior so its Gram becomes positive definite.

    Applied to the raw (pre-normalization) matrix; the Gram gains scale^2 on
    the diagonal.
    """
    raw = np.asarray(raw, dtype=np.float64)
    n = raw.shape[1]
    return np.vstack([raw, scale * np.eye(n)])


def identity_prior(n: int) -> FeaturePrior:
    """One-hot column embeddings (the standard matrix-completion prior)."""
    if n < 1:
        raise ValueError("need at least one column")
    eye = np.eye(n)
    return FeaturePrior(eye, np.ones(n))


def method_output_prior(csv_path, augment: float | None = None) -> FeaturePrior:
    """Load a dense numeric CSV (p rows x n columns) as a feature prior.

    Rows of the file are embedding dimensions, columns are the matrix
    columns being completed; typically the output of another imputation
    method.  augment, when given, appends augment * I before normalization.
    """
    raw = load_dense_csv(csv_path)
    if augment is not None:
        raw = augment_identity(raw, augment)
    return normalize_prior(raw)


def load_dense_csv(path) -> np.ndarray:
    """Parse a dense numeric CSV; empty cells and 'NaN' become NaN.

    Raises ValueError with the 1-based line number on ragged or
    non-numeric rows.
    """
    rows = []
    width = None
    with open(path, newline="") as fh:
        for lineno, rec in enumerate(csv.reader(fh), start=1):
            if not rec:
                continue
            if width is None:
                width = len(rec)
            elif len(rec) != width:
                raise ValueError(f"{path}: line {lineno}: expected {width} fields, got {len(rec)}")
            try:
                rows.append([float(c) if c.strip() != "" else np.nan for c in rec])
            except ValueError as exc:
                raise ValueError(f"{path}: line {lineno}: {exc}") from None
    if not rows:
        raise ValueError(f"{path}: no data rows")
    return np.asarray(rows, dtype=np.float64)


def save_dense_csv(path, matrix: np.ndarray) -> None:
    matrix = np.atleast_2d(np.asarray(matrix))
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        for row in matrix:
            writer.writerow([repr(float(v)) for v in row])


# ---------------------------------------------------------------------------
# image priors


@dataclass(frozen=True)
class ImagePrior:
    """Channel-image prior for convolutional kernels.

    Either explicit (channels: c x m x n tensor) or analytic: the
    infinite-channel idealization where channel-wise pixel inner products
    are 1 on equal coordinates and rho elsewhere.
    """

    shape: tuple[int, int]
    channels: np.ndarray | None = None
    rho: float | None = None

    def __post_init__(self) -> None:
        if (self.channels is None) == (self.rho is None):
            raise ValueError("provide exactly one of channels / rho")
        if self.rho is not None and not 0.0 <= self.rho < 1.0:
            raise ValueError("analytic prior requires 0 <= rho < 1")
        if self.channels is not None:
            if self.channels.ndim != 3 or self.channels.shape[1:] != tuple(self.shape):
                raise ShapeError("channel tensor must be (c, m, n) matching shape")

    @property
    def is_analytic(self) -> bool:
        return self.channels is None

    def pixel_gram(self) -> np.ndarray:
        """Channel inner products as an (m, n, m, n) tensor."""
        m, n = self.shape
        if self.channels is not None:
            return np.einsum("cij,ckl->ijkl", self.channels, self.channels)
        gram = np.full((m, n, m, n), self.rho)
        ii, jj = np.meshgrid(np.arange(m), np.arange(n), indexing="ij")
        gram[ii, jj, ii, jj] = 1.0
        return gram


def uniform_random_prior(c: int, m: int, n: int, high: float = 0.1,
                         seed: int = 0) -> ImagePrior:
    """Explicit prior with i.i.d. uniform entries on [0, high].

    The channel-normalized correlation of distinct pixels tends to 3/4 as
    c grows, independent of high.
    """
    if high <= 0:
        raise ValueError("high must be positive")
    rng = np.random.default_rng(seed)
    return ImagePrior((m, n), channels=rng.uniform(0.0, high, size=(c, m, n)))


def analytic_uniform_prior(m: int, n: int, rho: float = 0.75) -> ImagePrior:
    """Infinite-channel stationary prior; rho = 3/4 is the uniform limit."""
    return ImagePrior((m, n), rho=rho)


def meshgrid_prior(m: int, n: int) -> ImagePrior:
    """Two-channel coordinate prior: normalized row and column indices."""
    ii, jj = np.meshgrid(np.arange(m, dtype=np.float64),
                         np.arange(n, dtype=np.float64), indexing="ij")
    ch0 = ii / (m - 1) if m > 1 else np.zeros_like(ii)
    ch1 = jj / (n - 1) if n > 1 else np.zeros_like(jj)
    return ImagePrior((m, n), channels=np.stack([ch0, ch1]))


# ---------------------------------------------------------------------------
# embedding tables for the drug/cell reference prior


@dataclass
class EmbeddingTable:
    """Keyed embedding vectors, one column per key, plus an optional
    fallback vector for unknown keys."""

    keys: list[str]
    vectors: np.ndarray
    default: np.ndarray | None = None
    _index: dict = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if len(self.keys) != self.vectors.shape[1]:
            raise ShapeError("one vector column per key required")
        if len(set(self.keys)) != len(self.keys):
            raise ValueError("keys must be unique")
        self._index = {k: i for i, k in enumerate(self.keys)}

    def lookup(self, key: str) -> np.ndarray | None:
        i = self._index.get(key)
        if i is not None:
            return self.vectors[:, i]
        return self.default

    @classmethod
    def from_csv(cls, path, default_key: str | None = None) -> "EmbeddingTable":
        """First column is the key, remaining columns are numeric.

        default_key, when given, names the row used as the fallback; when
        absent the fallback is the mean of all rows.
        """
        keys, rows = [], []
        with open(path, newline="") as fh:
            for lineno, rec in enumerate(csv.reader(fh), start=1):
                if not rec:
                    continue
                keys.append(rec[0])
                try:
                    rows.append([float(c) for c in rec[1:]])
                except ValueError as exc:
                    raise ValueError(f"{path}: line {lineno}: {exc}") from None
        vectors = np.asarray(rows, dtype=np.float64).T
        table = cls(keys, vectors)
        if default_key is not None:
            vec = table.lookup(default_key)
            if vec is None:
                raise KeyError(f"default key {default_key!r} not in table")
            table.default = vec.copy()
        else:
            table.default = vectors.mean(axis=1)
        return table


def reference_prior(drug_table: EmbeddingTable, cell_table: EmbeddingTable,
                    pairs: list[tuple[str, str]],
                    cell_scale: float = 1.25) -> FeaturePrior:
    """Concatenated drug/cell embedding prior.

    Per pair: take the drug embedding (table fallback if the drug is
    unknown), rescale the cell embedding to the drug embedding's norm,
    multiply it by cell_scale, concatenate, and unit-normalize the result.
    """
    columns = []
    for drug, cell in pairs:
        dvec = drug_table.lookup(drug)
        if dvec is None:
            raise KeyError(f"drug {drug!r} unknown and table has no default")
        cvec = cell_table.lookup(cell)
        if cvec is None:
            raise KeyError(f"cell {cell!r} unknown and table has no default")
        cnorm = np.linalg.norm(cvec)
        if cnorm == 0:
            matched = np.zeros_like(cvec)
        else:
            matched = cvec * (np.linalg.norm(dvec) / cnorm)
        columns.append(np.concatenate([dvec, cell_scale * matched]))
    return normalize_prior(np.stack(columns, axis=1))
