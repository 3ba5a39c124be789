"""Kernel expansion: recover the full high-resolution kernel from a base
build at resolution 2^(s+1) via row/column rotation and minimum padding.

For architectures with s stride-2 downsampling layers, s nearest-neighbor
upsampling layers, circular padding, and an analytic stationary prior,
kernel rows repeat (up to cyclic rotation) across coordinates congruent
mod 2^s.  The compact store keeps one expanded row per congruence class,
p x p x d2 x d2 numbers instead of d2^4.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .cntk import ArchSpec, UpsampleBilinear, build_cntk
from .errors import ShapeError
from .priors import ImagePrior


def rotate(matrix: np.ndarray, i: int, j: int) -> np.ndarray:
    """Rotate rows down by i and columns right by j (cyclically)."""
    return np.roll(matrix, shift=(i, j), axis=(0, 1))


def min_pad(matrix: np.ndarray, d2: int) -> np.ndarray:
    """Embed into a d2 x d2 matrix, filling new entries with the minimum."""
    d1 = matrix.shape[0]
    if matrix.shape != (d1, d1):
        raise ShapeError(f"expected a square matrix, got {matrix.shape}")
    if d2 < d1:
        raise ShapeError(f"cannot pad {d1}x{d1} down to {d2}x{d2}")
    out = np.full((d2, d2), matrix.min())
    out[:d1, :d1] = matrix
    return out


@dataclass(frozen=True)
class CompactKernel:
    """Expanded kernel rows for the p x p congruence classes (p = 2^s)."""

    rows: np.ndarray            # (p, p, d2, d2)
    s: int
    d2: int
    rho: float
    arch_hash: bytes = b"\x00" * 32
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self) -> None:
        p = 2 ** self.s
        if self.rows.shape != (p, p, self.d2, self.d2):
            raise ShapeError(
                f"rows must be ({p}, {p}, {self.d2}, {self.d2}), got {self.rows.shape}")
        if len(self.arch_hash) != 32:
            raise ValueError("arch hash must be 32 bytes")

    @property
    def p(self) -> int:
        return 2 ** self.s

    @property
    def dims(self) -> tuple[int, int]:
        return (self.d2, self.d2)

    def row(self, i: int, j: int) -> np.ndarray:
        """Full kernel row K(i, j, :, :) without materializing the kernel."""
        d2, p = self.d2, self.p
        if not (0 <= i < d2 and 0 <= j < d2):
            raise IndexError(f"({i}, {j}) out of range for {d2}x{d2}")
        return rotate(self.rows[i % p, j % p], i - i % p, j - j % p)

    def query(self, i: int, j: int, i2: int, j2: int) -> float:
        d2, p = self.d2, self.p
        for idx in (i, j, i2, j2):
            if not 0 <= idx < d2:
                raise IndexError(f"index {idx} out of range for {d2}x{d2}")
        return float(self.rows[i % p, j % p,
                               (i2 - (i - i % p)) % d2,
                               (j2 - (j - j % p)) % d2])


def expand_kernel(base: np.ndarray, s: int, d2: int, rho: float = float("nan"),
                  arch_hash: bytes = b"\x00" * 32,
                  meta: dict | None = None) -> CompactKernel:
    """Assemble the compact store from the base kernel at resolution 2^(s+1).

    Each stored row is the base row recentered to (p, p) by rotation,
    minimum-padded to d2 x d2, and rotated back, so that padding lands in
    the far region of the circular grid.
    """
    if s < 0:
        raise ValueError("s must be nonnegative")
    p = 2 ** s
    base_res = 2 ** (s + 1)
    if base.shape != (base_res, base_res, base_res, base_res):
        raise ShapeError(
            f"base kernel must be built at {base_res}x{base_res} for s={s}, "
            f"got shape {base.shape}")
    if d2 < 2 * base_res or d2 & (d2 - 1):
        raise ShapeError(
            f"target resolution must be a power of two above {base_res}, got {d2}")
    rows = np.empty((p, p, d2, d2))
    for i in range(p):
        for j in range(p):
            recentered = rotate(base[i, j], p - i, p - j)
            rows[i, j] = rotate(min_pad(recentered, d2), i - p, j - p)
    return CompactKernel(rows, s, d2, rho, arch_hash, meta or {})


def build_compact(arch: ArchSpec, prior: ImagePrior, d2: int) -> CompactKernel:
    """Build the base kernel at 2^(s+1) and expand it to resolution d2.

    Checks the expansion hypotheses: equal counts of downsampling and
    nearest-neighbor upsampling layers, no bilinear upsampling, analytic
    stationary prior, square power-of-two base input matching 2^(s+1).
    """
    downs, nearest, bilinear = arch.sampling_counts()
    if bilinear:
        raise ShapeError("expansion does not support bilinear upsampling layers")
    if downs != nearest:
        raise ShapeError(
            f"expansion needs equal down/up counts, got {downs} down, {nearest} up")
    if not prior.is_analytic:
        raise ValueError("expansion requires an analytic stationary prior")
    s = downs
    base_res = 2 ** (s + 1)
    if tuple(arch.input_shape) != (base_res, base_res):
        raise ShapeError(
            f"arch input must be {base_res}x{base_res} (=2^(s+1)) for s={s}, "
            f"got {arch.input_shape}")
    base_prior = ImagePrior((base_res, base_res), rho=prior.rho)
    base = build_cntk(arch, base_prior)
    return expand_kernel(base, s, d2, rho=prior.rho, arch_hash=arch.arch_hash())


def materialize_gram(kernel: CompactKernel, coords_a, coords_b) -> np.ndarray:
    """Kernel values between two coordinate lists, batched per congruence
    class so each stored row is gathered once per class member."""
    coords_a = np.asarray(coords_a, dtype=np.intp)
    coords_b = np.asarray(coords_b, dtype=np.intp)
    if coords_a.size == 0 or coords_b.size == 0:
        return np.zeros((len(coords_a), len(coords_b)))
    d2, p = kernel.d2, kernel.p
    for coords in (coords_a, coords_b):
        if coords.min() < 0 or coords.max() >= d2:
            raise IndexError(f"coordinates out of range for {d2}x{d2}")
    out = np.empty((len(coords_a), len(coords_b)))
    ib, jb = coords_b[:, 0], coords_b[:, 1]
    class_a = (coords_a[:, 0] % p) * p + (coords_a[:, 1] % p)
    for cls in np.unique(class_a):
        sel = np.where(class_a == cls)[0]
        ci, cj = divmod(int(cls), p)
        stored = kernel.rows[ci, cj]
        di = (coords_a[sel, 0] - ci)[:, None]
        dj = (coords_a[sel, 1] - cj)[:, None]
        out[sel] = stored[(ib[None, :] - di) % d2, (jb[None, :] - dj) % d2]
    return out
