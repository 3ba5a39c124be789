"""Masked images, inpainting, and kernel-row heatmaps."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from PIL import Image

from .cntk import StationaryKernel
from .errors import ShapeError
from .expand import CompactKernel, materialize_gram
from .kernel_io import FullKernel
from .solve import SolveOptions, SolveReport, direct_solve, iterative_solve, predict


@dataclass(frozen=True)
class MaskedImage:
    """Pixel tensor (channels, m, n) in [0, 1] with a boolean observation
    mask (True = observed)."""

    pixels: np.ndarray
    mask: np.ndarray

    def __post_init__(self) -> None:
        if self.pixels.ndim != 3:
            raise ShapeError(f"pixels must be (c, m, n), got {self.pixels.shape}")
        if self.mask.shape != self.pixels.shape[1:]:
            raise ShapeError(
                f"mask {self.mask.shape} does not match image {self.pixels.shape[1:]}")
        if not np.all(np.isfinite(self.pixels)):
            raise ValueError("pixel values must be finite")
        if not self.mask.any():
            raise ValueError("mask observes no pixels")

    @property
    def dims(self) -> tuple[int, int]:
        return self.mask.shape


def load_image(path) -> np.ndarray:
    """8-bit grayscale or RGB PNG to a (c, m, n) float tensor in [0, 1]."""
    with Image.open(path) as img:
        if img.mode not in ("L", "RGB"):
            img = img.convert("RGB" if "A" in img.mode or len(img.getbands()) > 2 else "L")
        arr = np.asarray(img, dtype=np.float64) / 255.0
    if arr.ndim == 2:
        return arr[None, :, :]
    return arr.transpose(2, 0, 1)


def save_image(path, pixels: np.ndarray) -> None:
    """Write a (c, m, n) or (m, n) tensor in [0, 1] as an 8-bit PNG,
    rounding half away from zero."""
    pixels = np.asarray(pixels)
    if pixels.ndim == 2:
        pixels = pixels[None]
    data = np.floor(np.clip(pixels, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)
    if data.shape[0] == 1:
        Image.fromarray(data[0], mode="L").save(path)
    elif data.shape[0] == 3:
        Image.fromarray(data.transpose(1, 2, 0), mode="RGB").save(path)
    else:
        raise ShapeError(f"can only write 1- or 3-channel images, got {data.shape[0]}")


def load_mask(path) -> np.ndarray:
    """Mask PNG: zero pixels are missing, anything else observed."""
    with Image.open(path) as img:
        arr = np.asarray(img.convert("L"))
    return arr > 0


def kernel_gram(kernel, coords_a, coords_b) -> np.ndarray:
    """Kernel values between coordinate lists for any kernel flavor."""
    coords_a = np.asarray(coords_a, dtype=np.intp)
    coords_b = np.asarray(coords_b, dtype=np.intp)
    if isinstance(kernel, CompactKernel):
        return materialize_gram(kernel, coords_a, coords_b)
    if isinstance(kernel, FullKernel):
        return kernel.tensor[coords_a[:, 0][:, None], coords_a[:, 1][:, None],
                             coords_b[:, 0][None, :], coords_b[:, 1][None, :]]
    if isinstance(kernel, StationaryKernel):
        m, n = kernel.dims
        di = (coords_a[:, 0][:, None] - coords_b[:, 0][None, :]) % m
        dj = (coords_a[:, 1][:, None] - coords_b[:, 1][None, :]) % n
        return kernel.table[di, dj]
    if isinstance(kernel, np.ndarray) and kernel.ndim == 4:
        return kernel_gram(FullKernel(kernel), coords_a, coords_b)
    raise TypeError(f"unsupported kernel type {type(kernel).__name__}")


def kernel_dims(kernel) -> tuple[int, int]:
    if isinstance(kernel, np.ndarray) and kernel.ndim == 4:
        return kernel.shape[:2]
    return kernel.dims


def inpaint(image: MaskedImage, kernel, opts: SolveOptions | None = None,
            report: SolveReport | None = None) -> np.ndarray:
    """Fill unobserved pixels by kernel regression, channel by channel.

    Observed pixels are copied through unchanged and the result is clipped
    to [0, 1].  All channels share one coefficient solve (multiple right
    hand sides against the same observed-coordinate kernel block).
    """
    opts = opts or SolveOptions()
    if kernel_dims(kernel) != image.dims:
        raise ShapeError(
            f"kernel resolution {kernel_dims(kernel)} does not match image "
            f"{image.dims}")
    out = np.clip(image.pixels, 0.0, 1.0).copy()
    missing = np.argwhere(~image.mask)
    if len(missing) == 0:
        return out
    observed = np.argwhere(image.mask)
    targets = image.pixels[:, image.mask].T          # (n_obs, channels)
    k_obs = kernel_gram(kernel, observed, observed)
    k_cross = kernel_gram(kernel, observed, missing)
    if opts.mode == "iterative":
        coef = iterative_solve(k_obs, targets, opts, report)
    else:
        coef = direct_solve(k_obs, targets, opts, report)
    values = predict(coef, k_cross, opts)            # (n_missing, channels)
    out[:, ~image.mask] = np.clip(values.T, 0.0, 1.0)
    return out


def mean_fill(image: MaskedImage) -> np.ndarray:
    """Baseline: missing pixels take the mean of the observed ones."""
    out = image.pixels.copy()
    for c in range(out.shape[0]):
        out[c, ~image.mask] = out[c, image.mask].mean()
    return out


def heatmap(kernel, i: int, j: int, percentile: float = 0.0) -> np.ndarray:
    """Min-max-normalized kernel row with values below the percentile
    zeroed; the returned (m, n) array is ready to save as a grayscale PNG."""
    if not 0.0 <= percentile < 100.0:
        raise ValueError("percentile must be in [0, 100)")
    m, n = kernel_dims(kernel)
    if not (0 <= i < m and 0 <= j < n):
        raise IndexError(f"({i}, {j}) out of range for {m}x{n} kernel")
    if isinstance(kernel, np.ndarray):
        row = kernel[i, j].copy()
    else:
        row = kernel.row(i, j)
    lo, hi = row.min(), row.max()
    normalized = (row - lo) / (hi - lo) if hi > lo else np.zeros_like(row)
    if percentile > 0.0:
        normalized[normalized < np.percentile(normalized, percentile)] = 0.0
    return normalized
