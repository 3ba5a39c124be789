"""Binary kernel files.

Little-endian layout: magic "NTKC", version u32, flags u32, s u32,
p2 u32, rho f64, arch hash (32 bytes), then the row-major f64 payload.
Flags mark the payload as a compact store or a full tensor; square
power-of-two full kernels encode their resolution as p2, anything else
sets the rect-dims flag and prefixes the payload with m, n as two u32.
Round-trips are bit-exact.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import KernelFormatError, ShapeError
from .expand import CompactKernel

MAGIC = b"NTKC"
VERSION = 1
FLAG_COMPACT = 1
FLAG_FULL = 2
FLAG_RECT = 4
# marks a full kernel whose build satisfied the expansion hypotheses
FLAG_EXPANDABLE = 8

_HEADER = struct.Struct("<4sIIIId32s")


@dataclass(frozen=True)
class FullKernel:
    """A fully materialized kernel tensor with its file metadata."""

    tensor: np.ndarray          # (m, n, m, n)
    s: int = 0
    rho: float = float("nan")
    arch_hash: bytes = b"\x00" * 32
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self) -> None:
        if self.tensor.ndim != 4 or self.tensor.shape[:2] != self.tensor.shape[2:]:
            raise ShapeError(f"kernel tensor must be (m, n, m, n), got {self.tensor.shape}")
        if len(self.arch_hash) != 32:
            raise ValueError("arch hash must be 32 bytes")

    @property
    def dims(self) -> tuple[int, int]:
        return self.tensor.shape[:2]

    def row(self, i: int, j: int) -> np.ndarray:
        m, n = self.dims
        if not (0 <= i < m and 0 <= j < n):
            raise IndexError(f"({i}, {j}) out of range for {m}x{n}")
        return self.tensor[i, j].copy()

    def as_matrix(self) -> np.ndarray:
        m, n = self.dims
        return self.tensor.reshape(m * n, m * n)


def save_kernel(path, kernel: CompactKernel | FullKernel, extra_flags: int = 0) -> None:
    with open(path, "wb") as fh:
        if isinstance(kernel, CompactKernel):
            p2 = int(kernel.d2).bit_length() - 1
            fh.write(_HEADER.pack(MAGIC, VERSION, FLAG_COMPACT | extra_flags,
                                  kernel.s, p2, kernel.rho, kernel.arch_hash))
            fh.write(np.ascontiguousarray(kernel.rows, dtype="<f8").tobytes())
        elif isinstance(kernel, FullKernel):
            m, n = kernel.dims
            square_pow2 = m == n and m >= 1 and (m & (m - 1)) == 0
            flags = (FLAG_FULL if square_pow2 else FLAG_FULL | FLAG_RECT) | extra_flags
            p2 = m.bit_length() - 1 if square_pow2 else 0
            fh.write(_HEADER.pack(MAGIC, VERSION, flags, kernel.s, p2,
                                  kernel.rho, kernel.arch_hash))
            if not square_pow2:
                fh.write(struct.pack("<II", m, n))
            fh.write(np.ascontiguousarray(kernel.tensor, dtype="<f8").tobytes())
        else:
            raise TypeError(f"cannot serialize {type(kernel).__name__}")


def load_kernel(path) -> CompactKernel | FullKernel:
    with open(path, "rb") as fh:
        header = fh.read(_HEADER.size)
        if len(header) < _HEADER.size:
            raise KernelFormatError(f"{path}: truncated header")
        magic, version, flags, s, p2, rho, arch_hash = _HEADER.unpack(header)
        if magic != MAGIC:
            raise KernelFormatError(f"{path}: bad magic {magic!r}")
        if version != VERSION:
            raise KernelFormatError(f"{path}: unsupported version {version}")
        if flags & FLAG_COMPACT:
            d2 = 1 << p2
            p = 1 << s
            rows = _read_payload(fh, path, (p, p, d2, d2))
            return CompactKernel(rows, s, d2, rho, arch_hash)
        if flags & FLAG_FULL:
            if flags & FLAG_RECT:
                dims_raw = fh.read(8)
                if len(dims_raw) < 8:
                    raise KernelFormatError(f"{path}: truncated dims")
                m, n = struct.unpack("<II", dims_raw)
            else:
                m = n = 1 << p2
            tensor = _read_payload(fh, path, (m, n, m, n))
            return FullKernel(tensor, s, rho, arch_hash,
                              meta={"expandable": bool(flags & FLAG_EXPANDABLE)})
        raise KernelFormatError(f"{path}: unknown flags {flags:#x}")


def _read_payload(fh, path, shape) -> np.ndarray:
    count = int(np.prod(shape))
    data = np.fromfile(fh, dtype="<f8", count=count)
    if data.size != count:
        raise KernelFormatError(
            f"{path}: payload holds {data.size} values, expected {count}")
    if fh.read(1):
        raise KernelFormatError(f"{path}: trailing bytes after payload")
    return data.reshape(shape).astype(np.float64, copy=False)
