"""Exact convolutional kernel recursion for encoder/decoder architectures.

State tensors are indexed by coordinate pairs, T[i, j, i', j'], and are
propagated through three primitive layer transforms:

  * activation: replace the covariance by its normalized dual transform
    and fold the dual derivative into the running kernel,
  * convolution: window-sum both tensors over the (circular) q x q
    filter support, with a 1/q^2 normalization on every convolution
    after the first,
  * down/upsampling: pure index maps on all tensors.

A trailing output convolution (same filter size as the last one listed)
is implied whenever an architecture does not end with a conv layer, so
`conv q=3 / act relu` describes the usual one-hidden-layer network.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .activations import Activation, dual, dual_derivative, kappa
from .errors import DegeneratePriorError, ShapeError
from .priors import ImagePrior

STATIONARITY_TOL = 1e-10


# ---------------------------------------------------------------------------
# architecture description


@dataclass(frozen=True)
class Conv:
    q: int

    def __post_init__(self) -> None:
        if self.q < 1 or self.q % 2 == 0:
            raise ValueError(f"filter size must be odd and positive, got {self.q}")

    def __str__(self) -> str:
        return f"conv q={self.q}"


@dataclass(frozen=True)
class Act:
    activation: Activation

    def __str__(self) -> str:
        if self.activation.kind == "leaky_relu":
            return f"act leaky_relu slope={self.activation.slope}"
        return f"act {self.activation.kind}"


@dataclass(frozen=True)
class Downsample:
    def __str__(self) -> str:
        return "down"


@dataclass(frozen=True)
class UpsampleNearest:
    def __str__(self) -> str:
        return "up nearest"


@dataclass(frozen=True)
class UpsampleBilinear:
    def __str__(self) -> str:
        return "up bilinear"


@dataclass(frozen=True)
class ArchSpec:
    """Ordered layer list plus the input resolution it operates on."""

    layers: tuple
    input_shape: tuple[int, int]

    def __post_init__(self) -> None:
        object.__setattr__(self, "layers", tuple(self.layers))
        object.__setattr__(self, "input_shape", tuple(self.input_shape))
        if not self.layers:
            raise ValueError("architecture needs at least one layer")
        if not isinstance(self.layers[0], Conv):
            raise ShapeError("the first layer must be a conv")
        self.shape_trace()

    def shape_trace(self) -> list[tuple[int, int]]:
        """Dry-run the layer list, returning dims after each layer."""
        m, n = self.input_shape
        if m < 1 or n < 1:
            raise ShapeError(f"input shape {self.input_shape} is not positive")
        trace = []
        for pos, layer in enumerate(self.layers):
            if isinstance(layer, Downsample):
                if m % 2 or n % 2:
                    raise ShapeError(
                        f"layer {pos} ({layer}): cannot halve odd dims {m}x{n}")
                m, n = m // 2, n // 2
            elif isinstance(layer, (UpsampleNearest, UpsampleBilinear)):
                m, n = 2 * m, 2 * n
            trace.append((m, n))
        return trace

    def sampling_counts(self) -> tuple[int, int, int]:
        downs = sum(isinstance(l, Downsample) for l in self.layers)
        nearest = sum(isinstance(l, UpsampleNearest) for l in self.layers)
        bilinear = sum(isinstance(l, UpsampleBilinear) for l in self.layers)
        return downs, nearest, bilinear

    def conv_sizes(self) -> list[int]:
        return [l.q for l in self.layers if isinstance(l, Conv)]

    def activations(self) -> list[Activation]:
        return [l.activation for l in self.layers if isinstance(l, Act)]

    def canonical_text(self) -> str:
        m, n = self.input_shape
        return "\n".join([f"input {m}x{n}"] + [str(l) for l in self.layers]) + "\n"

    def arch_hash(self) -> bytes:
        return hashlib.sha256(self.canonical_text().encode()).digest()

    @classmethod
    def from_text(cls, text: str) -> "ArchSpec":
        """Parse the one-layer-per-line format; '#' starts a comment."""
        shape = None
        layers = []
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            tokens = line.split()
            try:
                if tokens[0] == "input":
                    m, n = tokens[1].lower().split("x")
                    shape = (int(m), int(n))
                elif tokens[0] == "conv":
                    layers.append(Conv(int(_keyval(tokens[1], "q"))))
                elif tokens[0] == "act":
                    layers.append(Act(_parse_activation(tokens[1:])))
                elif tokens[0] == "down":
                    layers.append(Downsample())
                elif tokens[0] == "up":
                    if tokens[1] == "nearest":
                        layers.append(UpsampleNearest())
                    elif tokens[1] == "bilinear":
                        layers.append(UpsampleBilinear())
                    else:
                        raise ValueError(f"unknown upsampling {tokens[1]!r}")
                else:
                    raise ValueError(f"unknown layer {tokens[0]!r}")
            except (IndexError, ValueError) as exc:
                raise ValueError(f"arch line {lineno}: {raw.strip()!r}: {exc}") from None
        if shape is None:
            raise ValueError("missing 'input MxN' line")
        return cls(tuple(layers), shape)

    @classmethod
    def from_file(cls, path) -> "ArchSpec":
        with open(path) as fh:
            return cls.from_text(fh.read())


def _keyval(token: str, key: str) -> str:
    k, _, v = token.partition("=")
    if k != key or not v:
        raise ValueError(f"expected {key}=..., got {token!r}")
    return v


def _parse_activation(tokens) -> Activation:
    kind = tokens[0]
    if kind == "relu":
        return Activation.relu()
    if kind == "linear":
        return Activation.linear()
    if kind == "leaky_relu":
        return Activation.leaky_relu(float(_keyval(tokens[1], "slope")))
    raise ValueError(f"unknown activation {kind!r}")


# ---------------------------------------------------------------------------
# state and layer transforms


@dataclass
class CntkState:
    """Covariance, transient dual derivative, and kernel tensors."""

    sigma: np.ndarray
    sigma_dot: np.ndarray | None
    k: np.ndarray
    dims: tuple[int, int]
    clamp_count: int = 0


def window_sum(tensor: np.ndarray, q: int) -> np.ndarray:
    """Sum the tensor over diagonal window shifts (circular indexing):
    out[i,j,i',j'] = sum_{|a|,|b| <= (q-1)/2} T[i+a, j+b, i'+a, j'+b]."""
    alpha = (q - 1) // 2
    out = np.zeros_like(tensor)
    for a in range(-alpha, alpha + 1):
        for b in range(-alpha, alpha + 1):
            out += np.roll(tensor, shift=(-a, -b, -a, -b), axis=(0, 1, 2, 3))
    return out


def init_state(prior: ImagePrior, q: int) -> CntkState:
    """Windowed channel inner products of the prior (the first conv)."""
    Conv(q)  # validate q
    m, n = prior.shape
    if prior.is_analytic:
        sigma = np.full((m, n, m, n), q * q * prior.rho)
        ii, jj = np.meshgrid(np.arange(m), np.arange(n), indexing="ij")
        sigma[ii, jj, ii, jj] = q * q
    else:
        sigma = window_sum(prior.pixel_gram(), q)
    diag = np.einsum("ijij->ij", sigma)
    if np.any(diag <= 0.0):
        i, j = np.argwhere(diag <= 0.0)[0]
        raise DegeneratePriorError(
            f"prior has zero self-correlation at pixel ({i}, {j})")
    return CntkState(sigma, None, sigma.copy(), (m, n))


def _activation_update(state: CntkState, act: Activation) -> CntkState:
    diag = np.einsum("ijij->ij", state.sigma)
    norm = np.sqrt(np.einsum("ij,kl->ijkl", diag, diag))
    ratio = state.sigma / norm
    clamps = int(np.count_nonzero(np.abs(ratio) > 1.0))
    ratio = np.clip(ratio, -1.0, 1.0)
    sigma = norm * np.asarray(dual(act, ratio))
    sigma_dot = np.asarray(dual_derivative(act, ratio))
    k = sigma + sigma_dot * state.k
    return CntkState(sigma, sigma_dot, k, state.dims,
                     state.clamp_count + clamps)


def _conv_update(state: CntkState, q: int) -> CntkState:
    Conv(q)
    scale = 1.0 / (q * q)
    return CntkState(scale * window_sum(state.sigma, q), None,
                     scale * window_sum(state.k, q), state.dims,
                     state.clamp_count)


def conv_activation_update(state: CntkState, q: int, act: Activation) -> CntkState:
    """One hidden layer: dual transform, then q x q window aggregation.

    The new covariance is the normalized dual of the previous windowed
    correlations; the new kernel window-sums sigma_new + sigma_dot * k_old
    with the 1/q^2 convolution normalization.
    """
    return _conv_update(_activation_update(state, act), q)


def _map_tensors(state: CntkState, fn, dims) -> CntkState:
    return CntkState(fn(state.sigma),
                     None if state.sigma_dot is None else fn(state.sigma_dot),
                     fn(state.k), dims, state.clamp_count)


def downsample(state: CntkState) -> CntkState:
    """Stride-2 subsampling: keep even coordinates on all tensors."""
    m, n = state.dims
    if m % 2 or n % 2:
        raise ShapeError(f"cannot downsample odd dims {m}x{n}")
    return _map_tensors(state, lambda t: t[::2, ::2, ::2, ::2].copy(),
                        (m // 2, n // 2))


def upsample_nearest(state: CntkState) -> CntkState:
    """Nearest-neighbor factor-2 upsampling: floor-index replication."""
    m, n = state.dims

    def rep(t):
        return t.repeat(2, 0).repeat(2, 1).repeat(2, 2).repeat(2, 3)

    return _map_tensors(state, rep, (2 * m, 2 * n))


def bilinear_weight_matrix(d: int) -> np.ndarray:
    """Sparse-in-structure (2d x d) interpolation weights for factor-2
    bilinear upsampling.

    Output pixel i sits at position i*alpha, alpha = (d-1)/(2d-1), between
    input cells r and r+1; weights are exact rationals over (2d-1) so each
    row sums to one exactly.
    """
    w = np.zeros((2 * d, d))
    denom = 2 * d - 1
    for i in range(2 * d):
        num = i * (d - 1)
        r = num // denom
        lam = (num - r * denom) / denom
        w[i, r] += 1.0 - lam
        if lam > 0.0:
            w[i, min(r + 1, d - 1)] += lam
    return w


def upsample_bilinear(state: CntkState) -> CntkState:
    """Factor-2 bilinear upsampling as a quadratic form in the weights."""
    m, n = state.dims
    wm, wn = bilinear_weight_matrix(m), bilinear_weight_matrix(n)

    def lift(t):
        return np.einsum("iu,jv,kw,lx,uvwx->ijkl", wm, wn, wm, wn, t,
                         optimize=True)

    return _map_tensors(state, lift, (2 * m, 2 * n))


# ---------------------------------------------------------------------------
# full builds


def build_cntk(arch: ArchSpec, prior: ImagePrior, as_matrix: bool = False):
    """Run the layer recursion and return the final kernel tensor.

    Returns the (m, n, m, n) tensor, or the reshaped (mn, mn) matrix view
    when as_matrix is set.  An output conv with the last listed filter size
    is appended when the architecture does not end in a conv.
    """
    if tuple(prior.shape) != tuple(arch.input_shape):
        raise ShapeError(
            f"prior resolution {prior.shape} does not match arch input "
            f"{arch.input_shape}")
    state: CntkState | None = None
    last_q = None
    for pos, layer in enumerate(arch.layers):
        try:
            if isinstance(layer, Conv):
                state = init_state(prior, layer.q) if state is None \
                    else _conv_update(state, layer.q)
                last_q = layer.q
            elif isinstance(layer, Act):
                state = _activation_update(state, layer.activation)
            elif isinstance(layer, Downsample):
                state = downsample(state)
            elif isinstance(layer, UpsampleNearest):
                state = upsample_nearest(state)
            elif isinstance(layer, UpsampleBilinear):
                state = upsample_bilinear(state)
            else:
                raise TypeError(f"unknown layer type {type(layer).__name__}")
        except ShapeError as exc:
            raise ShapeError(f"layer {pos} ({layer}): {exc}") from None
    if not isinstance(arch.layers[-1], Conv):
        state = _conv_update(state, last_q)
    kernel = state.k
    m, n = state.dims
    if (m, n) != tuple(arch.input_shape):
        raise ShapeError(
            f"architecture maps {arch.input_shape} to {(m, n)}; kernels for "
            "completion need matching input and output resolutions")
    if as_matrix:
        return kernel.reshape(m * n, m * n)
    return kernel


# ---------------------------------------------------------------------------
# stationary fast path


@dataclass(frozen=True)
class StationaryKernel:
    """Offset-indexed kernel table: K(i,j,i',j') = table[(i-i')%m, (j-j')%n]."""

    table: np.ndarray
    dims: tuple[int, int]

    def __post_init__(self) -> None:
        m, n = self.dims
        if self.table.shape != (m, n):
            raise ShapeError("offset table must match dims")
        row_flip = self.table[(-np.arange(m)) % m, :]
        col_flip = self.table[:, (-np.arange(n)) % n]
        if not (np.allclose(self.table, row_flip, atol=1e-10)
                and np.allclose(self.table, col_flip, atol=1e-10)):
            raise ValueError(
                "offset table must be circularly symmetric in each axis")
        if self.table[0, 0] < self.table.max() - 1e-12:
            raise ValueError("offset table must attain its maximum at (0, 0)")

    def query(self, i: int, j: int, i2: int, j2: int) -> float:
        m, n = self.dims
        return float(self.table[(i - i2) % m, (j - j2) % n])

    def row(self, i: int, j: int) -> np.ndarray:
        m, n = self.dims
        return self.table[(i - np.arange(m)[:, None]) % m,
                          (j - np.arange(n)[None, :]) % n]

    def to_tensor(self) -> np.ndarray:
        m, n = self.dims
        out = np.empty((m, n, m, n))
        for i in range(m):
            for j in range(n):
                out[i, j] = self.row(i, j)
        return out


def prior_offset_correlation(prior: ImagePrior, q: int) -> np.ndarray:
    """The windowed-product offset table psi, validating stationarity.

    For analytic priors psi is q^2 on the zero offset and q^2 * rho
    elsewhere; explicit priors must have shift-invariant channel inner
    products within STATIONARITY_TOL.
    """
    m, n = prior.shape
    if prior.is_analytic:
        psi = np.full((m, n), q * q * prior.rho)
        psi[0, 0] = q * q
        return psi
    gram = prior.pixel_gram()
    gamma = gram[0, 0]  # candidate offset table, gamma[di, dj]
    ii, jj = np.meshgrid(np.arange(m), np.arange(n), indexing="ij")
    for di in range(m):
        for dj in range(n):
            values = gram[ii, jj, (ii + di) % m, (jj + dj) % n]
            if np.max(np.abs(values - gamma[di, dj])) > STATIONARITY_TOL:
                raise ValueError(
                    f"prior is not stationary at offset ({di}, {dj})")
    if gamma[0, 0] < gamma.max():
        raise ValueError("stationary prior must peak at zero offset")
    return q * q * gamma


def build_stationary(arch: ArchSpec, prior: ImagePrior) -> StationaryKernel:
    """Offset-table kernel via the scalar depth recursion (no sampling
    layers allowed; all convs share one filter size and one activation)."""
    downs, nearest, bilinear = arch.sampling_counts()
    if downs or nearest or bilinear:
        raise ShapeError("stationary path supports conv/act layers only")
    sizes = set(arch.conv_sizes())
    if len(sizes) != 1:
        raise ValueError("stationary path requires a single filter size")
    acts = arch.activations()
    if len({str(a) for a in acts}) > 1:
        raise ValueError("stationary path requires a single activation")
    q = sizes.pop()
    depth = len(acts)
    psi = prior_offset_correlation(prior, q)
    peak = psi[0, 0]
    if depth == 0:
        table = psi.copy()
    else:
        table = peak * np.asarray(kappa(acts[0], depth, psi / peak))
    return StationaryKernel(table, tuple(prior.shape))


def kernel_row(kernel: np.ndarray, i: int, j: int) -> np.ndarray:
    """Copy of the (m, n) slice K[i, j, :, :]."""
    m, n = kernel.shape[:2]
    if not (0 <= i < m and 0 <= j < n):
        raise IndexError(f"({i}, {j}) out of range for {m}x{n} kernel")
    return kernel[i, j].copy()
