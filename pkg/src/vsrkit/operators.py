"""Linear operators of the degradation model, with exact adjoints.

The forward model composes blur (correlation-convention convolution with a
replicate boundary), decimation at phase (0, 0), and bilinear warping.
Every linear operator here has an adjoint satisfying
``<A x, y> == <x, A^T y>`` to rounding error, which is what the
normal-equations deconvolver relies on.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage, signal

from .errors import ConfigError, DataIOError, DimensionError
from .frames import Frame, Sequence

__all__ = [
    "BlurKernel",
    "FlowField",
    "DegradationConfig",
    "convolve2d",
    "convolve2d_adjoint",
    "decimate",
    "decimate_adjoint",
    "sk_forward",
    "gradient_h",
    "gradient_v",
    "gradient_h_adjoint",
    "gradient_v_adjoint",
    "warp",
    "degrade",
    "read_kernel",
    "write_kernel",
]

KERNEL_SUM_TOL = 1e-8


@dataclass(frozen=True)
class BlurKernel:
    """Square blur kernel: odd size, nonnegative taps summing to one."""

    taps: np.ndarray

    def __post_init__(self):
        taps = np.asarray(self.taps, dtype=np.float64)
        if taps.ndim != 2 or taps.shape[0] != taps.shape[1]:
            raise ConfigError(f"kernel taps must be square, got shape {taps.shape}")
        if taps.shape[0] % 2 == 0:
            raise ConfigError(f"kernel size must be odd, got {taps.shape[0]}")
        if not np.all(np.isfinite(taps)):
            raise ConfigError("kernel taps must be finite")
        if np.any(taps < 0):
            raise ConfigError("kernel taps must be nonnegative")
        if abs(float(taps.sum()) - 1.0) > KERNEL_SUM_TOL:
            raise ConfigError(f"kernel taps must sum to 1, got {taps.sum():.12g}")
        object.__setattr__(self, "taps", taps)

    @property
    def size(self) -> int:
        return self.taps.shape[0]

    @classmethod
    def delta(cls, size: int = 15) -> "BlurKernel":
        taps = np.zeros((size, size))
        taps[size // 2, size // 2] = 1.0
        return cls(taps)


@dataclass(frozen=True)
class FlowField:
    """Per-pixel displacement; ``vectors[y, x] = (u, v)`` in pixels.

    u is horizontal (+x right), v vertical (+y down). Warping samples the
    source at ``(x + u, y + v)``.
    """

    vectors: np.ndarray

    def __post_init__(self):
        vec = np.asarray(self.vectors, dtype=np.float64)
        if vec.ndim != 3 or vec.shape[2] != 2:
            raise DimensionError(f"flow field must be (H, W, 2), got {vec.shape}")
        if not np.all(np.isfinite(vec)):
            raise ValueError("flow field must be finite everywhere")
        object.__setattr__(self, "vectors", vec)

    @property
    def height(self) -> int:
        return self.vectors.shape[0]

    @property
    def width(self) -> int:
        return self.vectors.shape[1]

    @classmethod
    def zero(cls, height: int, width: int) -> "FlowField":
        return cls(np.zeros((height, width, 2)))

    @classmethod
    def uniform(cls, height: int, width: int, u: float, v: float) -> "FlowField":
        vec = np.empty((height, width, 2))
        vec[..., 0] = u
        vec[..., 1] = v
        return cls(vec)


@dataclass(frozen=True)
class DegradationConfig:
    """Forward-model parameters: scale s, kernel K, noise level, seed."""

    kernel: BlurKernel
    scale: int = 4
    noise_std: float = 0.0
    boundary: str = "replicate"
    rng_seed: int = 0

    def __post_init__(self):
        if self.scale < 1:
            raise ConfigError(f"scale must be >= 1, got {self.scale}")
        if self.noise_std < 0:
            raise ConfigError(f"noise_std must be >= 0, got {self.noise_std}")
        _check_boundary(self.boundary)


def _check_boundary(boundary: str) -> None:
    if boundary != "replicate":
        raise ConfigError(f"unsupported boundary mode {boundary!r} (only 'replicate')")


def convolve2d(src: Frame, kernel: BlurKernel, boundary: str = "replicate") -> Frame:
    """Correlation-convention convolution per channel, replicate boundary.

    Output dimensions equal input dimensions; no clamping (linear).
    """
    _check_boundary(boundary)
    out = np.empty_like(src.data)
    for c in range(src.channels):
        out[:, :, c] = ndimage.correlate(src.data[:, :, c], kernel.taps, mode="nearest")
    return Frame(out)


def _fold_axis(arr: np.ndarray, r: int, axis: int) -> np.ndarray:
    """Adjoint of replicate-padding one axis by r: fold borders onto edges."""
    if r == 0:
        return arr
    a = np.moveaxis(arr, axis, 0)
    n = a.shape[0] - 2 * r
    out = a[r : r + n].copy()
    out[0] += a[:r].sum(axis=0)
    out[n - 1] += a[r + n :].sum(axis=0)
    return np.moveaxis(out, 0, axis)


def convolve2d_adjoint(src: Frame, kernel: BlurKernel, boundary: str = "replicate") -> Frame:
    """Exact adjoint of :func:`convolve2d` under replicate padding.

    Computed as full convolution followed by folding the padded borders
    back onto the clamped edge rows/columns (the adjoint of edge padding).
    """
    _check_boundary(boundary)
    r = kernel.size // 2
    out = np.empty_like(src.data)
    for c in range(src.channels):
        full = signal.convolve(src.data[:, :, c], kernel.taps, mode="full", method="direct")
        full = _fold_axis(full, r, axis=0)
        out[:, :, c] = _fold_axis(full, r, axis=1)
    return Frame(out)


def _check_scale(s) -> int:
    if not isinstance(s, (int, np.integer)) or s < 1:
        raise ConfigError(f"scale must be a positive integer, got {s!r}")
    return int(s)


def decimate(src: Frame, s: int) -> Frame:
    """Keep samples at positions (s*i, s*j) — phase offset (0, 0)."""
    s = _check_scale(s)
    if src.height % s or src.width % s:
        raise DimensionError(
            f"dimensions {src.height}x{src.width} not divisible by scale {s}"
        )
    return Frame(src.data[::s, ::s].copy())


def decimate_adjoint(src: Frame, s: int) -> Frame:
    """Zero-filled upsampling: value at (s*i, s*j), zeros elsewhere."""
    s = _check_scale(s)
    out = np.zeros((src.height * s, src.width * s, src.channels))
    out[::s, ::s] = src.data
    return Frame(out)


def sk_forward(hr: Frame, kernel: BlurKernel, s: int) -> Frame:
    """Blur then decimate: the S*K factor of the degradation model."""
    return decimate(convolve2d(hr, kernel), s)


def gradient_h(src: Frame) -> Frame:
    """Horizontal forward difference x(i, j+1) - x(i, j); zero at the last column."""
    out = np.zeros_like(src.data)
    out[:, :-1] = src.data[:, 1:] - src.data[:, :-1]
    return Frame(out)


def gradient_v(src: Frame) -> Frame:
    """Vertical forward difference x(i+1, j) - x(i, j); zero at the last row."""
    out = np.zeros_like(src.data)
    out[:-1] = src.data[1:] - src.data[:-1]
    return Frame(out)


def gradient_h_adjoint(src: Frame) -> Frame:
    """Exact adjoint of :func:`gradient_h` (negative backward difference)."""
    y = src.data
    out = np.zeros_like(y)
    out[:, 1:] += y[:, :-1]
    out[:, :-1] -= y[:, :-1]
    return Frame(out)


def gradient_v_adjoint(src: Frame) -> Frame:
    """Exact adjoint of :func:`gradient_v`."""
    y = src.data
    out = np.zeros_like(y)
    out[1:] += y[:-1]
    out[:-1] -= y[:-1]
    return Frame(out)


def warp(src: Frame, flow: FlowField) -> Frame:
    """Backward warp: out(x) = src(x + u(x)) with bilinear sampling.

    Source coordinates outside the image use the replicate boundary.
    Linear in the image argument for a fixed flow.
    """
    h, w, _ = src.shape
    if (flow.height, flow.width) != (h, w):
        raise DimensionError(
            f"flow dims {flow.height}x{flow.width} do not match frame {h}x{w}"
        )
    xs = np.arange(w)[None, :] + flow.vectors[..., 0]
    ys = np.arange(h)[:, None] + flow.vectors[..., 1]
    xs = np.clip(xs, 0.0, w - 1.0)
    ys = np.clip(ys, 0.0, h - 1.0)
    x0 = np.clip(np.floor(xs), 0, max(w - 2, 0)).astype(np.intp)
    y0 = np.clip(np.floor(ys), 0, max(h - 2, 0)).astype(np.intp)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    tx = (xs - x0)[..., None]
    ty = (ys - y0)[..., None]
    d = src.data
    top = (1.0 - tx) * d[y0, x0] + tx * d[y0, x1]
    bot = (1.0 - tx) * d[y1, x0] + tx * d[y1, x1]
    return Frame((1.0 - ty) * top + ty * bot)


def degrade(
    hr_seq: Sequence,
    flows_to_ref: list[FlowField | None],
    cfg: DegradationConfig,
) -> Sequence:
    """Synthesize LR frames: warp, blur, decimate, add seeded Gaussian noise.

    ``flows_to_ref[j]`` warps frame j before blurring; ``None`` means the
    identity flow (the reference frame's own position). Output is clamped
    to [0, 1]; a fixed ``rng_seed`` makes the result bit-reproducible.
    """
    if len(flows_to_ref) != len(hr_seq):
        raise DimensionError(
            f"{len(flows_to_ref)} flows for {len(hr_seq)} frames; counts must match"
        )
    rng = np.random.default_rng(cfg.rng_seed)
    out = []
    for frame, flow in zip(hr_seq, flows_to_ref):
        moved = frame if flow is None else warp(frame, flow)
        lr = sk_forward(moved, cfg.kernel, cfg.scale)
        data = lr.data
        if cfg.noise_std > 0:
            data = data + rng.normal(0.0, cfg.noise_std, size=data.shape)
        out.append(clamp01_array(data))
    return Sequence(tuple(out))


def clamp01_array(data: np.ndarray) -> Frame:
    return Frame(np.clip(data, 0.0, 1.0))


def write_kernel(path, kernel: BlurKernel) -> None:
    """Kernel text format: line 1 ``K <k>``, then k rows of k decimal reals."""
    lines = [f"K {kernel.size}"]
    for row in kernel.taps:
        lines.append(" ".join(repr(float(v)) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def read_kernel(path) -> BlurKernel:
    """Parse the kernel text format, enforcing kernel invariants."""
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise DataIOError(f"cannot read kernel file {path}: {e}") from e
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise DataIOError(f"kernel file {path} is empty")
    head = lines[0].split()
    if len(head) != 2 or head[0] != "K":
        raise DataIOError(f"kernel file {path}: first line must be 'K <size>'")
    try:
        k = int(head[1])
    except ValueError as e:
        raise DataIOError(f"kernel file {path}: bad size {head[1]!r}") from e
    if len(lines) != 1 + k:
        raise DataIOError(f"kernel file {path}: expected {k} tap rows, got {len(lines) - 1}")
    try:
        taps = np.array([[float(v) for v in ln.split()] for ln in lines[1:]])
    except ValueError as e:
        raise DataIOError(f"kernel file {path}: non-numeric tap") from e
    if taps.shape != (k, k):
        raise DataIOError(f"kernel file {path}: tap grid is {taps.shape}, expected ({k}, {k})")
    return BlurKernel(taps)
