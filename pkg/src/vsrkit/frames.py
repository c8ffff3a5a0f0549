"""Image containers, resampling, and block/channel rearrangement.

Frames hold float64 samples in a nominal [0, 1] range. Samples are only
clamped at declared points (after a resize, at the final pipeline output);
linear operators never clamp, which keeps adjoint identities exact.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DimensionError

__all__ = [
    "Frame",
    "Sequence",
    "bicubic_resize",
    "space_to_depth",
    "depth_to_space",
    "clamp01",
    "luminance",
]


@dataclass(frozen=True)
class Frame:
    """A single image: (height, width, channels) float64 samples.

    All samples must be finite. 2-D input is promoted to a single channel.
    Instances are treated as immutable; operations return new frames.
    """

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim == 2:
            arr = arr[:, :, None]
        if arr.ndim != 3 or min(arr.shape) < 1:
            raise DimensionError(
                f"frame data must be (height, width, channels), got shape {np.shape(self.data)}"
            )
        if not np.all(np.isfinite(arr)):
            raise ValueError("frame samples must be finite (no NaN/Inf)")
        object.__setattr__(self, "data", arr)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.data.shape


@dataclass(frozen=True)
class Sequence:
    """An ordered, non-empty list of frames with identical dimensions."""

    frames: tuple[Frame, ...]

    def __post_init__(self):
        frames = tuple(self.frames)
        if not frames:
            raise DimensionError("sequence must contain at least one frame")
        shape = frames[0].shape
        for i, f in enumerate(frames):
            if f.shape != shape:
                raise DimensionError(
                    f"frame {i} has shape {f.shape}, expected {shape}"
                )
        object.__setattr__(self, "frames", frames)

    def __len__(self) -> int:
        return len(self.frames)

    def __iter__(self):
        return iter(self.frames)

    def __getitem__(self, i: int) -> Frame:
        return self.frames[i]


def _catmull_rom_weight(x: np.ndarray) -> np.ndarray:
    """Cubic convolution weight with a = -0.5 (Catmull-Rom)."""
    ax = np.abs(x)
    near = (1.5 * ax - 2.5) * ax * ax + 1.0
    far = ((-0.5 * ax + 2.5) * ax - 4.0) * ax + 2.0
    return np.where(ax <= 1.0, near, np.where(ax <= 2.0, far, 0.0))


def _resize_axis(arr: np.ndarray, out_n: int, axis: int) -> np.ndarray:
    """Separable Catmull-Rom resampling of one axis to ``out_n`` samples.

    Source coordinates follow the half-pixel-center convention
    ``src = (dst + 0.5) * (n / out_n) - 0.5`` with replicate boundary.
    """
    n = arr.shape[axis]
    pos = (np.arange(out_n) + 0.5) * (n / out_n) - 0.5
    base = np.floor(pos)
    moved = np.moveaxis(arr, axis, 0)
    acc = np.zeros((out_n,) + moved.shape[1:], dtype=np.float64)
    wshape = (out_n,) + (1,) * (moved.ndim - 1)
    for m in (-1, 0, 1, 2):
        idx = np.clip(base + m, 0, n - 1).astype(np.intp)
        w = _catmull_rom_weight(pos - (base + m))
        acc += w.reshape(wshape) * moved[idx]
    return np.moveaxis(acc, 0, axis)


def bicubic_resize(src: Frame, scale: float) -> Frame:
    """Resample a frame by ``scale`` with separable Catmull-Rom interpolation.

    Output dimensions are ``round(dim * scale)`` (half-up); the result is
    clamped to [0, 1]. ``scale == 1`` is the exact identity.
    """
    if not scale > 0:
        raise ConfigError(f"resize scale must be positive, got {scale}")
    out_h = int(np.floor(src.height * scale + 0.5))
    out_w = int(np.floor(src.width * scale + 0.5))
    if out_h < 1 or out_w < 1:
        raise DimensionError(
            f"resize of {src.height}x{src.width} by {scale} yields an empty image"
        )
    out = _resize_axis(src.data, out_h, axis=0)
    out = _resize_axis(out, out_w, axis=1)
    return Frame(np.clip(out, 0.0, 1.0))


def _check_block(s) -> int:
    if not isinstance(s, (int, np.integer)) or s < 1:
        raise ConfigError(f"block factor must be a positive integer, got {s!r}")
    return int(s)


def space_to_depth(src: Frame, s: int) -> Frame:
    """Rearrange each s x s pixel block into channels.

    Block sub-pixel (dy, dx) of source channel c lands in output channel
    ``c*s*s + dy*s + dx`` (raster order within the block, original channels
    outermost).
    """
    s = _check_block(s)
    h, w, c = src.shape
    if h % s or w % s:
        raise DimensionError(f"dimensions {h}x{w} not divisible by block factor {s}")
    a = src.data.reshape(h // s, s, w // s, s, c)
    a = a.transpose(0, 2, 4, 1, 3).reshape(h // s, w // s, c * s * s)
    return Frame(np.ascontiguousarray(a))


def depth_to_space(src: Frame, s: int) -> Frame:
    """Exact inverse of :func:`space_to_depth`."""
    s = _check_block(s)
    h, w, c = src.shape
    if c % (s * s):
        raise DimensionError(f"channel count {c} not divisible by {s}*{s}")
    c0 = c // (s * s)
    a = src.data.reshape(h, w, c0, s, s)
    a = a.transpose(0, 3, 1, 4, 2).reshape(h * s, w * s, c0)
    return Frame(np.ascontiguousarray(a))


def clamp01(src: Frame) -> Frame:
    """Clamp every sample to [0, 1]."""
    return Frame(np.clip(src.data, 0.0, 1.0))


def luminance(src: Frame) -> np.ndarray:
    """Rec.601 luma as a 2-D array; single-channel frames pass through."""
    if src.channels == 1:
        return src.data[:, :, 0]
    if src.channels == 3:
        r, g, b = src.data[:, :, 0], src.data[:, :, 1], src.data[:, :, 2]
        return 0.299 * r + 0.587 * g + 0.114 * b
    raise DimensionError(f"luminance undefined for {src.channels}-channel frame")
