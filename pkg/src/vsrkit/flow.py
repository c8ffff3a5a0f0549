"""Optical flow estimation and warped guide generation.

A coarse-to-fine Horn-Schunck estimator with incremental warping stands in
behind the flow interface; precomputed flow files (``external`` mode,
Middlebury .flo) can be supplied instead so any external estimator can
drive the same pipeline. Flow is always computed on bicubic-upsampled
frames, never on the deconvolved intermediate, since the intermediate may
carry artifacts that corrupt the data term.
"""

from __future__ import annotations

import logging
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

from .errors import ConfigError, DataIOError, DimensionError
from .frames import Frame, bicubic_resize, luminance
from .frames import _resize_axis  # shared Catmull-Rom resampler
from .operators import FlowField, warp

__all__ = [
    "FlowConfig",
    "estimate_flow",
    "align_guides",
    "read_flo",
    "write_flo",
    "FLO_MAGIC",
]

log = logging.getLogger(__name__)

FLO_MAGIC = 202021.25

# Horn-Schunck 2x2 derivative stencils and the 6/12-weighted Jacobi average.
_KX = 0.25 * np.array([[-1.0, 1.0], [-1.0, 1.0]])
_KY = 0.25 * np.array([[-1.0, -1.0], [1.0, 1.0]])
_KT = 0.25 * np.ones((2, 2))
_AVG = np.array(
    [[1 / 12, 1 / 6, 1 / 12], [1 / 6, 0.0, 1 / 6], [1 / 12, 1 / 6, 1 / 12]]
)

# Luminance is scaled to 0..255 inside the estimator so the default
# smoothness weight is in familiar 8-bit gradient units.
_LUMA_SCALE = 255.0


@dataclass(frozen=True)
class FlowConfig:
    estimator: str = "horn-schunck-pyramidal"
    pyramid_levels: int = 4
    smoothness_weight: float = 15.0
    iters_per_level: int = 100
    warp_steps_per_level: int = 3
    external_dir: str = ""

    def __post_init__(self):
        if self.estimator not in ("horn-schunck-pyramidal", "external"):
            raise ConfigError(f"unknown flow estimator {self.estimator!r}")
        if self.pyramid_levels < 1:
            raise ConfigError(f"pyramid_levels must be >= 1, got {self.pyramid_levels}")
        if self.smoothness_weight <= 0:
            raise ConfigError(
                f"smoothness_weight must be > 0, got {self.smoothness_weight}"
            )
        if self.iters_per_level < 1 or self.warp_steps_per_level < 1:
            raise ConfigError("iters_per_level and warp_steps_per_level must be >= 1")


def _downsample2(a: np.ndarray) -> np.ndarray:
    """Binomial smoothing then 2x decimation (replicate boundary)."""
    k = np.array([1.0, 4.0, 6.0, 4.0, 1.0]) / 16.0
    a = ndimage.correlate1d(a, k, axis=0, mode="nearest")
    a = ndimage.correlate1d(a, k, axis=1, mode="nearest")
    return a[::2, ::2]


def _warp2d(a: np.ndarray, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    return warp(Frame(a[:, :, None]), FlowField(np.stack([u, v], axis=-1))).data[:, :, 0]


def _hs_increment(
    target: np.ndarray, warped: np.ndarray, alpha: float, iters: int
) -> tuple[np.ndarray, np.ndarray]:
    """Jacobi iterations for the flow increment between target and warped source."""
    fx = ndimage.correlate(target, _KX, mode="nearest") + ndimage.correlate(
        warped, _KX, mode="nearest"
    )
    fy = ndimage.correlate(target, _KY, mode="nearest") + ndimage.correlate(
        warped, _KY, mode="nearest"
    )
    ft = ndimage.correlate(warped, _KT, mode="nearest") - ndimage.correlate(
        target, _KT, mode="nearest"
    )
    denom = alpha * alpha + fx * fx + fy * fy
    du = np.zeros_like(target)
    dv = np.zeros_like(target)
    for _ in range(iters):
        du_bar = ndimage.correlate(du, _AVG, mode="nearest")
        dv_bar = ndimage.correlate(dv, _AVG, mode="nearest")
        t = (fx * du_bar + fy * dv_bar + ft) / denom
        du = du_bar - fx * t
        dv = dv_bar - fy * t
    return du, dv


def _resize2d(a: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    out = _resize_axis(a[:, :, None], out_h, axis=0)
    out = _resize_axis(out, out_w, axis=1)
    return out[:, :, 0]


def estimate_flow(target: Frame, source: Frame, cfg: FlowConfig) -> FlowField:
    """Flow u such that source(x + u(x)) approximates target(x).

    Coarse-to-fine Horn-Schunck on the luminance channel with incremental
    warping; warping downstream still applies to all channels.
    """
    if target.shape != source.shape:
        raise DimensionError(
            f"flow frames must share dims, got {target.shape} vs {source.shape}"
        )
    if cfg.estimator == "external":
        raise ConfigError(
            "external flow mode reads .flo files resolved by the pipeline; "
            "estimate_flow requires the horn-schunck-pyramidal estimator"
        )
    tgt = luminance(target) * _LUMA_SCALE
    src = luminance(source) * _LUMA_SCALE

    pyramid = [(tgt, src)]
    for _ in range(cfg.pyramid_levels - 1):
        t, s = pyramid[-1]
        if min(t.shape) < 8:
            break
        pyramid.append((_downsample2(t), _downsample2(s)))

    coarsest = pyramid[-1][0].shape
    u = np.zeros(coarsest)
    v = np.zeros(coarsest)
    for level_t, level_s in reversed(pyramid):
        if u.shape != level_t.shape:
            h, w = level_t.shape
            u = _resize2d(u, h, w) * (w / u.shape[1])
            v = _resize2d(v, h, w) * (h / v.shape[0])
        for _ in range(cfg.warp_steps_per_level):
            warped = _warp2d(level_s, u, v)
            du, dv = _hs_increment(level_t, warped, cfg.smoothness_weight, cfg.iters_per_level)
            u = u + du
            v = v + dv
    mag = np.hypot(u, v)
    log.info(
        "flow %dx%d: mean |u| %.3f px, max |u| %.3f px",
        u.shape[0], u.shape[1], float(mag.mean()), float(mag.max()),
    )
    return FlowField(np.stack([u, v], axis=-1))


def align_guides(
    prev: Frame,
    ref: Frame,
    next: Frame,
    s: int,
    cfg: FlowConfig,
    flows: tuple[FlowField, FlowField] | None = None,
) -> tuple[Frame, Frame]:
    """Bicubic-upsample the window by s, then motion-compensate the neighbors.

    Flows are estimated against the upsampled reference (or taken from
    ``flows`` = (prev-to-ref, next-to-ref), e.g. read from .flo files);
    returns the warped (prev, next) guides at HR resolution.
    """
    if prev.shape != ref.shape or next.shape != ref.shape:
        raise DimensionError("the three window frames must share dimensions")
    up_prev = bicubic_resize(prev, s)
    up_ref = bicubic_resize(ref, s)
    up_next = bicubic_resize(next, s)
    if flows is None:
        if cfg.estimator == "external":
            raise ConfigError(
                "flow estimator is 'external' but no precomputed flows were supplied"
            )
        flow_prev = estimate_flow(up_ref, up_prev, cfg)
        flow_next = estimate_flow(up_ref, up_next, cfg)
    else:
        flow_prev, flow_next = flows
    return warp(up_prev, flow_prev), warp(up_next, flow_next)


def write_flo(path, flow: FlowField) -> None:
    """Middlebury format: magic float, int32 width/height, interleaved (u, v)."""
    with open(path, "wb") as f:
        f.write(struct.pack("<f", FLO_MAGIC))
        f.write(struct.pack("<ii", flow.width, flow.height))
        f.write(flow.vectors.astype("<f4").tobytes())


def read_flo(path) -> FlowField:
    try:
        blob = Path(path).read_bytes()
    except OSError as e:
        raise DataIOError(f"cannot read flow file {path}: {e}") from e
    if len(blob) < 12:
        raise DataIOError(f"flow file {path} is truncated")
    (magic,) = struct.unpack("<f", blob[:4])
    if abs(magic - FLO_MAGIC) > 1e-3:
        raise DataIOError(f"flow file {path}: bad magic {magic!r}")
    w, h = struct.unpack("<ii", blob[4:12])
    expected = 12 + 8 * w * h
    if w < 1 or h < 1 or len(blob) != expected:
        raise DataIOError(f"flow file {path}: inconsistent header/payload")
    vec = np.frombuffer(blob[12:], dtype="<f4").reshape(h, w, 2)
    return FlowField(vec.astype(np.float64))
