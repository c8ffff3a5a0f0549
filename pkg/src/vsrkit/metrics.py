"""Image-quality metrics over RGB samples and the kernel-accuracy protocol.

PSNR uses peak 1.0 in [0, 1] units; identical inputs return the +infinity
sentinel rather than dividing by zero. SSIM uses the universal constants
(11x11 Gaussian window with sigma 1.5, C1 = 0.01^2, C2 = 0.03^2), computed
per channel and averaged; the SSIM map is cropped by the window half-width
so boundary padding never influences the score.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .errors import DimensionError
from .frames import Frame, Sequence
from .operators import BlurKernel, sk_forward

__all__ = ["MetricReport", "psnr", "ssim", "kernel_accuracy", "metric_report_csv"]

_SSIM_WINDOW = 11
_SSIM_SIGMA = 1.5
_SSIM_C1 = 0.01**2
_SSIM_C2 = 0.03**2


@dataclass(frozen=True)
class MetricReport:
    psnr_db: float
    ssim: float
    frame_psnr_db: tuple[float, ...] = field(default=())
    frame_ssim: tuple[float, ...] = field(default=())


def _check_dims(a: Frame, b: Frame) -> None:
    if a.shape != b.shape:
        raise DimensionError(f"frames must share dims, got {a.shape} vs {b.shape}")


def psnr(a: Frame, b: Frame) -> float:
    """10*log10(1 / MSE) over all samples; +inf for identical inputs."""
    _check_dims(a, b)
    mse = float(np.mean((a.data - b.data) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(1.0 / mse)


def _gaussian_window(radius: int, sigma: float) -> np.ndarray:
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    g = np.exp(-(x * x) / (2.0 * sigma * sigma))
    return g / g.sum()


def _ssim_channel(a: np.ndarray, b: np.ndarray) -> float:
    radius = _SSIM_WINDOW // 2
    g = _gaussian_window(radius, _SSIM_SIGMA)

    def filt(x):
        return ndimage.correlate1d(
            ndimage.correlate1d(x, g, axis=0, mode="nearest"), g, axis=1, mode="nearest"
        )

    mu_a = filt(a)
    mu_b = filt(b)
    var_a = filt(a * a) - mu_a * mu_a
    var_b = filt(b * b) - mu_b * mu_b
    cov = filt(a * b) - mu_a * mu_b
    num = (2 * mu_a * mu_b + _SSIM_C1) * (2 * cov + _SSIM_C2)
    den = (mu_a * mu_a + mu_b * mu_b + _SSIM_C1) * (var_a + var_b + _SSIM_C2)
    s = num / den
    return float(s[radius:-radius, radius:-radius].mean())


def ssim(a: Frame, b: Frame) -> float:
    """Mean SSIM over channels; requires both dims >= the 11-pixel window."""
    _check_dims(a, b)
    if min(a.height, a.width) < _SSIM_WINDOW:
        raise DimensionError(
            f"frame {a.height}x{a.width} smaller than the {_SSIM_WINDOW}-pixel SSIM window"
        )
    return float(
        np.mean([_ssim_channel(a.data[:, :, c], b.data[:, :, c]) for c in range(a.channels)])
    )


def kernel_accuracy(
    hr_seq: Sequence, lr_seq: Sequence, kernel: BlurKernel, s: int
) -> MetricReport:
    """Score a kernel by regenerating LR frames from HR truth.

    Each HR frame is blurred with ``kernel`` and decimated by ``s``; the
    regenerated frames are compared against the observed LR frames with
    PSNR/SSIM and averaged over the sequence.
    """
    if len(hr_seq) != len(lr_seq):
        raise DimensionError(
            f"sequence lengths differ: {len(hr_seq)} HR vs {len(lr_seq)} LR"
        )
    psnrs = []
    ssims = []
    for hr, lr in zip(hr_seq, lr_seq):
        regen = sk_forward(hr, kernel, s)
        if regen.shape != lr.shape:
            raise DimensionError(
                f"regenerated LR {regen.shape} does not match observed {lr.shape}"
            )
        psnrs.append(psnr(regen, lr))
        ssims.append(ssim(regen, lr))
    return MetricReport(
        psnr_db=float(np.mean(psnrs)),
        ssim=float(np.mean(ssims)),
        frame_psnr_db=tuple(psnrs),
        frame_ssim=tuple(ssims),
    )


def _fmt(v: float) -> str:
    return "inf" if math.isinf(v) else f"{v:.6f}"


def metric_report_csv(report: MetricReport) -> str:
    """CSV with one row per frame plus a summary row."""
    lines = ["frame,psnr_db,ssim"]
    for i, (p, s) in enumerate(zip(report.frame_psnr_db, report.frame_ssim)):
        lines.append(f"{i},{_fmt(p)},{_fmt(s)}")
    lines.append(f"summary,{_fmt(report.psnr_db)},{_fmt(report.ssim)}")
    return "\n".join(lines) + "\n"
