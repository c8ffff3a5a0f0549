"""Blind video super-resolution toolkit.

Estimates the unknown blur kernel of a low-resolution video, restores a
sharp intermediate frame by regularized deconvolution, aligns adjacent
frames by optical flow, and fuses them into the high-resolution output.
"""

from .errors import (
    ConfigError,
    DataIOError,
    DimensionError,
    NumericalError,
    VsrkitError,
)
from .frames import (
    Frame,
    Sequence,
    bicubic_resize,
    clamp01,
    depth_to_space,
    space_to_depth,
)
from .operators import (
    BlurKernel,
    DegradationConfig,
    FlowField,
    convolve2d,
    convolve2d_adjoint,
    decimate,
    decimate_adjoint,
    degrade,
    gradient_h,
    gradient_h_adjoint,
    gradient_v,
    gradient_v_adjoint,
    read_kernel,
    sk_forward,
    warp,
    write_kernel,
)

__version__ = "0.1.0"


def __getattr__(name):
    # Lazy re-exports of the stage entry points keep "import vsrkit" light.
    from importlib import import_module

    lazy = {
        "EstimatorConfig": "kernel_estimator",
        "estimate_kernel": "kernel_estimator",
        "gaussian_kernel": "kernel_estimator",
        "softmax_kernel": "kernel_estimator",
        "SolverConfig": "deconvolver",
        "deconvolve": "deconvolver",
        "normal_operator_apply": "deconvolver",
        "FlowConfig": "flow",
        "estimate_flow": "flow",
        "align_guides": "flow",
        "read_flo": "flow",
        "write_flo": "flow",
        "PipelineConfig": "pipeline",
        "superresolve_frame": "pipeline",
        "superresolve_sequence": "pipeline",
        "fuse_confidence": "pipeline",
        "pack_restorer_input": "pipeline",
        "MetricReport": "metrics",
        "psnr": "metrics",
        "ssim": "metrics",
        "kernel_accuracy": "metrics",
        "read_png": "pngio",
        "write_png": "pngio",
        "read_frame_dir": "pngio",
        "write_frame_dir": "pngio",
    }
    if name in lazy:
        return getattr(import_module(f".{lazy[name]}", __name__), name)
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")
