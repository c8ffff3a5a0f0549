"""End-to-end super-resolution of a three-frame window.

Per reference frame: deconvolve with the (estimated) kernel, align the
bicubic-upsampled neighbors by optical flow, pack the three HR images
through space-to-depth into the restorer input, and restore. The default
restorer is a confidence-weighted fusion; the ``external`` restorer mode
exchanges the packed input with any out-of-process model through a
PNG-stack directory plus manifest, so a trained network can be dropped in
behind the same contract.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .deconvolver import SolverConfig, deconvolve
from .errors import ConfigError, DataIOError, DimensionError, NumericalError
from .flow import FlowConfig, align_guides, read_flo
from .frames import (
    Frame,
    Sequence,
    bicubic_resize,
    clamp01,
    depth_to_space,
    space_to_depth,
)
from .kernel_estimator import EstimatorConfig, estimate_kernel
from .operators import BlurKernel
from .pngio import read_png, write_png

__all__ = [
    "RestorerInput",
    "PipelineConfig",
    "pack_restorer_input",
    "unpack_restorer_input",
    "fuse_confidence",
    "l1_loss",
    "superresolve_frame",
    "superresolve_sequence",
    "make_blind_pairs",
    "estimate_blind_kernel",
    "write_restorer_input",
    "read_restorer_input",
]

log = logging.getLogger(__name__)

RESTORER_CHANNEL_ORDER = "next,intermediate,prev"


@dataclass(frozen=True)
class RestorerInput:
    """Space-to-depth packing of (warped next, intermediate, warped prev).

    ``packed`` holds 3 * C * s^2 channels in the declared block order.
    """

    packed: Frame
    scale: int

    def __post_init__(self):
        if self.scale < 1:
            raise ConfigError(f"scale must be >= 1, got {self.scale}")
        block = self.scale * self.scale
        if self.packed.channels % (3 * block):
            raise DimensionError(
                f"packed channel count {self.packed.channels} is not 3*C*{block}"
            )

    @property
    def source_channels(self) -> int:
        return self.packed.channels // (3 * self.scale * self.scale)


@dataclass(frozen=True)
class PipelineConfig:
    scale: int = 4
    estimator: EstimatorConfig = field(default_factory=EstimatorConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)
    flow: FlowConfig = field(default_factory=FlowConfig)
    restorer: str = "confidence-fusion"
    fusion_bandwidth: float = 0.05
    exchange_dir: str = ""
    blind_pair_count: int = 3
    strict: bool = False

    def __post_init__(self):
        if self.scale not in (1, 2, 3, 4):
            raise ConfigError(f"scale must be one of 1, 2, 3, 4, got {self.scale}")
        if self.restorer not in ("confidence-fusion", "external"):
            raise ConfigError(f"unknown restorer {self.restorer!r}")
        if self.fusion_bandwidth <= 0:
            raise ConfigError(
                f"fusion_bandwidth must be > 0, got {self.fusion_bandwidth}"
            )
        if self.blind_pair_count < 1:
            raise ConfigError(
                f"blind_pair_count must be >= 1, got {self.blind_pair_count}"
            )


def pack_restorer_input(
    guide_next: Frame, intermediate: Frame, guide_prev: Frame, s: int
) -> RestorerInput:
    """space_to_depth each source, concatenate channels in declared order."""
    if guide_next.shape != intermediate.shape or guide_prev.shape != intermediate.shape:
        raise DimensionError("restorer sources must share dimensions")
    blocks = [
        space_to_depth(guide_next, s).data,
        space_to_depth(intermediate, s).data,
        space_to_depth(guide_prev, s).data,
    ]
    return RestorerInput(Frame(np.concatenate(blocks, axis=2)), s)


def unpack_restorer_input(inp: RestorerInput) -> tuple[Frame, Frame, Frame]:
    """Recover (guide_next, intermediate, guide_prev) at HR resolution."""
    per_block = inp.packed.channels // 3
    parts = []
    for b in range(3):
        block = Frame(inp.packed.data[:, :, b * per_block : (b + 1) * per_block])
        parts.append(depth_to_space(block, inp.scale))
    return parts[0], parts[1], parts[2]


def fuse_confidence(
    inp: RestorerInput, ref_bicubic: Frame, bandwidth: float = 0.05
) -> Frame:
    """Default restorer: per-pixel weighted average of the three sources.

    Guides get weight exp(-|guide - ref_bicubic| / h) so anything
    inconsistent with the upsampled reference decays away; the
    intermediate keeps weight 1. Output is clamped to [0, 1].
    """
    guide_next, intermediate, guide_prev = unpack_restorer_input(inp)
    if ref_bicubic.shape != intermediate.shape:
        raise DimensionError(
            f"reference {ref_bicubic.shape} does not match sources {intermediate.shape}"
        )
    w_next = np.exp(-np.abs(guide_next.data - ref_bicubic.data) / bandwidth)
    w_prev = np.exp(-np.abs(guide_prev.data - ref_bicubic.data) / bandwidth)
    num = w_next * guide_next.data + intermediate.data + w_prev * guide_prev.data
    den = w_next + 1.0 + w_prev
    return clamp01(Frame(num / den))


def l1_loss(pred: Frame, truth: Frame) -> float:
    """Mean absolute error; the training loss for pluggable restorers."""
    if pred.shape != truth.shape:
        raise DimensionError(f"frames must share dims, got {pred.shape} vs {truth.shape}")
    return float(np.mean(np.abs(pred.data - truth.data)))


def write_restorer_input(directory, inp: RestorerInput, frame_index: int) -> None:
    """Exchange format for external restorers: 16-bit PNG stack + manifest."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    for c in range(inp.packed.channels):
        write_png(d / f"chan_{c:04d}.png", Frame(inp.packed.data[:, :, c : c + 1]), bit_depth=16)
    manifest = (
        f"scale={inp.scale}\n"
        f"channels={inp.packed.channels}\n"
        f"channel_order={RESTORER_CHANNEL_ORDER}\n"
        f"frame_index={frame_index}\n"
    )
    (d / "manifest.txt").write_text(manifest)


def read_restorer_input(directory) -> tuple[RestorerInput, int]:
    d = Path(directory)
    manifest_path = d / "manifest.txt"
    if not manifest_path.is_file():
        raise DataIOError(f"missing restorer manifest {manifest_path}")
    fields = {}
    for line in manifest_path.read_text().splitlines():
        if "=" in line:
            key, val = line.split("=", 1)
            fields[key.strip()] = val.strip()
    try:
        scale = int(fields["scale"])
        channels = int(fields["channels"])
        frame_index = int(fields["frame_index"])
    except (KeyError, ValueError) as e:
        raise DataIOError(f"malformed restorer manifest {manifest_path}") from e
    chans = []
    for c in range(channels):
        p = d / f"chan_{c:04d}.png"
        if not p.is_file():
            raise DataIOError(f"missing packed channel file {p}")
        chans.append(read_png(p).data[:, :, 0])
    return RestorerInput(Frame(np.stack(chans, axis=-1)), scale), frame_index


def _external_restore(inp: RestorerInput, ref_bicubic: Frame, cfg: PipelineConfig, frame_index: int) -> Frame:
    if not cfg.exchange_dir:
        raise ConfigError("external restorer requires exchange_dir")
    frame_dir = Path(cfg.exchange_dir) / f"packed_{frame_index:06d}"
    write_restorer_input(frame_dir, inp, frame_index)
    restored_path = Path(cfg.exchange_dir) / f"restored_{frame_index:06d}.png"
    if not restored_path.is_file():
        raise DataIOError(
            f"external restorer output {restored_path} not found; packed input "
            f"was written to {frame_dir} — run the external restorer and retry"
        )
    restored = read_png(restored_path)
    if restored.shape != ref_bicubic.shape:
        raise DataIOError(
            f"external restorer output {restored.shape} does not match HR dims "
            f"{ref_bicubic.shape}"
        )
    return restored


def superresolve_frame(
    prev: Frame | None,
    ref: Frame,
    next: Frame | None,
    kernel: BlurKernel,
    cfg: PipelineConfig,
    frame_index: int = 0,
    flows: tuple | None = None,
) -> Frame:
    """Super-resolve the center frame of a three-frame window.

    A missing neighbor at a sequence boundary is replaced by the reference.
    Deterministic: identical inputs and config give bit-identical output.
    """
    prev = ref if prev is None else prev
    next = ref if next is None else next
    if prev.shape != ref.shape or next.shape != ref.shape:
        raise DimensionError("window frames must share dimensions")

    result = deconvolve(ref, kernel, cfg.scale, cfg.solver)
    if cfg.strict:
        bad = [r for r in result.residuals if not (r <= cfg.solver.cg_tolerance)]
        if result.singular_warning or bad:
            raise NumericalError(
                f"CG did not converge (singular={result.singular_warning}, "
                f"residuals={result.residuals})"
            )
    log.info(
        "frame %d: CG iterations %s, residuals %s",
        frame_index,
        result.iterations,
        tuple(f"{r:.2e}" for r in result.residuals),
    )

    if flows is None and cfg.flow.estimator == "external":
        flows = _resolve_external_flows(cfg.flow.external_dir, frame_index)
    guide_prev, guide_next = align_guides(prev, ref, next, cfg.scale, cfg.flow, flows=flows)
    packed = pack_restorer_input(guide_next, result.frame, guide_prev, cfg.scale)
    ref_b = bicubic_resize(ref, cfg.scale)
    if cfg.restorer == "confidence-fusion":
        return fuse_confidence(packed, ref_b, cfg.fusion_bandwidth)
    return _external_restore(packed, ref_b, cfg, frame_index)


def _resolve_external_flows(external_dir: str, frame_index: int):
    if not external_dir:
        raise ConfigError("flow estimator 'external' requires flow.external_dir")
    d = Path(external_dir)
    prev_path = d / f"flow_prev_{frame_index:06d}.flo"
    next_path = d / f"flow_next_{frame_index:06d}.flo"
    if not prev_path.is_file() or not next_path.is_file():
        raise DataIOError(
            f"missing external flow files {prev_path.name}/{next_path.name} in {d}"
        )
    return read_flo(prev_path), read_flo(next_path)


def make_blind_pairs(seq: Sequence, s: int, count: int) -> list[tuple[Frame, Frame]]:
    """Cross-scale pseudo-pairs for blind estimation.

    Each selected LR frame plays the HR role against its own bicubic
    downsample by s, exploiting the self-similarity of the degradation
    across scales. Frames are cropped to dimensions divisible by s.
    """
    h = (seq[0].height // s) * s
    w = (seq[0].width // s) * s
    if h < s or w < s:
        raise DimensionError(
            f"frames {seq[0].height}x{seq[0].width} too small for blind pairs at scale {s}"
        )
    count = min(count, len(seq))
    idx = np.linspace(0, len(seq) - 1, count).round().astype(int)
    pairs = []
    for i in sorted(set(idx.tolist())):
        hr = Frame(seq[i].data[:h, :w])
        lr = bicubic_resize(hr, 1.0 / s)
        pairs.append((hr, lr))
    return pairs


def estimate_blind_kernel(seq: Sequence, cfg: PipelineConfig) -> tuple[BlurKernel, list[float]]:
    """Estimate one kernel for the whole sequence without HR ground truth."""
    pairs = make_blind_pairs(seq, cfg.scale, cfg.blind_pair_count)
    return estimate_kernel(pairs, cfg.estimator)


def superresolve_sequence(
    seq: Sequence,
    cfg: PipelineConfig,
    kernel: BlurKernel | None = None,
    threads: int = 1,
) -> Sequence:
    """Super-resolve every frame with sliding 3-frame windows.

    The kernel is estimated once per sequence (blind, from cross-scale
    pseudo-pairs) unless one is supplied; boundary windows replicate the
    reference in place of the missing neighbor.
    """
    if kernel is None:
        kernel, history = estimate_blind_kernel(seq, cfg)
        log.info("blind kernel estimated: best loss %.6g", min(history))
    n = len(seq)

    def run(i: int) -> Frame:
        prev = seq[i - 1] if i > 0 else None
        next = seq[i + 1] if i < n - 1 else None
        return superresolve_frame(prev, seq[i], next, kernel, cfg, frame_index=i)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            frames = list(pool.map(run, range(n)))
    else:
        frames = [run(i) for i in range(n)]
    return Sequence(tuple(frames))
