"""Command handlers shared by the HTTP routes and the in-process CLI.

Each handler takes a request model, performs the run against the local
filesystem, and returns the response model. Artifact writes (frames,
kernel file, CSV, run.cfg) are byte-reproducible for a fixed request;
timing-bearing diagnostics go only to ``run.log``.
"""

from __future__ import annotations

import logging
import math
import time
from pathlib import Path

from .. import __version__
from ..errors import ConfigError, DataIOError
from ..kernel_estimator import estimate_kernel, gaussian_kernel
from ..metrics import MetricReport, kernel_accuracy, metric_report_csv, psnr, ssim
from ..operators import BlurKernel, DegradationConfig, degrade, read_kernel, write_kernel
from ..pipeline import make_blind_pairs, superresolve_sequence
from ..pngio import read_frame_dir, write_frame_dir
from ..runconfig import RunConfig
from . import schemas

log = logging.getLogger("vsrkit")


def _run_log(out_dir: Path):
    handler = logging.FileHandler(out_dir / "run.log", mode="w")
    handler.setFormatter(logging.Formatter("%(name)s: %(message)s"))
    handler.setLevel(logging.INFO)
    log.addHandler(handler)
    log.setLevel(logging.INFO)
    return handler


def _resolve_degrade_kernel(cfg: RunConfig) -> BlurKernel:
    value = cfg.get_str("degrade.kernel")
    size = cfg.get_int("kernel_size")
    if value == "delta":
        return BlurKernel.delta(size)
    if value.startswith("gaussian:"):
        try:
            sigma = float(value.split(":", 1)[1])
        except ValueError as e:
            raise ConfigError(f"bad degrade.kernel value {value!r}") from e
        return gaussian_kernel(size, sigma)
    if value.startswith("file:"):
        return read_kernel(value.split(":", 1)[1])
    raise ConfigError(
        f"degrade.kernel must be 'delta', 'gaussian:<sigma>' or 'file:<path>', got {value!r}"
    )


def run_degrade(req: schemas.DegradeRequest) -> schemas.DegradeResponse:
    cfg = RunConfig.resolve(req.config_file, req.config)
    out_dir = Path(req.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    handler = _run_log(out_dir)
    try:
        t0 = time.monotonic()
        seq = read_frame_dir(req.input_dir)
        kernel = _resolve_degrade_kernel(cfg)
        dcfg = DegradationConfig(
            kernel=kernel,
            scale=cfg.get_int("scale"),
            noise_std=cfg.get_float("noise_std"),
            rng_seed=cfg.get_int("seed"),
        )
        lr = degrade(seq, [None] * len(seq), dcfg)
        names = write_frame_dir(out_dir, lr, bit_depth=cfg.get_int("png_bits"))
        kernel_path = out_dir / "kernel.txt"
        write_kernel(kernel_path, kernel)
        (out_dir / "seed.txt").write_text(f"{dcfg.rng_seed}\n")
        cfg.write(out_dir)
        log.info("degraded %d frames in %.2fs", len(names), time.monotonic() - t0)
        return schemas.DegradeResponse(
            output_dir=str(out_dir),
            frames_written=len(names),
            kernel_path=str(kernel_path),
            seed=dcfg.rng_seed,
            resolved_config=cfg.values,
        )
    finally:
        log.removeHandler(handler)
        handler.close()


def _load_pairs(pairs_dir: str, blind: bool, cfg: RunConfig):
    root = Path(pairs_dir)
    if blind:
        seq = read_frame_dir(root)
        return make_blind_pairs(
            seq, cfg.get_int("scale"), cfg.get_int("estimator.blind_pairs")
        )
    hr_dir, lr_dir = root / "hr", root / "lr"
    if not hr_dir.is_dir() or not lr_dir.is_dir():
        raise DataIOError(
            f"{pairs_dir} must contain hr/ and lr/ subdirectories (or use blind mode)"
        )
    hr_seq = read_frame_dir(hr_dir)
    lr_seq = read_frame_dir(lr_dir)
    if len(hr_seq) != len(lr_seq):
        raise DataIOError(
            f"pair count mismatch: {len(hr_seq)} HR vs {len(lr_seq)} LR frames"
        )
    return list(zip(hr_seq.frames, lr_seq.frames))


def run_estimate_kernel(req: schemas.EstimateKernelRequest) -> schemas.EstimateKernelResponse:
    cfg = RunConfig.resolve(req.config_file, req.config)
    pairs = _load_pairs(req.pairs_dir, req.blind, cfg)
    kernel, history = estimate_kernel(pairs, cfg.estimator_config())
    out_path = Path(req.output_kernel_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    write_kernel(out_path, kernel)
    csv_path = out_path.with_suffix(out_path.suffix + ".loss.csv")
    lines = ["iteration,objective"]
    lines += [f"{i},{v:.17g}" for i, v in enumerate(history)]
    csv_path.write_text("\n".join(lines) + "\n")
    out_path.with_suffix(out_path.suffix + ".run.cfg").write_text(cfg.resolved_text())
    return schemas.EstimateKernelResponse(
        kernel_path=str(out_path),
        loss_csv_path=str(csv_path),
        iterations=len(history) - 1,
        initial_loss=history[0],
        best_loss=min(history),
        resolved_config=cfg.values,
    )


def run_superresolve(req: schemas.SuperresolveRequest) -> schemas.SuperresolveResponse:
    cfg = RunConfig.resolve(req.config_file, req.config)
    out_dir = Path(req.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    handler = _run_log(out_dir)
    try:
        t0 = time.monotonic()
        seq = read_frame_dir(req.input_dir)
        pcfg = cfg.pipeline_config()
        if req.kernel_path:
            kernel = read_kernel(req.kernel_path)
        else:
            pairs = make_blind_pairs(seq, pcfg.scale, pcfg.blind_pair_count)
            kernel, history = estimate_kernel(pairs, pcfg.estimator)
            log.info("blind kernel estimated, best loss %.6g", min(history))
        sr = superresolve_sequence(seq, pcfg, kernel=kernel, threads=cfg.get_int("threads"))
        names = write_frame_dir(out_dir, sr, bit_depth=cfg.get_int("png_bits"))
        kernel_path = out_dir / "kernel.txt"
        write_kernel(kernel_path, kernel)
        cfg.write(out_dir)
        log.info("superresolved %d frames in %.2fs", len(names), time.monotonic() - t0)
        return schemas.SuperresolveResponse(
            output_dir=str(out_dir),
            frames_written=len(names),
            kernel_path=str(kernel_path),
            resolved_config=cfg.values,
        )
    finally:
        log.removeHandler(handler)
        handler.close()


def _metrics_response(report: MetricReport) -> schemas.MetricsResponse:
    def opt(v: float) -> float | None:
        return None if math.isinf(v) else v

    return schemas.MetricsResponse(
        per_frame=[
            schemas.FrameMetrics(frame=i, psnr_db=opt(p), ssim=s)
            for i, (p, s) in enumerate(zip(report.frame_psnr_db, report.frame_ssim))
        ],
        summary_psnr_db=opt(report.psnr_db),
        summary_ssim=report.ssim,
        csv=metric_report_csv(report),
    )


def run_evaluate(req: schemas.EvaluateRequest) -> schemas.MetricsResponse:
    pred = read_frame_dir(req.pred_dir)
    truth = read_frame_dir(req.truth_dir)
    if len(pred) != len(truth):
        raise DataIOError(
            f"frame count mismatch: {len(pred)} predictions vs {len(truth)} references"
        )
    psnrs = [psnr(p, t) for p, t in zip(pred, truth)]
    ssims = [ssim(p, t) for p, t in zip(pred, truth)]
    report = MetricReport(
        psnr_db=float(sum(psnrs) / len(psnrs)),
        ssim=float(sum(ssims) / len(ssims)),
        frame_psnr_db=tuple(psnrs),
        frame_ssim=tuple(ssims),
    )
    return _metrics_response(report)


def run_kernel_accuracy(req: schemas.KernelAccuracyRequest) -> schemas.MetricsResponse:
    hr_seq = read_frame_dir(req.hr_dir)
    lr_seq = read_frame_dir(req.lr_dir)
    kernel = read_kernel(req.kernel_path)
    report = kernel_accuracy(hr_seq, lr_seq, kernel, req.scale)
    return _metrics_response(report)


def health() -> schemas.HealthResponse:
    return schemas.HealthResponse(status="ok", version=__version__)
