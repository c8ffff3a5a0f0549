"""Request/response models for the super-resolution service.

All paths are resolved on the server's filesystem; the service wraps the
toolkit for deployments where one host processes jobs for many clients.
Infinite PSNR (identical images) serializes to JSON null.
"""

from __future__ import annotations

from pydantic import BaseModel, Field


class CommandRequest(BaseModel):
    config_file: str | None = None
    config: dict[str, str] = Field(default_factory=dict)


class DegradeRequest(CommandRequest):
    input_dir: str
    output_dir: str


class DegradeResponse(BaseModel):
    output_dir: str
    frames_written: int
    kernel_path: str
    seed: int
    resolved_config: dict[str, str]


class EstimateKernelRequest(CommandRequest):
    pairs_dir: str
    output_kernel_path: str
    blind: bool = False


class EstimateKernelResponse(BaseModel):
    kernel_path: str
    loss_csv_path: str
    iterations: int
    initial_loss: float
    best_loss: float
    resolved_config: dict[str, str]


class SuperresolveRequest(CommandRequest):
    input_dir: str
    output_dir: str
    kernel_path: str | None = None  # None -> blind estimation


class SuperresolveResponse(BaseModel):
    output_dir: str
    frames_written: int
    kernel_path: str
    resolved_config: dict[str, str]


class FrameMetrics(BaseModel):
    frame: int
    psnr_db: float | None  # null = identical frames (infinite PSNR)
    ssim: float


class MetricsResponse(BaseModel):
    per_frame: list[FrameMetrics]
    summary_psnr_db: float | None
    summary_ssim: float
    csv: str


class EvaluateRequest(BaseModel):
    pred_dir: str
    truth_dir: str


class KernelAccuracyRequest(BaseModel):
    hr_dir: str
    lr_dir: str
    kernel_path: str
    scale: int


class HealthResponse(BaseModel):
    status: str
    version: str


class ErrorDetail(BaseModel):
    kind: str
    message: str
