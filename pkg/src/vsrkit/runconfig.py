"""Key=value run configuration mirroring every module config.

A run resolves, in order: built-in defaults, then a config file, then
explicit overrides (CLI flags / request fields). Unknown keys are
rejected, and every run echoes its fully resolved configuration to
``out_dir/run.cfg``.
"""

from __future__ import annotations

from pathlib import Path

from .deconvolver import SolverConfig
from .errors import ConfigError, DataIOError
from .flow import FlowConfig
from .kernel_estimator import EstimatorConfig
from .pipeline import PipelineConfig

__all__ = ["DEFAULTS", "RunConfig"]

DEFAULTS: dict[str, str] = {
    "scale": "4",
    "seed": "0",
    "noise_std": "0.0",
    "kernel_size": "15",
    "png_bits": "8",
    "threads": "1",
    "strict": "false",
    "degrade.kernel": "gaussian:2.0",
    "estimator.mode": "direct-logits",
    "estimator.init_sigma": "2.0",
    "estimator.max_iters": "300",
    "estimator.step_size": "0.01",
    "estimator.grad_tolerance": "1e-8",
    "estimator.hidden_size": "1000",
    "estimator.blind_pairs": "3",
    "solver.gamma": "0.02",
    "solver.cg_tolerance": "1e-6",
    "solver.cg_max_iters": "200",
    "solver.warm_start": "false",
    "flow.estimator": "horn-schunck-pyramidal",
    "flow.pyramid_levels": "4",
    "flow.smoothness_weight": "15.0",
    "flow.iters_per_level": "100",
    "flow.warp_steps_per_level": "3",
    "flow.external_dir": "",
    "pipeline.restorer": "confidence-fusion",
    "pipeline.fusion_bandwidth": "0.05",
    "pipeline.exchange_dir": "",
}


def _parse_kv_text(text: str, origin: str) -> dict[str, str]:
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{origin}:{lineno}: expected key=value, got {raw!r}")
        key, val = line.split("=", 1)
        values[key.strip()] = val.strip()
    return values


class RunConfig:
    """Resolved flat configuration with typed accessors."""

    def __init__(self, values: dict[str, str]):
        self.values = values

    @classmethod
    def resolve(
        cls, config_file: str | None = None, overrides: dict[str, str] | None = None
    ) -> "RunConfig":
        values = dict(DEFAULTS)
        for origin, extra in (
            ("config file", _load_file(config_file)),
            ("override", dict(overrides or {})),
        ):
            for key, val in extra.items():
                if key not in DEFAULTS:
                    raise ConfigError(f"unknown {origin} key {key!r}")
                values[key] = val
        return cls(values)

    def _get(self, key: str, conv, kind: str):
        raw = self.values[key]
        try:
            return conv(raw)
        except ValueError as e:
            raise ConfigError(f"config key {key}={raw!r} is not a valid {kind}") from e

    def get_int(self, key: str) -> int:
        return self._get(key, int, "integer")

    def get_float(self, key: str) -> float:
        return self._get(key, float, "number")

    def get_bool(self, key: str) -> bool:
        raw = self.values[key].lower()
        if raw in ("true", "1", "yes", "on"):
            return True
        if raw in ("false", "0", "no", "off"):
            return False
        raise ConfigError(f"config key {key}={self.values[key]!r} is not a boolean")

    def get_str(self, key: str) -> str:
        return self.values[key]

    def estimator_config(self) -> EstimatorConfig:
        return EstimatorConfig(
            mode=self.get_str("estimator.mode"),
            init_sigma=self.get_float("estimator.init_sigma"),
            kernel_size=self.get_int("kernel_size"),
            max_iters=self.get_int("estimator.max_iters"),
            step_size=self.get_float("estimator.step_size"),
            grad_tolerance=self.get_float("estimator.grad_tolerance"),
            hidden_size=self.get_int("estimator.hidden_size"),
        )

    def solver_config(self) -> SolverConfig:
        return SolverConfig(
            gamma=self.get_float("solver.gamma"),
            cg_tolerance=self.get_float("solver.cg_tolerance"),
            cg_max_iters=self.get_int("solver.cg_max_iters"),
            warm_start=self.get_bool("solver.warm_start"),
        )

    def flow_config(self) -> FlowConfig:
        return FlowConfig(
            estimator=self.get_str("flow.estimator"),
            pyramid_levels=self.get_int("flow.pyramid_levels"),
            smoothness_weight=self.get_float("flow.smoothness_weight"),
            iters_per_level=self.get_int("flow.iters_per_level"),
            warp_steps_per_level=self.get_int("flow.warp_steps_per_level"),
            external_dir=self.get_str("flow.external_dir"),
        )

    def pipeline_config(self) -> PipelineConfig:
        return PipelineConfig(
            scale=self.get_int("scale"),
            estimator=self.estimator_config(),
            solver=self.solver_config(),
            flow=self.flow_config(),
            restorer=self.get_str("pipeline.restorer"),
            fusion_bandwidth=self.get_float("pipeline.fusion_bandwidth"),
            exchange_dir=self.get_str("pipeline.exchange_dir"),
            blind_pair_count=self.get_int("estimator.blind_pairs"),
            strict=self.get_bool("strict"),
        )

    def resolved_text(self) -> str:
        return "\n".join(f"{k}={self.values[k]}" for k in sorted(self.values)) + "\n"

    def write(self, out_dir) -> None:
        Path(out_dir).mkdir(parents=True, exist_ok=True)
        (Path(out_dir) / "run.cfg").write_text(self.resolved_text())


def _load_file(config_file: str | None) -> dict[str, str]:
    if not config_file:
        return {}
    path = Path(config_file)
    try:
        text = path.read_text()
    except OSError as e:
        raise DataIOError(f"cannot read config file {config_file}: {e}") from e
    return _parse_kv_text(text, str(config_file))
