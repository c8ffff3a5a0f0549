import pytest

from vsrkit.errors import ConfigError, DataIOError
from vsrkit.runconfig import DEFAULTS, RunConfig


def test_defaults_resolve():
    cfg = RunConfig.resolve()
    assert cfg.get_int("scale") == 4
    assert cfg.get_float("solver.gamma") == 0.02
    assert cfg.get_str("estimator.mode") == "direct-logits"
    assert cfg.get_bool("strict") is False


def test_file_then_overrides_precedence(tmp_path):
    f = tmp_path / "run.cfg"
    f.write_text("scale=2\nsolver.gamma=0.1  # comment\n\n# full-line comment\n")
    cfg = RunConfig.resolve(str(f), {"solver.gamma": "0.3"})
    assert cfg.get_int("scale") == 2
    assert cfg.get_float("solver.gamma") == 0.3


def test_unknown_key_rejected(tmp_path):
    with pytest.raises(ConfigError):
        RunConfig.resolve(None, {"not_a_key": "1"})
    f = tmp_path / "bad.cfg"
    f.write_text("nope=1\n")
    with pytest.raises(ConfigError):
        RunConfig.resolve(str(f), {})


def test_malformed_line_rejected(tmp_path):
    f = tmp_path / "bad.cfg"
    f.write_text("just a line without equals\n")
    with pytest.raises(ConfigError):
        RunConfig.resolve(str(f), {})


def test_missing_file_rejected(tmp_path):
    with pytest.raises(DataIOError):
        RunConfig.resolve(str(tmp_path / "absent.cfg"), {})


def test_bad_value_types():
    cfg = RunConfig.resolve(None, {"scale": "four"})
    with pytest.raises(ConfigError):
        cfg.get_int("scale")
    cfg = RunConfig.resolve(None, {"strict": "perhaps"})
    with pytest.raises(ConfigError):
        cfg.get_bool("strict")


def test_typed_configs_built():
    cfg = RunConfig.resolve(None, {"kernel_size": "7", "flow.pyramid_levels": "2"})
    assert cfg.estimator_config().kernel_size == 7
    assert cfg.flow_config().pyramid_levels == 2
    assert cfg.solver_config().gamma == 0.02
    p = cfg.pipeline_config()
    assert p.scale == 4 and p.estimator.kernel_size == 7


def test_even_kernel_size_fails_at_build():
    cfg = RunConfig.resolve(None, {"kernel_size": "14"})
    with pytest.raises(ConfigError):
        cfg.estimator_config()


def test_resolved_text_sorted_and_complete(tmp_path):
    cfg = RunConfig.resolve(None, {"scale": "2"})
    text = cfg.resolved_text()
    lines = text.strip().splitlines()
    assert len(lines) == len(DEFAULTS)
    assert lines == sorted(lines)
    assert "scale=2" in lines
    cfg.write(tmp_path)
    assert (tmp_path / "run.cfg").read_text() == text


def test_resolved_file_reloads_identically(tmp_path):
    cfg = RunConfig.resolve(None, {"noise_std": "0.01"})
    cfg.write(tmp_path)
    again = RunConfig.resolve(str(tmp_path / "run.cfg"), {})
    assert again.values == cfg.values
