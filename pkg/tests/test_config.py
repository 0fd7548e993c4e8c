from __future__ import annotations

from pathlib import Path

import pytest

from potts_ees.config import ExperimentConfig, _env_bool, _env_value
from potts_ees.errors import ConfigError


def test_defaults_are_valid():
    config = ExperimentConfig().validate()
    assert config.epsilon == 0.30 and config.delta == 0.15
    assert config.jump_rule == "tempered"
    assert config.out == Path("results")
    assert len(config.seeds) == 20


@pytest.mark.parametrize(
    "overrides",
    [
        dict(epsilon=0.1, delta=0.2),
        dict(delta=0.0),
        dict(d=0.0),
        dict(seeds=[1, 1]),
        dict(n_values=[]),
        dict(q=1),
        dict(record="sometimes"),
        dict(jump_rule="greedy"),
        dict(center="a2"),
        dict(threads=0),
    ],
)
def test_invalid_values_raise(overrides):
    with pytest.raises(ConfigError):
        ExperimentConfig().with_overrides(**overrides).validate()


def test_with_overrides_skips_none():
    config = ExperimentConfig().with_overrides(q=None, betas=[2.9], out="x")
    assert config.q == 3
    assert config.betas == [2.9]
    assert config.out == Path("x")


def test_section_overrides_top_level():
    data = {"betas": [2.0], "max_sweeps": 10, "escape": {"max_sweeps": 500}}
    assert ExperimentConfig.from_dict(data, "escape").max_sweeps == 500
    assert ExperimentConfig.from_dict(data, "landscape").max_sweeps == 10
    assert ExperimentConfig.from_dict(data).betas == [2.0]


def test_unknown_keys_rejected():
    with pytest.raises(ConfigError, match="colour"):
        ExperimentConfig.from_dict({"colour": 3})


def test_from_toml(tmp_path):
    path = tmp_path / "exp.toml"
    path.write_text(
        'n_values = [24, 48]\nseeds = [1, 2, 3]\n\n[conductance]\ncenter = "a1"\n',
        encoding="utf-8",
    )
    config = ExperimentConfig.from_toml(path, "conductance").validate()
    assert config.n_values == [24, 48]
    assert config.seeds == [1, 2, 3]
    assert config.center == "a1"
    with pytest.raises(ConfigError):
        ExperimentConfig.from_toml(tmp_path / "missing.toml")


def test_to_dict_is_json_ready():
    d = ExperimentConfig(out=Path("o")).to_dict()
    assert d["out"] == "o"
    assert d["n_values"] == [24, 48, 96]


def test_env_helpers(monkeypatch):
    monkeypatch.setenv("POTTS_EES_OUT", ' "./runs" ')
    monkeypatch.setenv("POTTS_EES_EXPORT_KERNELS", "yes")
    monkeypatch.setenv("POTTS_EES_SEED", "")
    assert _env_value("POTTS_EES_OUT") == "./runs"
    assert _env_value("POTTS_EES_SEED", "5") == "5"
    assert _env_value("POTTS_EES_NOT_SET") is None
    assert _env_bool("POTTS_EES_EXPORT_KERNELS")
    assert not _env_bool("POTTS_EES_NOT_SET")
