# -*- coding: utf-8 -*-
import pytest

from app_config import OUTPUT_ENV_VAR, SolverConfig, build_config, load_config_file, parse_config_text
from mixlayer_types import ConfigError


def test_defaults():
    cfg = SolverConfig()
    assert cfg.T == 7.0
    assert cfg.method == "DOP853"
    assert cfg.lyapunov_order == 12
    assert cfg.output_format == "csv"


def test_parse_config_text_types():
    values = parse_config_text("# comment\n\nT = 9\nlyapunov_order=14\nmethod=RK45\ntau_max=auto\n")
    assert values == {'T': 9.0, 'lyapunov_order': 14, 'method': 'RK45', 'tau_max': None}


@pytest.mark.parametrize("text", ["bogus=1", "T", "T=abc"])
def test_parse_config_text_rejects(text):
    with pytest.raises(ConfigError):
        parse_config_text(text)


@pytest.mark.parametrize("overrides", [
    {'rel_tol': 0.5},
    {'T': 0.1},
    {'workers': 0},
    {'output_format': 'xml'},
    {'no_such_key': 1},
])
def test_invalid_overrides(overrides):
    with pytest.raises(ConfigError):
        SolverConfig().with_overrides(**overrides)


def test_precedence(tmp_path, monkeypatch):
    path = tmp_path / "solver.cfg"
    path.write_text("T=8\noutput_dir=from_file\nworkers=2\n", encoding="utf-8")
    monkeypatch.setenv(OUTPUT_ENV_VAR, "from_env")
    cfg = build_config(str(path), workers=3, T=None)
    assert cfg.T == 8.0
    assert cfg.output_dir == "from_env"
    assert cfg.workers == 3
    cfg = build_config(str(path), output_dir="from_flag")
    assert cfg.output_dir == "from_flag"


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config_file(str(tmp_path / "nope.cfg"))


def test_config_is_hashable_cache_key():
    assert hash(SolverConfig()) == hash(SolverConfig())
    assert SolverConfig().to_dict()['T'] == 7.0
