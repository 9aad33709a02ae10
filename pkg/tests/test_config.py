import json

import pytest

from psg4d.config import ConfigError, load_config


def test_defaults_resolve():
    cfg = load_config(environ={})
    assert cfg.get("matching", "viou") == 0.5
    assert cfg.get("matching", "ks") == [20, 50, 100]
    assert cfg.get("backend", "retries") == 3


def test_file_overrides_defaults(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"matching": {"viou": 0.7}, "backend": {"timeout": 5}}))
    cfg = load_config(path, environ={})
    assert cfg.get("matching", "viou") == 0.7
    assert cfg.get("backend", "timeout") == 5
    assert cfg.get("matching", "grounded") is True


def test_environment_overrides_file(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"matching": {"viou": 0.7}}))
    cfg = load_config(path, environ={"PSG4D_MATCHING_VIOU": "0.3",
                                     "PSG4D_BACKEND_ENDPOINT": "http://h:1"})
    assert cfg.get("matching", "viou") == 0.3
    assert cfg.get("backend", "endpoint") == "http://h:1"


def test_environment_coercion():
    cfg = load_config(environ={
        "PSG4D_MATCHING_GROUNDED": "false",
        "PSG4D_MATCHING_KS": "10,30",
        "PSG4D_BACKEND_RETRIES": "7",
    })
    assert cfg.get("matching", "grounded") is False
    assert cfg.get("matching", "ks") == [10, 30]
    assert cfg.get("backend", "retries") == 7


def test_unknown_file_key_rejected(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"matching": {"vio": 0.7}}))
    with pytest.raises(ConfigError, match="unknown key"):
        load_config(path, environ={})


def test_unknown_section_rejected(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"nope": {}}))
    with pytest.raises(ConfigError, match="unknown section"):
        load_config(path, environ={})


def test_bad_boolean_env():
    with pytest.raises(ConfigError):
        load_config(environ={"PSG4D_MATCHING_GROUNDED": "maybe"})


def test_unknown_lookup_rejected():
    cfg = load_config(environ={})
    with pytest.raises(ConfigError):
        cfg.get("matching", "nope")
