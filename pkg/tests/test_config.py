import json

import pytest

from stablehomog.config import (CACHE_ENV, RunConfig, load_config, load_model,
                                save_model)
from stablehomog.presets import get_preset, preset_names


def test_round_trip_and_hash_order_independence():
    cfg = RunConfig(model="drift", seed=11, epsilon=[0.4, 0.2], n=96)
    spec = cfg.to_spec()
    again = RunConfig.from_spec(spec)
    assert again == cfg
    shuffled = dict(reversed(list(spec.items())))
    assert RunConfig.from_spec(shuffled).config_hash() == cfg.config_hash()
    assert RunConfig(seed=12).config_hash() != RunConfig(seed=13).config_hash()


def test_rejects_bad_fields():
    with pytest.raises(ValueError, match="unknown config"):
        RunConfig.from_spec({"ser.seed": 3})
    with pytest.raises(ValueError):
        RunConfig(small_jumps="drop")
    with pytest.raises(ValueError):
        RunConfig(epsilon=[0.5, -0.1])
    with pytest.raises(ValueError):
        RunConfig(n_paths=0)


def test_config_file(tmp_path):
    path = tmp_path / "run.json"
    path.write_text(json.dumps({"model": "constant", "x_n": 4, "seed": 9}))
    cfg = load_config(path)
    assert cfg.x_n == 4 and cfg.seed == 9
    assert cfg.n_paths == RunConfig().n_paths


def test_cache_dir_resolution(tmp_path, monkeypatch):
    monkeypatch.delenv(CACHE_ENV, raising=False)
    cfg = RunConfig(out_dir=str(tmp_path / "o"))
    assert cfg.resolve_cache_dir().endswith("cache")
    monkeypatch.setenv(CACHE_ENV, "/elsewhere")
    assert cfg.resolve_cache_dir() == "/elsewhere"
    assert RunConfig(cache_dir="/pinned").resolve_cache_dir() == "/pinned"


def test_presets_all_build_and_validate():
    from stablehomog.model import validate_assumptions

    for name in preset_names():
        model = get_preset(name)
        report = validate_assumptions(model, grid_n=24, n_dirs=16)
        assert report.ok, f"{name}: {report.summary()}"


def test_load_model_preset_and_file(tmp_path):
    model = load_model("oscillating")
    path = tmp_path / "model.json"
    save_model(path, model)
    back = load_model(str(path))
    assert back.fingerprint() == model.fingerprint()
    with pytest.raises(FileNotFoundError, match="preset"):
        load_model("no_such_thing")
