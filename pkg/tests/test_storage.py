import numpy as np
import pytest

from stablehomog.ergodic import EmpiricalMeasure
from stablehomog.levy import StableMeasureSpec, sample_jump_stream
from stablehomog.rng import substream
from stablehomog.storage import (ArtifactCache, field_table_csv,
                                 measure_table_csv, read_columnar,
                                 save_jump_stream, write_columnar)


def test_columnar_round_trip(tmp_path):
    path = tmp_path / "dump.bin"
    header = {"kind": "test", "alpha": 1.5, "seed": 7}
    cols = {
        "t": np.linspace(0.0, 1.0, 11),
        "y": np.arange(33, dtype=float).reshape(11, 3) / 7.0,
    }
    write_columnar(path, header, cols)
    head, back = read_columnar(path)
    assert head["alpha"] == 1.5 and head["seed"] == 7
    for k in cols:
        assert np.array_equal(back[k], cols[k])


def test_columnar_rejects_foreign_file(tmp_path):
    path = tmp_path / "junk.bin"
    path.write_bytes(b"not a dump at all")
    with pytest.raises(ValueError, match="columnar"):
        read_columnar(path)


def test_jump_stream_dump(tmp_path):
    spec = StableMeasureSpec(1, 1.5, weights=[1.0, 1.0])
    stream = sample_jump_stream(spec, 0.1, 2.0, substream(3, 0, 0))
    path = tmp_path / "jumps.bin"
    save_jump_stream(path, stream, alpha=1.5, dim=1, delta=0.1, horizon=2.0,
                     seed=3)
    head, cols = read_columnar(path)
    assert head["kind"] == "jump_stream"
    assert {"alpha", "d", "delta", "T", "seed"} <= set(head)
    assert cols["t"].shape[0] == cols["y"].shape[0]
    assert np.all(np.diff(cols["t"]) >= 0)
    assert np.abs(cols["y"]).min() >= 0.1


def test_measure_table():
    probs = np.array([0.25, 0.5, 0.125, 0.125])
    text = measure_table_csv(EmpiricalMeasure(1, 4, probs))
    lines = text.strip().split("\n")
    assert lines[0] == "center,probability"
    assert len(lines) == 5
    centers = [float(l.split(",")[0]) for l in lines[1:]]
    back = [float(l.split(",")[1]) for l in lines[1:]]
    assert centers == [0.125, 0.375, 0.625, 0.875]
    assert back == pytest.approx(list(probs))


def test_field_table_shapes():
    text = field_table_csv(np.arange(4, dtype=float), 1)
    assert text.startswith("x,value")
    assert len(text.strip().split("\n")) == 5
    text2 = field_table_csv(np.ones((3, 3)), 2)
    assert text2.startswith("x0,x1,value")
    assert len(text2.strip().split("\n")) == 10


def test_artifact_cache_round_trip(tmp_path):
    cache = ArtifactCache(tmp_path / "cache")
    key = cache.key("thing", model="abc", n=64)
    assert key == cache.key("thing", n=64, model="abc")
    assert key != cache.key("thing", model="abc", n=65)
    assert cache.load(key) is None
    arrays = {"a": np.linspace(0, 1, 7), "z": np.arange(6).reshape(2, 3)}
    cache.store(key, {"note": "hi", "n": 64}, arrays)
    meta, back = cache.load(key)
    assert meta["note"] == "hi" and meta["n"] == 64
    for k in arrays:
        assert np.array_equal(back[k], arrays[k])
        assert back[k].dtype == arrays[k].dtype
