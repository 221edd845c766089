import struct

import numpy as np
import pytest

from emgan import checkpoint, nets
from emgan.errors import FormatError
from emgan.optim import AdamState
from emgan.tensor import ParamSet


def test_roundtrip_bit_exact_with_adam(tmp_path, rng):
    params, _ = nets.build("align", 5)
    adam = AdamState.for_params(params, lr=0.001)
    for name in params:
        adam.m[name] = rng.standard_normal(params[name].shape)
        adam.v[name] = rng.random(params[name].shape)
    adam.t = 17
    path = tmp_path / "g.vxck"
    checkpoint.save(path, params, adam)
    back, badam = checkpoint.load(path, {"lr": 0.001})
    assert back.names() == params.names() and back.equal(params)
    assert badam.t == 17 and badam.lr == 0.001
    for name in params:
        assert np.array_equal(badam.m[name], adam.m[name]) and np.array_equal(badam.v[name], adam.v[name])
    # encoding is canonical: re-saving reproduces the same bytes
    assert checkpoint.encode(back, badam) == path.read_bytes()


def test_layout_header(tmp_path):
    ps = ParamSet({"w": np.arange(6.0).reshape(2, 3)})
    blob = checkpoint.encode(ps)
    assert blob[:4] == b"VXCK"
    assert struct.unpack("<II", blob[4:12]) == (1, 1)
    assert struct.unpack("<H", blob[12:14]) == (1,) and blob[14:15] == b"w"
    assert blob[15] == 2 and struct.unpack("<II", blob[16:24]) == (2, 3)
    assert np.array_equal(np.frombuffer(blob[24:], "<f8"), np.arange(6.0))
    back, adam = checkpoint.decode(blob)
    assert adam is None and back.equal(ps)


def test_scalar_tensor_roundtrip():
    ps = ParamSet({"b": np.array(2.5)})
    back, _ = checkpoint.decode(checkpoint.encode(ps))
    assert back["b"].shape == () and back["b"].data == 2.5


@pytest.mark.parametrize("damage", ["magic", "truncate", "trailing", "version"])
def test_rejects_damaged_files(damage):
    ps = ParamSet({"w": np.ones(3)})
    blob = bytearray(checkpoint.encode(ps, AdamState.for_params(ps)))
    if damage == "magic":
        blob[:4] = b"NOPE"
    elif damage == "truncate":
        blob = blob[:-3]
    elif damage == "trailing":
        blob += b"x"
    else:
        blob[4:8] = struct.pack("<I", 9)
    with pytest.raises(FormatError):
        checkpoint.decode(bytes(blob))


def test_save_is_atomic_on_failure(tmp_path, monkeypatch):
    path = tmp_path / "g.vxck"
    ps = ParamSet({"w": np.ones(3)})
    checkpoint.save(path, ps)
    original = path.read_bytes()

    def boom(*_):
        raise RuntimeError("disk full")

    monkeypatch.setattr(checkpoint, "encode", boom)
    with pytest.raises(RuntimeError):
        checkpoint.save(path, ParamSet({"w": np.zeros(3)}))
    assert path.read_bytes() == original
    assert [p.name for p in tmp_path.iterdir()] == ["g.vxck"]
