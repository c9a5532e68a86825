import hashlib

import numpy as np
import pytest

from selora.adapter import AdapterConfig, InitScheme, Schema, init_adapter
from selora.checkpoint import decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint
from selora.errors import CheckpointFormatError, CorruptionError, UnsupportedVersionError
from selora.optim import OptimizerConfig, OptimizerState, adamw_step

BASES = ["fourier", "haar", "db4", "bior2.2", "coif1"]


def random_adapter(i):
    rng = np.random.default_rng(i)
    r = 2 * int(rng.integers(1, 4))
    d1, d2 = 2 * int(rng.integers(r // 2, 7)), 2 * int(rng.integers(r // 2, 7))
    cfg = AdapterConfig(
        in_dim=d2, out_dim=d1, rank=r, alpha=float(rng.uniform(1, 64)),
        sparse_ratio=float(rng.uniform(0, 0.6)), basis=BASES[i % 5], schema=list(Schema)[i % 4],
        init_scheme=list(InitScheme)[i % 2], dropout_rate=0.05, seed=int(rng.integers(1 << 30)),
    )
    adapter = init_adapter(cfg, rng.standard_normal((d1, d2)))
    adapter.set_parameters(rng.standard_normal(adapter.num_parameters))
    return adapter


def assert_identical(a, b):
    assert a.config == b.config
    assert a.fa.index_set == b.fa.index_set and a.fb.index_set == b.fb.index_set
    assert a.parameters().tobytes() == b.parameters().tobytes()
    assert a.W0.tobytes() == b.W0.tobytes()
    assert a.init_stats == b.init_stats


@pytest.mark.parametrize("i", range(50))
def test_roundtrip_bit_exact(i):
    adapter = random_adapter(i)
    loaded, state = decode_checkpoint(encode_checkpoint(adapter))
    assert state is None
    assert_identical(adapter, loaded)
    assert encode_checkpoint(loaded) == encode_checkpoint(adapter)


def test_optimizer_state_roundtrip(tmp_path):
    adapter = random_adapter(2)
    state = OptimizerState.zeros(adapter.num_parameters, OptimizerConfig(lr=3e-3, total_steps=77))
    adamw_step(state, adapter.parameters(), np.random.default_rng(0).standard_normal(adapter.num_parameters))
    save_checkpoint(adapter, state, tmp_path / "a.selora")
    loaded, loaded_state = load_checkpoint(tmp_path / "a.selora")
    assert_identical(adapter, loaded)
    assert loaded_state.config == state.config and loaded_state.t == 1
    assert loaded_state.first_moment.tobytes() == state.first_moment.tobytes()
    assert loaded_state.second_moment.tobytes() == state.second_moment.tobytes()


def test_header_layout():
    blob = encode_checkpoint(random_adapter(1))
    header = blob[: blob.index(b"\nend\n")].decode("ascii").split("\n")
    assert header[0] == "SELORA1" and header[1] == "version=1"
    sections = {l.split("=", 1)[1].split(",")[0]: l for l in header if l.startswith("section=")}
    assert sections["index_a"].split(",")[1] == "<u4"
    assert sections["values_a"].split(",")[1] == "<f8"
    assert header[-1].startswith("checksum=sha256:")


def test_bad_magic():
    blob = encode_checkpoint(random_adapter(0))
    with pytest.raises(CheckpointFormatError):
        decode_checkpoint(b"XXXXXXX" + blob[7:])


def _payload_start(blob):
    return blob.index(b"\nend\n") + 5


@pytest.mark.parametrize("where", [0, 1, 100, -1])
def test_flipped_payload_byte_is_corruption(where):
    blob = bytearray(encode_checkpoint(random_adapter(3)))
    start = _payload_start(blob)
    pos = start + where if where >= 0 else len(blob) + where
    blob[pos] ^= 0x01
    with pytest.raises(CorruptionError):
        decode_checkpoint(bytes(blob))


def test_every_single_byte_flip_detected():
    blob = encode_checkpoint(random_adapter(4))
    for pos in range(0, len(blob), 7):
        mutated = bytearray(blob)
        mutated[pos] ^= 0x10
        with pytest.raises(CheckpointFormatError):
            decode_checkpoint(bytes(mutated))


def test_truncation_detected():
    blob = encode_checkpoint(random_adapter(5))
    with pytest.raises(CheckpointFormatError):
        decode_checkpoint(blob[:-8])
    with pytest.raises(CheckpointFormatError):
        decode_checkpoint(blob[:20])


def test_version_mismatch_even_if_resigned():
    blob = encode_checkpoint(random_adapter(6))
    end = blob.index(b"\nend\n")
    lines = blob[:end].decode().split("\n")
    payload = blob[end + 5:]
    lines[1] = "version=2"
    signed = [l for l in lines if not l.startswith("checksum=")]
    digest = hashlib.sha256(("\n".join(signed) + "\n").encode() + payload).hexdigest()
    lines = signed + [f"checksum=sha256:{digest}", "end"]
    with pytest.raises(UnsupportedVersionError):
        decode_checkpoint(("\n".join(lines) + "\n").encode() + payload)
