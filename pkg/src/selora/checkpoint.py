"""Bit-exact adapter checkpoints.

Layout: a line-oriented ASCII header terminated by ``end``, followed by a raw
little-endian payload::

    SELORA1
    version=1
    config={"alpha": 32.0, ...}
    section=index_a,<u4,820,2
    section=values_a,<f8,820
    ...
    opt_t=2000
    opt_config={...}
    checksum=sha256:<hex digest of the lines above plus the payload>
    end
    <payload bytes, sections concatenated in header order>
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .adapter import Adapter, AdapterConfig, IndexSet, InitScheme, Schema, SparseSpectralMatrix
from .errors import CheckpointFormatError, CorruptionError, UnsupportedVersionError
from .optim import OptimizerConfig, OptimizerState
from .spectral import SpectralBasis

MAGIC = "SELORA1"
VERSION = 1


def _config_dict(config: AdapterConfig) -> dict:
    return {
        "in_dim": config.in_dim,
        "out_dim": config.out_dim,
        "rank": config.rank,
        "alpha": config.alpha,
        "sparse_ratio": config.sparse_ratio,
        "basis": config.basis.name,
        "schema": config.schema.value,
        "init_scheme": config.init_scheme.value,
        "dropout_rate": config.dropout_rate,
        "seed": config.seed,
    }


def _config_from_dict(d: dict) -> AdapterConfig:
    return AdapterConfig(
        in_dim=d["in_dim"],
        out_dim=d["out_dim"],
        rank=d["rank"],
        alpha=d["alpha"],
        sparse_ratio=d["sparse_ratio"],
        basis=SpectralBasis.from_name(d["basis"]),
        schema=Schema(d["schema"]),
        init_scheme=InitScheme(d["init_scheme"]),
        dropout_rate=d["dropout_rate"],
        seed=d["seed"],
    )


def _canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def _digest(header_lines: list[str], payload: bytes) -> str:
    h = hashlib.sha256()
    h.update(("\n".join(header_lines) + "\n").encode("ascii"))
    h.update(payload)
    return h.hexdigest()


def encode_checkpoint(adapter: Adapter, optimizer_state: OptimizerState | None = None) -> bytes:
    sections = [
        ("index_a", adapter.fa.index_set.indices.astype("<u4")),
        ("index_b", adapter.fb.index_set.indices.astype("<u4")),
        ("values_a", adapter.fa.values.astype("<f8")),
        ("values_b", adapter.fb.values.astype("<f8")),
        ("w0", adapter.W0.astype("<f8")),
    ]
    if adapter.magnitude is not None:
        sections.append(("magnitude", adapter.magnitude.astype("<f8")))
    header = [MAGIC, f"version={VERSION}", f"config={_canonical_json(_config_dict(adapter.config))}"]
    header.append(f"init_stats={_canonical_json(adapter.init_stats)}")
    if optimizer_state is not None:
        sections.append(("opt_m", optimizer_state.first_moment.astype("<f8")))
        sections.append(("opt_v", optimizer_state.second_moment.astype("<f8")))
        header.append(f"opt_t={optimizer_state.t}")
        header.append(f"opt_config={_canonical_json(asdict(optimizer_state.config))}")
    payload = b"".join(np.ascontiguousarray(arr).tobytes() for _, arr in sections)
    for name, arr in sections:
        header.append(f"section={name},{arr.dtype.str},{','.join(map(str, arr.shape))}")
    header.append(f"checksum=sha256:{_digest(header, payload)}")
    header.append("end")
    return ("\n".join(header) + "\n").encode("ascii") + payload


def decode_checkpoint(blob: bytes) -> tuple[Adapter, OptimizerState | None]:
    first = blob.split(b"\n", 1)[0]
    if first != MAGIC.encode():
        raise CheckpointFormatError(f"bad magic {first[:16]!r}")
    marker = b"\nend\n"
    pos = blob.find(marker)
    if pos < 0:
        raise CheckpointFormatError("header terminator not found")
    try:
        lines = blob[:pos].decode("ascii").split("\n")[1:]
    except UnicodeDecodeError:
        raise CheckpointFormatError("header is not ASCII") from None
    payload = blob[pos + len(marker):]
    version_line = lines[0] if lines else ""
    if not version_line.startswith("version="):
        raise CheckpointFormatError("missing version")
    try:
        version = int(version_line[len("version="):])
    except ValueError:
        raise CheckpointFormatError(f"bad version line {version_line!r}") from None
    if version != VERSION:
        raise UnsupportedVersionError(f"checkpoint version {version}, expected {VERSION}")
    digest = next((l[len("checksum="):] for l in lines if l.startswith("checksum=")), None)
    if digest is None:
        raise CheckpointFormatError("missing checksum")
    signed = [MAGIC] + [l for l in lines if not l.startswith("checksum=")]
    if digest != f"sha256:{_digest(signed, payload)}":
        raise CorruptionError("checksum mismatch")
    fields: dict[str, str] = {}
    sections = []
    try:
        for line in lines:
            key, sep, value = line.partition("=")
            if not sep:
                raise ValueError(f"malformed header line {line!r}")
            if key == "section":
                name, dtype, *shape = value.split(",")
                sections.append((name, np.dtype(dtype), tuple(int(s) for s in shape if s)))
            else:
                fields[key] = value
    except (ValueError, TypeError) as exc:
        raise CheckpointFormatError(f"bad header: {exc}") from None

    arrays = {}
    offset = 0
    for name, dtype, shape in sections:
        count = int(np.prod(shape)) if shape else 1
        nbytes = count * dtype.itemsize
        if offset + nbytes > len(payload):
            raise CorruptionError(f"payload truncated in section {name}")
        arrays[name] = np.frombuffer(payload, dtype=dtype, count=count, offset=offset).reshape(shape)
        offset += nbytes
    if offset != len(payload):
        raise CorruptionError("trailing bytes after payload")

    config = _config_from_dict(json.loads(fields["config"]))
    idx_a = arrays["index_a"].astype(np.int64)
    idx_b = arrays["index_b"].astype(np.int64)
    fa = SparseSpectralMatrix(
        IndexSet(config.rank, config.in_dim, idx_a, config.seed), arrays["values_a"].astype(np.float64)
    )
    fb = SparseSpectralMatrix(
        IndexSet(config.out_dim, config.rank, idx_b, config.seed), arrays["values_b"].astype(np.float64)
    )
    magnitude = arrays["magnitude"].astype(np.float64) if "magnitude" in arrays else None
    adapter = Adapter(
        config,
        arrays["w0"].astype(np.float64),
        fa,
        fb,
        magnitude,
        json.loads(fields.get("init_stats", "{}")),
    )
    state = None
    if "opt_m" in arrays:
        state = OptimizerState(
            OptimizerConfig(**json.loads(fields["opt_config"])),
            arrays["opt_m"].astype(np.float64),
            arrays["opt_v"].astype(np.float64),
            int(fields["opt_t"]),
        )
    return adapter, state


def save_checkpoint(adapter: Adapter, optimizer_state: OptimizerState | None, path) -> None:
    Path(path).write_bytes(encode_checkpoint(adapter, optimizer_state))


def load_checkpoint(path) -> tuple[Adapter, OptimizerState | None]:
    return decode_checkpoint(Path(path).read_bytes())
