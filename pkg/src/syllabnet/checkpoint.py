"""Checkpoint file format.

A checkpoint is one line of UTF-8 JSON (the header) terminated by ``\\n``,
followed immediately by the parameter blob.  The blob is every parameter
array, in :func:`syllabnet.network.parameter_shapes` order, written as
C-order little-endian float64.  The header records each array's name, shape
and byte offset into the blob, the blob length and its CRC-32.

Header keys: ``format_version``, ``config``, ``vocabulary`` (index order),
``lexicon_format``, ``training_seed``, ``metadata`` (str -> str),
``parameters``, ``blob_bytes``, ``blob_crc32``.  Keys are sorted so that
saving a loaded checkpoint reproduces the file byte for byte.
"""

from __future__ import annotations

import json
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import ModelConfig
from .lexicon import LexiconFormat, PhoneVocabulary
from .network import Params, parameter_shapes

FORMAT_VERSION = 1


class CheckpointError(ValueError):
    pass


class UnsupportedVersion(CheckpointError):
    pass


@dataclass
class Checkpoint:
    config: ModelConfig
    vocabulary: PhoneVocabulary
    lexicon_format: LexiconFormat
    parameters: Params
    training_seed: int = 0
    metadata: dict[str, str] = field(default_factory=dict)
    format_version: int = FORMAT_VERSION


def to_bytes(ckpt: Checkpoint) -> bytes:
    expected = parameter_shapes(ckpt.config, len(ckpt.vocabulary))
    if list(expected) != list(ckpt.parameters):
        raise CheckpointError("parameter names do not match the config")
    blocks, entries, offset = [], [], 0
    for name, shape in expected.items():
        arr = np.ascontiguousarray(ckpt.parameters[name], dtype="<f8")
        if arr.shape != shape:
            raise CheckpointError(f"{name}: shape {arr.shape} != expected {shape}")
        raw = arr.tobytes(order="C")
        entries.append({"name": name, "shape": list(shape), "offset": offset})
        blocks.append(raw)
        offset += len(raw)
    blob = b"".join(blocks)
    header = {
        "format_version": ckpt.format_version,
        "config": ckpt.config.to_dict(),
        "vocabulary": ckpt.vocabulary.to_list(),
        "lexicon_format": ckpt.lexicon_format.to_dict(),
        "training_seed": int(ckpt.training_seed),
        "metadata": {str(k): str(v) for k, v in ckpt.metadata.items()},
        "parameters": entries,
        "blob_bytes": len(blob),
        "blob_crc32": zlib.crc32(blob),
    }
    line = json.dumps(header, sort_keys=True, ensure_ascii=True, separators=(",", ":"))
    return line.encode("ascii") + b"\n" + blob


def from_bytes(data: bytes) -> Checkpoint:
    nl = data.find(b"\n")
    if nl < 0:
        raise CheckpointError("truncated checkpoint: no header terminator")
    try:
        header = json.loads(data[:nl].decode("ascii"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"unreadable checkpoint header: {exc}") from None
    version = header.get("format_version")
    if version != FORMAT_VERSION:
        raise UnsupportedVersion(f"unsupported checkpoint version {version!r} (expected {FORMAT_VERSION})")
    blob = data[nl + 1 :]
    if len(blob) != header["blob_bytes"]:
        raise CheckpointError(f"truncated checkpoint: blob has {len(blob)} bytes, header says {header['blob_bytes']}")
    if zlib.crc32(blob) != header["blob_crc32"]:
        raise CheckpointError("checksum mismatch: parameter blob is corrupted")

    config = ModelConfig.from_dict(header["config"])
    params: Params = {}
    for ent in header["parameters"]:
        shape = tuple(ent["shape"])
        count = int(np.prod(shape))
        arr = np.frombuffer(blob, dtype="<f8", count=count, offset=ent["offset"]).reshape(shape)
        params[ent["name"]] = arr.astype(config.dtype)
    return Checkpoint(
        config=config,
        vocabulary=PhoneVocabulary.from_list(header["vocabulary"]),
        lexicon_format=LexiconFormat.from_dict(header["lexicon_format"]),
        parameters=params,
        training_seed=header["training_seed"],
        metadata=dict(header["metadata"]),
        format_version=version,
    )


def save_checkpoint(ckpt: Checkpoint, path: str | Path):
    Path(path).write_bytes(to_bytes(ckpt))


def load_checkpoint(path: str | Path) -> Checkpoint:
    return from_bytes(Path(path).read_bytes())
