"""Bit-exact persistence and the key=value training-config reader.

Two little-endian binary layouts, both CRC-checked and written atomically
(temp file in the target directory, then rename):

noise file (magic "NOFT", version 1):
    magic[4] | version u16 | rank u16 | dims u32 * rank
    | payload float32 * prod(dims), row-major | crc32(payload) u32

checkpoint file (magic "NOFC", version 1):
    magic[4] | version u16 | rank u16 | dims u32 * rank
    | n_iters u32 | restandardize u8 | block_count u16
    | blocks: name_len u16 | name utf-8 | dtype_code u8 (4=f32, 8=f64)
              | rank u16 | dims u32 * rank | payload | crc32(payload) u32

The noise layout is the wire contract for downstream consumers and is
frozen at version 1.
"""

from __future__ import annotations

import json
import os
import struct
import tempfile
import zlib

import numpy as np

from .attention import AttentionParams
from .bottleneck import FilterMap
from .errors import (
    BadMagicError,
    ChecksumError,
    ConfigError,
    FormatError,
    ShapeError,
    TruncatedFileError,
    VersionError,
)
from .model import NoftModel, TrainConfig, TrainReport
from .tensor import validate_noise_shape
from .verify import TradeoffReport

NOISE_MAGIC = b"NOFT"
CHECKPOINT_MAGIC = b"NOFC"
FORMAT_VERSION = 1

_DTYPE_CODES = {4: np.dtype("<f4"), 8: np.dtype("<f8")}
_CHECKPOINT_BLOCKS = ("wq", "wk", "wv", "bq", "bk", "bv", "filter_logits")


def _atomic_write(path, data: bytes) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".noft-tmp-")
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(data)
            handle.flush()
            os.fsync(handle.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


class _Reader:
    """Strict byte cursor; running past the end reports truncation."""

    def __init__(self, data: bytes, what: str):
        self.data = data
        self.pos = 0
        self.what = what

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise TruncatedFileError(
                f"truncated {self.what}: needed {n} bytes at offset {self.pos}, "
                f"file has {len(self.data)}"
            )
        chunk = self.data[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def done(self) -> None:
        if self.pos != len(self.data):
            raise FormatError(
                f"{self.what} has {len(self.data) - self.pos} trailing bytes"
            )


def _check_magic_version(reader: _Reader, magic: bytes) -> None:
    got = reader.take(4)
    if got != magic:
        raise BadMagicError(f"expected magic {magic!r}, got {got!r}")
    (version,) = reader.unpack("<H")
    if version != FORMAT_VERSION:
        raise VersionError(f"unsupported format version {version}, expected {FORMAT_VERSION}")


def _pack_dims(shape) -> bytes:
    return struct.pack("<H", len(shape)) + struct.pack(f"<{len(shape)}I", *shape)


def _read_dims(reader: _Reader) -> tuple[int, ...]:
    (rank,) = reader.unpack("<H")
    return tuple(reader.unpack(f"<{rank}I")) if rank else ()


def write_noise(path, t) -> None:
    """Serialize one float32 noise tensor; round-trips are bitwise lossless."""
    t = np.asarray(t)
    shape = validate_noise_shape(t.shape)
    payload = np.ascontiguousarray(t, dtype="<f4").tobytes()
    blob = (
        NOISE_MAGIC
        + struct.pack("<H", FORMAT_VERSION)
        + _pack_dims(shape)
        + payload
        + struct.pack("<I", zlib.crc32(payload) & 0xFFFFFFFF)
    )
    _atomic_write(path, blob)


def read_noise(path) -> np.ndarray:
    with open(path, "rb") as handle:
        reader = _Reader(handle.read(), "noise file")
    _check_magic_version(reader, NOISE_MAGIC)
    shape = validate_noise_shape(_read_dims(reader))
    count = int(np.prod(shape))
    payload = reader.take(4 * count)
    (stored_crc,) = reader.unpack("<I")
    reader.done()
    if zlib.crc32(payload) & 0xFFFFFFFF != stored_crc:
        raise ChecksumError("noise payload CRC32 mismatch")
    return np.frombuffer(payload, dtype="<f4").reshape(shape).copy()


def _pack_block(name: str, arr: np.ndarray) -> bytes:
    arr = np.asarray(arr)
    code = arr.dtype.itemsize
    if code not in _DTYPE_CODES:
        raise FormatError(f"block {name} has unsupported dtype {arr.dtype}")
    payload = np.ascontiguousarray(arr, dtype=_DTYPE_CODES[code]).tobytes()
    encoded = name.encode("utf-8")
    return (
        struct.pack("<H", len(encoded))
        + encoded
        + struct.pack("<B", code)
        + _pack_dims(arr.shape)
        + payload
        + struct.pack("<I", zlib.crc32(payload) & 0xFFFFFFFF)
    )


def _read_block(reader: _Reader):
    (name_len,) = reader.unpack("<H")
    name = reader.take(name_len).decode("utf-8")
    (code,) = reader.unpack("<B")
    if code not in _DTYPE_CODES:
        raise FormatError(f"block {name} has unknown dtype code {code}")
    dtype = _DTYPE_CODES[code]
    dims = _read_dims(reader)
    count = int(np.prod(dims)) if dims else 1
    payload = reader.take(dtype.itemsize * count)
    (stored_crc,) = reader.unpack("<I")
    if zlib.crc32(payload) & 0xFFFFFFFF != stored_crc:
        raise ChecksumError(f"block {name} CRC32 mismatch")
    return name, np.frombuffer(payload, dtype=dtype).reshape(dims).copy()


def write_checkpoint(path, model: NoftModel) -> None:
    """Serialize every trainable block of a model, each CRC-checked."""
    params = model.parameters()
    blob = bytearray()
    blob += CHECKPOINT_MAGIC
    blob += struct.pack("<H", FORMAT_VERSION)
    blob += _pack_dims(model.shape)
    blob += struct.pack("<I", model.n_iters)
    blob += struct.pack("<B", 1 if model.restandardize else 0)
    blob += struct.pack("<H", len(_CHECKPOINT_BLOCKS))
    for name in _CHECKPOINT_BLOCKS:
        blob += _pack_block(name, params[name])
    _atomic_write(path, bytes(blob))


def read_checkpoint(path) -> NoftModel:
    with open(path, "rb") as handle:
        reader = _Reader(handle.read(), "checkpoint file")
    _check_magic_version(reader, CHECKPOINT_MAGIC)
    shape = validate_noise_shape(_read_dims(reader))
    (n_iters,) = reader.unpack("<I")
    (restd,) = reader.unpack("<B")
    if restd not in (0, 1):
        raise FormatError(f"restandardize flag must be 0 or 1, got {restd}")
    (block_count,) = reader.unpack("<H")
    blocks: dict[str, np.ndarray] = {}
    for _ in range(block_count):
        name, arr = _read_block(reader)
        blocks[name] = arr
    reader.done()

    missing = [n for n in _CHECKPOINT_BLOCKS if n not in blocks]
    if missing:
        raise FormatError(f"checkpoint is missing blocks: {missing}")
    c = shape[0]
    expected = {
        "wq": (c, c), "wk": (c, c), "wv": (c, c),
        "bq": (c,), "bk": (c,), "bv": (c,),
        "filter_logits": shape,
    }
    for name, want in expected.items():
        if blocks[name].shape != want:
            raise ShapeError(
                f"checkpoint block {name} has shape {blocks[name].shape}, expected {want}"
            )
    attention = AttentionParams(
        wq=blocks["wq"], wk=blocks["wk"], wv=blocks["wv"],
        bq=blocks["bq"], bk=blocks["bk"], bv=blocks["bv"],
    )
    return NoftModel(
        attention=attention,
        filter=FilterMap(blocks["filter_logits"]),
        shape=shape,
        n_iters=int(n_iters),
        restandardize=bool(restd),
    )


_CONFIG_PARSERS = {
    "beta": float,
    "learning_rate": float,
    "steps": int,
    "seed": int,
    "mode": str,
    "div_policy": str,
    "batch": int,
    "adam_beta1": float,
    "adam_beta2": float,
    "adam_eps": float,
    "n_iters": int,
    "restandardize": None,   # parsed as a bool below
    "filter_logit_init": float,
}

_TRUE_WORDS = {"true", "1", "yes", "on"}
_FALSE_WORDS = {"false", "0", "no", "off"}


def read_config(path) -> TrainConfig:
    """Parse a key = value text file; unspecified keys keep the defaults
    (learning rate 2e-3, 20000 steps, batch 1, beta 0.01)."""
    values = {}
    with open(path, "r", encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            if "=" not in stripped:
                raise ConfigError(f"line {line_no} is not a key = value pair: {stripped!r}")
            key, _, raw = stripped.partition("=")
            key = key.strip()
            raw = raw.strip()
            if key not in _CONFIG_PARSERS:
                raise ConfigError(f"unknown config key {key!r} on line {line_no}")
            parser = _CONFIG_PARSERS[key]
            if parser is None:
                word = raw.lower()
                if word in _TRUE_WORDS:
                    values[key] = True
                elif word in _FALSE_WORDS:
                    values[key] = False
                else:
                    raise ConfigError(f"cannot parse value for {key!r}: {raw!r}")
            else:
                try:
                    values[key] = parser(raw)
                except ValueError:
                    raise ConfigError(f"cannot parse value for {key!r}: {raw!r}") from None
    return TrainConfig(**values)


def write_train_report_csv(path, report: TrainReport) -> None:
    """Per-step metrics as CSV; content depends only on the run, never on timing."""
    lines = ["step,loss,l_noise,l_info,mean_lambda"]
    for i in range(report.steps):
        lines.append(
            f"{i + 1},{report.loss[i]!r},{report.l_noise[i]!r},"
            f"{report.l_info[i]!r},{report.mean_lambda[i]!r}"
        )
    _atomic_write(path, ("\n".join(lines) + "\n").encode("utf-8"))


def write_sweep_report(path, report: TradeoffReport) -> None:
    """Machine-readable sweep report (JSON)."""
    _atomic_write(path, (json.dumps(report.as_dict(), indent=2) + "\n").encode("utf-8"))
