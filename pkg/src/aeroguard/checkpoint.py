"""Binary model checkpoints with integrity and compatibility checks.

Layout, all little-endian:

    magic   4 bytes  b"AEGD"
    version u32      format version (currently 1)
    kind    u8       1 = detector autoencoder, 2 = fault classifier
    digest  32 bytes sha256 of the canonical config rendering
    count   u32      number of parameter entries
    entries          name-length u16, name utf-8, ndim u8, dims u32 each,
                     payload float32 little-endian, C order
    crc     u32      zlib crc32 over all payload bytes, in file order

Entries are written sorted by name so identical parameters give identical
bytes no matter how the caller ordered them.  The digest ties a checkpoint
to the configuration that produced it; loading against a different config
is a compatibility error, a corrupt payload is a checksum error.
"""

from __future__ import annotations

import dataclasses
import hashlib
import struct
import zlib
from dataclasses import dataclass

import numpy as np

from .errors import ChecksumError, CompatibilityError, ContractError, FormatError

MAGIC = b"AEGD"
VERSION = 1

KINDS = {"detector": 1, "classifier": 2}
KIND_NAMES = {v: k for k, v in KINDS.items()}


def config_digest(config) -> bytes:
    """sha256 over a canonical text rendering of a config dataclass."""
    if not dataclasses.is_dataclass(config):
        raise ContractError("config_digest needs a dataclass config")
    lines = [type(config).__name__]
    for f in sorted(dataclasses.fields(config), key=lambda f: f.name):
        lines.append(f"{f.name}={getattr(config, f.name)!r}")
    return hashlib.sha256("\n".join(lines).encode("utf-8")).digest()


@dataclass
class Checkpoint:
    kind: str
    version: int
    digest: bytes
    arrays: dict  # name -> float32 ndarray


def save_checkpoint(path, kind, config, arrays):
    """Write named parameter arrays for a model of the given kind."""
    if kind not in KINDS:
        raise ContractError(f"unknown checkpoint kind {kind!r}")
    if not arrays:
        raise ContractError("refusing to write an empty checkpoint")
    digest = config_digest(config)
    payloads = []
    head = [MAGIC, struct.pack("<IB", VERSION, KINDS[kind]), digest]
    head.append(struct.pack("<I", len(arrays)))
    for name in sorted(arrays):
        arr = np.ascontiguousarray(arrays[name], dtype="<f4")
        encoded = name.encode("utf-8")
        if len(encoded) > 0xFFFF:
            raise ContractError(f"parameter name too long: {name[:40]}...")
        head.append(struct.pack("<H", len(encoded)))
        head.append(encoded)
        head.append(struct.pack("<B", arr.ndim))
        head.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        payload = arr.tobytes()
        head.append(payload)
        payloads.append(payload)
    crc = zlib.crc32(b"".join(payloads)) & 0xFFFFFFFF
    head.append(struct.pack("<I", crc))
    with open(path, "wb") as fh:
        fh.write(b"".join(head))


class _Reader:
    def __init__(self, blob, path):
        self.blob = blob
        self.pos = 0
        self.path = path

    def take(self, n, what):
        if self.pos + n > len(self.blob):
            raise FormatError(f"{self.path}: truncated while reading {what}")
        out = self.blob[self.pos : self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt, what):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt), what))


def load_checkpoint(path) -> Checkpoint:
    with open(path, "rb") as fh:
        blob = fh.read()
    r = _Reader(blob, str(path))
    if r.take(4, "magic") != MAGIC:
        raise FormatError(f"{path}: not a checkpoint file (bad magic)")
    version, kind_code = r.unpack("<IB", "header")
    if version != VERSION:
        raise FormatError(f"{path}: unsupported format version {version}")
    if kind_code not in KIND_NAMES:
        raise FormatError(f"{path}: unknown model kind {kind_code}")
    digest = r.take(32, "config digest")
    (count,) = r.unpack("<I", "entry count")
    arrays = {}
    payloads = []
    for _ in range(count):
        (name_len,) = r.unpack("<H", "name length")
        name = r.take(name_len, "name").decode("utf-8")
        (ndim,) = r.unpack("<B", "ndim")
        shape = r.unpack(f"<{ndim}I", "shape") if ndim else ()
        size = int(np.prod(shape, dtype=np.int64)) if shape else 1
        payload = r.take(4 * size, f"payload of {name}")
        if name in arrays:
            raise FormatError(f"{path}: duplicate parameter {name}")
        arrays[name] = np.frombuffer(payload, dtype="<f4").reshape(shape).copy()
        payloads.append(payload)
    (stored_crc,) = r.unpack("<I", "crc")
    if r.pos != len(blob):
        raise FormatError(f"{path}: {len(blob) - r.pos} trailing bytes")
    crc = zlib.crc32(b"".join(payloads)) & 0xFFFFFFFF
    if crc != stored_crc:
        raise ChecksumError(
            f"{path}: payload crc {crc:08x} does not match stored {stored_crc:08x}"
        )
    return Checkpoint(
        kind=KIND_NAMES[kind_code], version=version, digest=digest, arrays=arrays
    )


def require_digest(checkpoint: Checkpoint, config, what="checkpoint"):
    """Fail if the checkpoint was produced under a different config."""
    expect = config_digest(config)
    if checkpoint.digest != expect:
        raise CompatibilityError(
            f"{what} was trained under a different configuration "
            f"(digest {checkpoint.digest.hex()[:12]}... vs {expect.hex()[:12]}...)"
        )
