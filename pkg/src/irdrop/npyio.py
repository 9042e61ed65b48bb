"""Minimal reader/writer for `.npy` version 1.0 files.

Deliberately restricted to what the dataset needs: little-endian IEEE-754
float arrays ('<f4' or '<f8') in C order. Anything else is rejected with an
explicit error rather than half-parsed. Written headers are space-padded and
newline-terminated so the whole header block (magic + version + length field
+ header text) is a multiple of 64 bytes and the data section starts aligned.
"""

from __future__ import annotations

import ast
import struct
from dataclasses import dataclass

import numpy as np

__all__ = [
    "NpyFormatError",
    "UnsupportedNpyError",
    "NpyHeader",
    "ArrayRecord",
    "read_npy",
    "write_npy",
    "load_npy",
    "save_npy",
]

MAGIC = b"\x93NUMPY"
_SUPPORTED_DESCRS = ("<f4", "<f8")
_HEADER_ALIGN = 64


class NpyFormatError(ValueError):
    """Malformed or truncated `.npy` data."""


class UnsupportedNpyError(NpyFormatError):
    """Well-formed `.npy` data using a feature this reader does not support."""


@dataclass(frozen=True)
class NpyHeader:
    descr: str
    fortran_order: bool
    shape: tuple[int, ...]

    @property
    def itemsize(self) -> int:
        return 4 if self.descr == "<f4" else 8

    @property
    def count(self) -> int:
        n = 1
        for dim in self.shape:
            n *= dim
        return n


@dataclass
class ArrayRecord:
    """A parsed array: header plus values widened to float64, C order."""

    header: NpyHeader
    data: np.ndarray


def _header_text(descr: str, shape: tuple[int, ...]) -> bytes:
    body = "{'descr': '%s', 'fortran_order': False, 'shape': %s, }" % (
        descr,
        repr(tuple(shape)),
    )
    # magic(6) + version(2) + length field(2) + text + padding + newline
    unpadded = len(MAGIC) + 2 + 2 + len(body) + 1
    pad = (-unpadded) % _HEADER_ALIGN
    return (body + " " * pad + "\n").encode("ascii")


def write_npy(data, shape=None, dtype: str = "f8") -> bytes:
    """Serialize an array as a version 1.0 `.npy` byte sequence.

    dtype is 'f4' or 'f8'; values are rounded to the target width. If shape is
    given, data is validated against it and reshaped (C order).
    """
    if dtype not in ("f4", "f8"):
        raise ValueError(f"dtype must be 'f4' or 'f8', got {dtype!r}")
    arr = np.asarray(data, dtype=np.float64)
    if shape is not None:
        shape = tuple(int(d) for d in shape)
        expected = 1
        for dim in shape:
            expected *= dim
        if arr.size != expected:
            raise NpyFormatError(
                f"data has {arr.size} elements, shape {shape} needs {expected}"
            )
        arr = arr.reshape(shape)
    descr = "<" + dtype
    header = _header_text(descr, arr.shape)
    out = bytearray()
    out += MAGIC
    out += b"\x01\x00"
    out += struct.pack("<H", len(header))
    out += header
    out += np.ascontiguousarray(arr, dtype=descr).tobytes()
    return bytes(out)


def _parse_header_dict(text: str) -> dict:
    try:
        parsed = ast.literal_eval(text)
    except (ValueError, SyntaxError) as exc:
        raise NpyFormatError(f"header is not a valid literal dict: {exc}") from None
    if not isinstance(parsed, dict):
        raise NpyFormatError("header is not a dict")
    if set(parsed) != {"descr", "fortran_order", "shape"}:
        raise NpyFormatError(f"unexpected header keys: {sorted(parsed)}")
    return parsed


def read_npy(buf: bytes) -> ArrayRecord:
    """Parse a version 1.0 `.npy` byte sequence into an ArrayRecord.

    Accepts '<f4' and '<f8' C-order arrays only; data is widened to float64.
    """
    buf = bytes(buf)
    if len(buf) < 10:
        raise NpyFormatError(f"too short to be a .npy file ({len(buf)} bytes)")
    if buf[:6] != MAGIC:
        raise NpyFormatError("bad magic, not a .npy file")
    major, minor = buf[6], buf[7]
    if (major, minor) != (1, 0):
        raise UnsupportedNpyError(f"unsupported format version {major}.{minor}")
    (header_len,) = struct.unpack_from("<H", buf, 8)
    data_start = 10 + header_len
    if len(buf) < data_start:
        raise NpyFormatError("truncated header")
    try:
        text = buf[10:data_start].decode("ascii")
    except UnicodeDecodeError as exc:
        raise NpyFormatError(f"header is not ASCII: {exc}") from None
    if not text.endswith("\n"):
        raise NpyFormatError("header text is not newline-terminated")
    fields = _parse_header_dict(text.strip())

    descr = fields["descr"]
    if descr not in _SUPPORTED_DESCRS:
        raise UnsupportedNpyError(f"unsupported dtype descriptor {descr!r}")
    if not isinstance(fields["fortran_order"], bool):
        raise NpyFormatError("fortran_order must be a boolean")
    if fields["fortran_order"]:
        raise UnsupportedNpyError("fortran_order arrays are not supported")
    shape = fields["shape"]
    if not isinstance(shape, tuple) or not all(
        isinstance(d, int) and d >= 0 for d in shape
    ):
        raise NpyFormatError(f"invalid shape {shape!r}")

    header = NpyHeader(descr=descr, fortran_order=False, shape=shape)
    needed = header.count * header.itemsize
    payload = buf[data_start:]
    if len(payload) < needed:
        raise NpyFormatError(
            f"truncated payload: need {needed} bytes, have {len(payload)}"
        )
    if len(payload) > needed:
        raise NpyFormatError(
            f"{len(payload) - needed} trailing bytes after array payload"
        )
    values = np.frombuffer(payload, dtype=descr).astype(np.float64)
    return ArrayRecord(header=header, data=values.reshape(shape))


def save_npy(path, data, dtype: str = "f4") -> None:
    """Write an array to disk; datasets default to f4, checkpoints pass f8."""
    try:
        with open(path, "wb") as fh:
            fh.write(write_npy(data, dtype=dtype))
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def load_npy(path) -> np.ndarray:
    """Read a `.npy` file from disk as a float64 array."""
    try:
        with open(path, "rb") as fh:
            buf = fh.read()
    except OSError as exc:
        raise OSError(f"cannot read {path}: {exc}") from exc
    return read_npy(buf).data
