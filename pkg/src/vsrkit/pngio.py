"""PNG frame I/O.

Supports 8- and 16-bit grayscale and RGB. An integer sample v decodes to
``v / (2**bits - 1)``; encoding clamps to [0, 1] and rounds half-up.
Implemented directly over zlib so 16-bit RGB round-trips are supported and
encoding is byte-reproducible.
"""

from __future__ import annotations

import struct
import zlib
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataIOError
from .frames import Frame, Sequence

__all__ = ["read_png", "write_png", "read_frame_dir", "write_frame_dir", "frame_filename"]

_SIGNATURE = b"\x89PNG\r\n\x1a\n"
# color type -> channel count (palette/alpha intentionally unsupported)
_COLOR_CHANNELS = {0: 1, 2: 3}


def _chunk(tag: bytes, payload: bytes) -> bytes:
    crc = zlib.crc32(tag + payload) & 0xFFFFFFFF
    return struct.pack(">I", len(payload)) + tag + payload + struct.pack(">I", crc)


def write_png(path, frame: Frame, bit_depth: int = 8) -> None:
    """Write a 1- or 3-channel frame as an 8- or 16-bit PNG."""
    if bit_depth not in (8, 16):
        raise ConfigError(f"PNG bit depth must be 8 or 16, got {bit_depth}")
    if frame.channels not in (1, 3):
        raise DataIOError(
            f"only 1- or 3-channel frames can be written as PNG, got {frame.channels}"
        )
    maxv = (1 << bit_depth) - 1
    q = np.floor(np.clip(frame.data, 0.0, 1.0) * maxv + 0.5)
    color_type = 0 if frame.channels == 1 else 2
    if bit_depth == 8:
        raw_rows = q.astype(">u1")
    else:
        raw_rows = q.astype(">u2")
    body = raw_rows.reshape(frame.height, -1).tobytes()
    stride = frame.width * frame.channels * (bit_depth // 8)
    scanlines = b"".join(
        b"\x00" + body[r * stride : (r + 1) * stride] for r in range(frame.height)
    )
    ihdr = struct.pack(">IIBBBBB", frame.width, frame.height, bit_depth, color_type, 0, 0, 0)
    data = (
        _SIGNATURE
        + _chunk(b"IHDR", ihdr)
        + _chunk(b"IDAT", zlib.compress(scanlines, 6))
        + _chunk(b"IEND", b"")
    )
    Path(path).write_bytes(data)


def _paeth(a: int, b: int, c: int) -> int:
    p = a + b - c
    pa, pb, pc = abs(p - a), abs(p - b), abs(p - c)
    if pa <= pb and pa <= pc:
        return a
    if pb <= pc:
        return b
    return c


def _unfilter(raw: bytes, height: int, stride: int, bpp: int) -> bytearray:
    out = bytearray(height * stride)
    pos = 0
    prev_start = -1
    for r in range(height):
        ftype = raw[pos]
        pos += 1
        line = bytearray(raw[pos : pos + stride])
        pos += stride
        cur = r * stride
        if ftype == 0:
            pass
        elif ftype == 1:  # Sub
            for i in range(bpp, stride):
                line[i] = (line[i] + line[i - bpp]) & 0xFF
        elif ftype == 2:  # Up
            if prev_start >= 0:
                for i in range(stride):
                    line[i] = (line[i] + out[prev_start + i]) & 0xFF
        elif ftype == 3:  # Average
            for i in range(stride):
                left = line[i - bpp] if i >= bpp else 0
                up = out[prev_start + i] if prev_start >= 0 else 0
                line[i] = (line[i] + ((left + up) >> 1)) & 0xFF
        elif ftype == 4:  # Paeth
            for i in range(stride):
                left = line[i - bpp] if i >= bpp else 0
                up = out[prev_start + i] if prev_start >= 0 else 0
                ul = out[prev_start + i - bpp] if (prev_start >= 0 and i >= bpp) else 0
                line[i] = (line[i] + _paeth(left, up, ul)) & 0xFF
        else:
            raise DataIOError(f"unsupported PNG filter type {ftype}")
        out[cur : cur + stride] = line
        prev_start = cur
    return out


def read_png(path) -> Frame:
    """Decode an 8- or 16-bit grayscale/RGB PNG into a frame."""
    try:
        blob = Path(path).read_bytes()
    except OSError as e:
        raise DataIOError(f"cannot read {path}: {e}") from e
    if blob[:8] != _SIGNATURE:
        raise DataIOError(f"{path} is not a PNG file")
    pos = 8
    ihdr = None
    idat = b""
    while pos + 8 <= len(blob):
        length, tag = struct.unpack(">I4s", blob[pos : pos + 8])
        payload = blob[pos + 8 : pos + 8 + length]
        pos += 12 + length
        if tag == b"IHDR":
            ihdr = payload
        elif tag == b"IDAT":
            idat += payload
        elif tag == b"IEND":
            break
    if ihdr is None or not idat:
        raise DataIOError(f"{path}: missing IHDR/IDAT chunks")
    width, height, bit_depth, color_type, comp, filt, interlace = struct.unpack(
        ">IIBBBBB", ihdr
    )
    if comp != 0 or filt != 0 or interlace != 0:
        raise DataIOError(f"{path}: unsupported PNG compression/filter/interlace flags")
    if bit_depth not in (8, 16) or color_type not in _COLOR_CHANNELS:
        raise DataIOError(
            f"{path}: only 8/16-bit grayscale or RGB PNGs are supported "
            f"(bit depth {bit_depth}, color type {color_type})"
        )
    channels = _COLOR_CHANNELS[color_type]
    nbytes = bit_depth // 8
    stride = width * channels * nbytes
    try:
        raw = zlib.decompress(idat)
    except zlib.error as e:
        raise DataIOError(f"{path}: corrupt PNG data: {e}") from e
    if len(raw) != height * (stride + 1):
        raise DataIOError(f"{path}: PNG payload has wrong size")
    flat = _unfilter(raw, height, stride, channels * nbytes)
    dtype = ">u1" if bit_depth == 8 else ">u2"
    arr = np.frombuffer(bytes(flat), dtype=dtype).reshape(height, width, channels)
    return Frame(arr.astype(np.float64) / ((1 << bit_depth) - 1))


def frame_filename(index: int) -> str:
    return f"frame_{index:06d}.png"


def read_frame_dir(path) -> Sequence:
    """Read every ``*.png`` in a directory, sorted by filename."""
    d = Path(path)
    if not d.is_dir():
        raise DataIOError(f"{path} is not a directory")
    files = sorted(d.glob("*.png"))
    if not files:
        raise DataIOError(f"no PNG frames found in {path}")
    return Sequence(tuple(read_png(f) for f in files))


def write_frame_dir(path, seq: Sequence, bit_depth: int = 8) -> list[str]:
    """Write a sequence as numbered PNGs; returns the filenames written."""
    d = Path(path)
    d.mkdir(parents=True, exist_ok=True)
    names = []
    for i, frame in enumerate(seq):
        name = frame_filename(i)
        write_png(d / name, frame, bit_depth=bit_depth)
        names.append(name)
    return names
