"""
NucleiGrind — Bit-exact artifact formats.

PGM: binary "P5", maxval 65535, 16-bit big-endian samples, row-major.
SEF1: ASCII header "SEF1 <height> <width> <channels>\\n" followed by
row-major, channel-interleaved little-endian float32 samples.
"""
import logging
import os

import numpy as np

from engine.errors import FormatError
from engine.validator import as_label_map, as_scalar_field

logger = logging.getLogger(__name__)

PGM_MAXVAL = 65535
SEF1_MAGIC = b"SEF1"
_F32_LE = np.dtype("<f4")
_U16_BE = np.dtype(">u2")


# ═══════════════════════════════════════════════════════════
#  PGM
# ═══════════════════════════════════════════════════════════

def encode_pgm(labels):
    """Serialize a label map (or semantic / direction map) to P5 bytes."""
    arr = as_label_map(labels)
    if arr.size and arr.max() > PGM_MAXVAL:
        raise FormatError(f"label {arr.max()} exceeds PGM maxval {PGM_MAXVAL}")
    height, width = arr.shape
    header = f"P5\n{width} {height}\n{PGM_MAXVAL}\n".encode("ascii")
    return header + arr.astype(_U16_BE).tobytes()


def _pgm_tokens(data):
    """Yield (token, end_offset) for the first four header tokens, skipping comments."""
    pos = 0
    tokens = []
    while len(tokens) < 4:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if pos >= len(data):
            raise FormatError("truncated PGM header")
        if data[pos:pos + 1] == b"#":
            end = data.find(b"\n", pos)
            if end < 0:
                raise FormatError("truncated PGM header")
            pos = end + 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        tokens.append(data[start:pos])
    # exactly one whitespace byte separates maxval from the raster
    return tokens, pos + 1


def decode_pgm(data):
    """Parse P5 bytes into an int64 H×W array."""
    tokens, offset = _pgm_tokens(data)
    if tokens[0] != b"P5":
        raise FormatError(f"not a binary PGM (magic {tokens[0]!r})")
    try:
        width, height, maxval = (int(t) for t in tokens[1:4])
    except ValueError as e:
        raise FormatError(f"bad PGM header: {e}") from e
    if width < 0 or height < 0 or not 0 < maxval <= PGM_MAXVAL:
        raise FormatError(f"bad PGM header: {width}x{height} maxval {maxval}")
    dtype = np.dtype("u1") if maxval < 256 else _U16_BE
    expected = width * height * dtype.itemsize
    raster = data[offset:offset + expected]
    if len(raster) != expected:
        raise FormatError(f"PGM raster has {len(raster)} bytes, expected {expected}")
    values = np.frombuffer(raster, dtype=dtype).astype(np.int64)
    if values.size and values.max() > maxval:
        raise FormatError("PGM sample exceeds maxval")
    return values.reshape(height, width)


def write_pgm(path, labels):
    with open(path, "wb") as f:
        f.write(encode_pgm(labels))
    logger.debug("Wrote PGM %s", path)


def read_pgm(path):
    with open(path, "rb") as f:
        return decode_pgm(f.read())


# ═══════════════════════════════════════════════════════════
#  SEF1
# ═══════════════════════════════════════════════════════════

def encode_sef1(field):
    arr = as_scalar_field(field)
    height, width, channels = arr.shape
    header = f"SEF1 {height} {width} {channels}\n".encode("ascii")
    return header + arr.astype(_F32_LE).tobytes()


def decode_sef1(data):
    """Parse SEF1 bytes into a float64 H×W×C array (values are float32-exact)."""
    newline = data.find(b"\n")
    if newline < 0:
        raise FormatError("SEF1 header has no newline")
    parts = data[:newline].split(b" ")
    if len(parts) != 4 or parts[0] != SEF1_MAGIC:
        raise FormatError(f"bad SEF1 header {data[:newline]!r}")
    try:
        height, width, channels = (int(p) for p in parts[1:])
    except ValueError as e:
        raise FormatError(f"bad SEF1 header: {e}") from e
    if height < 0 or width < 0 or channels < 1:
        raise FormatError(f"bad SEF1 dimensions {height}x{width}x{channels}")
    payload = data[newline + 1:]
    expected = height * width * channels * _F32_LE.itemsize
    if len(payload) != expected:
        raise FormatError(f"SEF1 payload has {len(payload)} bytes, expected {expected}")
    values = np.frombuffer(payload, dtype=_F32_LE).astype(np.float64)
    if not np.all(np.isfinite(values)):
        raise FormatError("SEF1 payload contains NaN or Inf")
    return values.reshape(height, width, channels)


def write_sef1(path, field):
    with open(path, "wb") as f:
        f.write(encode_sef1(field))
    logger.debug("Wrote SEF1 %s", path)


def read_sef1(path):
    with open(path, "rb") as f:
        return decode_sef1(f.read())


def sniff_format(path):
    """Return 'pgm' or 'sef1' from the file magic."""
    with open(path, "rb") as f:
        head = f.read(4)
    if head[:2] == b"P5":
        return "pgm"
    if head == SEF1_MAGIC:
        return "sef1"
    raise FormatError(f"{os.path.basename(path)}: unknown artifact format")


def read_artifact(path, expected):
    """Read a PGM or SEF1 file after checking its magic matches ``expected``."""
    found = sniff_format(path)
    if found != expected:
        raise FormatError(f"{os.path.basename(path)}: expected {expected.upper()}, found {found.upper()}")
    return read_pgm(path) if found == "pgm" else read_sef1(path)
