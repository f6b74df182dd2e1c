"""Low-level binary PNM (PGM/PPM) reading and writing.

Supports exactly the two layouts the toolkit stores: 8-bit P5/P6 with
maxval 255 (images, masks) and 16-bit P5 with maxval 65535 and samples
most-significant-byte first (label maps).  Round trips are bit exact.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .errors import FormatError


def _read_header(data: bytes, path: Path) -> tuple[bytes, int, int, int, int]:
    """Parse magic, width, height, maxval; return them plus the payload offset.

    Whitespace separates tokens; '#' starts a comment running to end of line.
    Exactly one whitespace byte follows the maxval token before the raster.
    """
    if len(data) < 2 or data[0:1] != b"P":
        raise FormatError(f"{path}: not a PNM file (bad magic)")
    magic = data[0:2]
    if magic not in (b"P5", b"P6"):
        raise FormatError(f"{path}: unsupported PNM magic {magic!r}")

    pos = 2
    tokens: list[int] = []
    while len(tokens) < 3:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos] == ord("#"):
            nl = data.find(b"\n", pos)
            if nl < 0:
                raise FormatError(f"{path}: unterminated comment in header")
            pos = nl + 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        tok = data[start:pos]
        if not tok.isdigit():
            raise FormatError(f"{path}: malformed header token {tok!r}")
        tokens.append(int(tok))
    if pos >= len(data):
        raise FormatError(f"{path}: header ends before raster data")
    pos += 1  # single whitespace byte after maxval
    width, height, maxval = tokens
    if width <= 0 or height <= 0:
        raise FormatError(f"{path}: non-positive dimensions {width}x{height}")
    return magic, width, height, maxval, pos


def read_pnm8(path: str | Path) -> np.ndarray:
    """Read an 8-bit binary PGM or PPM; returns (H, W) or (H, W, 3) uint8."""
    path = Path(path)
    data = path.read_bytes()
    magic, width, height, maxval, offset = _read_header(data, path)
    if maxval != 255:
        raise FormatError(f"{path}: expected maxval 255, got {maxval}")
    channels = 1 if magic == b"P5" else 3
    expected = width * height * channels
    payload = data[offset : offset + expected]
    if len(payload) < expected:
        raise FormatError(f"{path}: truncated raster data")
    flat = np.frombuffer(payload, dtype=np.uint8).copy()
    if channels == 1:
        return flat.reshape(height, width)
    return flat.reshape(height, width, 3)


def write_pnm8(arr: np.ndarray, path: str | Path) -> None:
    """Write uint8 (H, W) as P5 or (H, W, 3) as P6, maxval 255."""
    arr = np.ascontiguousarray(arr, dtype=np.uint8)
    if arr.ndim == 2:
        magic = b"P5"
        h, w = arr.shape
    elif arr.ndim == 3 and arr.shape[2] == 3:
        magic = b"P6"
        h, w = arr.shape[:2]
    else:
        raise FormatError(f"cannot write array of shape {arr.shape} as PNM")
    header = magic + f"\n{w} {h}\n255\n".encode("ascii")
    Path(path).write_bytes(header + arr.tobytes())


def read_pgm16(path: str | Path) -> np.ndarray:
    """Read a 16-bit binary PGM (maxval 65535, MSB first); returns (H, W) uint16."""
    path = Path(path)
    data = path.read_bytes()
    magic, width, height, maxval, offset = _read_header(data, path)
    if magic != b"P5":
        raise FormatError(f"{path}: 16-bit label maps must be P5, got {magic!r}")
    if maxval != 65535:
        raise FormatError(f"{path}: expected maxval 65535, got {maxval}")
    expected = width * height * 2
    payload = data[offset : offset + expected]
    if len(payload) < expected:
        raise FormatError(f"{path}: truncated raster data")
    grid = np.frombuffer(payload, dtype=">u2").reshape(height, width)
    return grid.astype(np.uint16)


def write_pgm16(grid: np.ndarray, path: str | Path) -> None:
    """Write uint16 (H, W) as P5 with maxval 65535, MSB first."""
    grid = np.ascontiguousarray(grid, dtype=np.uint16)
    if grid.ndim != 2:
        raise FormatError(f"cannot write array of shape {grid.shape} as PGM")
    h, w = grid.shape
    header = f"P5\n{w} {h}\n65535\n".encode("ascii")
    Path(path).write_bytes(header + grid.astype(">u2").tobytes())
