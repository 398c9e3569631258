"""Binary PPM (P6) / PGM (P5) reader and writer, maxval 255."""
from pathlib import Path

import numpy as np

from errors import DataError


def _read_header(data: bytes, magic: bytes) -> tuple[int, int, int, int]:
    """Return (width, height, maxval, payload offset), skipping '#' comments."""
    tokens: list[bytes] = []
    pos = 0
    while len(tokens) < 4:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if pos >= len(data):
            raise DataError("truncated netpbm header")
        if data[pos : pos + 1] == b"#":
            end = data.find(b"\n", pos)
            pos = len(data) if end < 0 else end + 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        tokens.append(data[start:pos])
    if tokens[0] != magic:
        raise DataError(f"expected {magic.decode()} file, found {tokens[0][:8]!r}")
    try:
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError:
        raise DataError("malformed netpbm header") from None
    if maxval != 255:
        raise DataError(f"unsupported maxval {maxval} (only 255)")
    return width, height, maxval, pos + 1  # exactly one whitespace byte precedes the raster


def _load(path: str | Path, magic: bytes, channels: int) -> np.ndarray:
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as e:
        raise DataError(f"cannot read {path}: {e}") from None
    width, height, _, offset = _read_header(data, magic)
    size = width * height * channels
    payload = data[offset : offset + size]
    if len(payload) != size:
        raise DataError(f"{path}: raster has {len(payload)} bytes, expected {size}")
    arr = np.frombuffer(payload, dtype=np.uint8)
    return arr.reshape(height, width, channels) if channels > 1 else arr.reshape(height, width)


def _save(path: str | Path, magic: bytes, raster: np.ndarray) -> None:
    path = Path(path)
    height, width = raster.shape[:2]
    header = b"%s\n%d %d\n255\n" % (magic, width, height)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(header + np.ascontiguousarray(raster, dtype=np.uint8).tobytes())
    except OSError as e:
        raise DataError(f"cannot write {path}: {e}") from None


def write_ppm(img: np.ndarray, path: str | Path) -> None:
    if img.ndim != 3 or img.shape[2] != 3:
        raise DataError(f"write_ppm expects H×W×3, got {img.shape}")
    if img.min() < 0.0 or img.max() > 1.0:
        raise DataError("write_ppm values must lie in [0, 1]")
    _save(path, b"P6", np.round(img * 255.0).astype(np.uint8))


def read_ppm(path: str | Path) -> np.ndarray:
    return _load(path, b"P6", 3).astype(np.float64) / 255.0


def write_pgm(mask: np.ndarray, path: str | Path) -> None:
    if mask.ndim != 2:
        raise DataError(f"write_pgm expects H×W, got {mask.shape}")
    _save(path, b"P5", np.where(np.asarray(mask) > 0, 255, 0).astype(np.uint8))


def write_pgm_gray(values: np.ndarray, path: str | Path) -> None:
    """Write a real-valued map, min-max scaled to 0..255."""
    lo, hi = float(values.min()), float(values.max())
    span = hi - lo
    scaled = np.zeros_like(values) if span == 0 else (values - lo) / span
    _save(path, b"P5", np.round(scaled * 255.0).astype(np.uint8))


def read_pgm(path: str | Path, strict: bool = False) -> np.ndarray:
    raw = _load(path, b"P5", 1)
    if strict and not np.isin(raw, (0, 255)).all():
        raise DataError(f"{path}: mask contains values other than 0 and 255")
    return (raw >= 128).astype(np.uint8)


def read_pgm_raw(path: str | Path) -> np.ndarray:
    return _load(path, b"P5", 1)
