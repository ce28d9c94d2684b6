"""Frame ingestion, mode rendering, the HODT tensor file format and unit helpers.

Orientation: a frame with ``h`` rows and ``w`` columns becomes the slice
``T[:, :, k]`` of shape ``(I1, I2) = (h, w)``. Snapshot vectors are
column-major flattenings of frames (``i1`` fastest).

HODT layout (little-endian)::

    8 bytes   magic  b"HODT\\0\\0\\0\\1"
    3 x u64   I1, I2, K
    1 x f64   dt
    I1*I2*K x f64, i1 fastest, then i2, then k
"""

from __future__ import annotations

import glob
import math
import os
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "CropRect",
    "FormatError",
    "FrameSequenceMeta",
    "HODT_MAGIC",
    "load_sequence",
    "matrix_to_tensor",
    "mode_pixels",
    "read_hodt",
    "read_image",
    "read_pgm",
    "render_mode",
    "tensor_to_matrix",
    "to_bpm",
    "write_hodt",
    "write_pgm",
]

class FormatError(ValueError):
    """A file could not be decoded as the expected format."""


HODT_MAGIC = b"HODT\x00\x00\x00\x01"
LUMA = (0.299, 0.587, 0.114)
BPM_DECIMALS = 9


@dataclass(frozen=True)
class CropRect:
    """Pixel window: ``x0`` is the column offset, ``y0`` the row offset."""

    x0: int
    y0: int
    width: int
    height: int

    @classmethod
    def parse(cls, text: str) -> "CropRect":
        parts = [int(p) for p in text.split(",")]
        if len(parts) != 4:
            raise ValueError(f"crop must be x0,y0,w,h, got {text!r}")
        return cls(*parts)

    def apply(self, frame: np.ndarray) -> np.ndarray:
        h, w = frame.shape
        if (
            min(self.x0, self.y0) < 0
            or self.width < 1
            or self.height < 1
            or self.x0 + self.width > w
            or self.y0 + self.height > h
        ):
            raise ValueError(f"crop {self} does not fit inside a {h}x{w} frame")
        return frame[self.y0 : self.y0 + self.height, self.x0 : self.x0 + self.width]


@dataclass(frozen=True)
class FrameSequenceMeta:
    shape: tuple[int, int]
    num_snapshots: int
    dt: float
    stride: int
    source: str

    def to_dict(self) -> dict:
        return {
            "shape": list(self.shape),
            "num_snapshots": self.num_snapshots,
            "dt": self.dt,
            "stride": self.stride,
            "source": self.source,
        }


def _next_token(data: bytes, pos: int) -> tuple[bytes, int]:
    n = len(data)
    while pos < n:
        if data[pos : pos + 1] == b"#":
            while pos < n and data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
        elif data[pos : pos + 1].isspace():
            pos += 1
        else:
            break
    start = pos
    while pos < n and not data[pos : pos + 1].isspace():
        pos += 1
    return data[start:pos], pos


def read_pgm(path) -> np.ndarray:
    """Decode a binary (P5) PGM into ``(h, w)`` intensities in [0, 1]."""
    data = Path(path).read_bytes()
    magic, pos = _next_token(data, 0)
    if magic != b"P5":
        raise FormatError(f"{path}: not a binary PGM (magic {magic!r})")
    fields = []
    for _ in range(3):
        tok, pos = _next_token(data, pos)
        if not tok.isdigit():
            raise FormatError(f"{path}: malformed PGM header")
        fields.append(int(tok))
    w, h, maxval = fields
    pos += 1  # single whitespace byte before the raster
    if not 0 < maxval < 65536:
        raise FormatError(f"{path}: bad maxval {maxval}")
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    count = w * h
    raster = data[pos : pos + count * dtype.itemsize]
    if len(raster) != count * dtype.itemsize:
        raise FormatError(f"{path}: truncated PGM raster")
    return np.frombuffer(raster, dtype=dtype).reshape(h, w).astype(float) / maxval


def write_pgm(path, pixels) -> None:
    """Write an 8-bit ``(h, w)`` array as ``P5\\n<w> <h>\\n255\\n`` + raw bytes."""
    pixels = np.asarray(pixels)
    if pixels.ndim != 2:
        raise ValueError("PGM images are 2-D")
    if pixels.dtype != np.uint8:
        if pixels.min() < 0 or pixels.max() > 255:
            raise ValueError("pixel values must lie in 0..255")
        pixels = pixels.astype(np.uint8)
    h, w = pixels.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(np.ascontiguousarray(pixels).tobytes())


def read_image(path) -> np.ndarray:
    """Grayscale intensities in [0, 1] from a PGM or PNG file."""
    path = Path(path)
    try:
        if path.suffix.lower() == ".pgm":
            return read_pgm(path)
        from PIL import Image

        with Image.open(path) as im:
            if im.mode == "P":
                im = im.convert("RGB")
            mode = im.mode
            arr = np.asarray(im)
    except FileNotFoundError:
        raise
    except (OSError, ValueError) as exc:
        raise FormatError(f"cannot decode frame {path}: {exc}") from exc

    if mode == "L":
        return arr.astype(float) / 255.0
    if mode.startswith("I;16") or mode == "I":
        return arr.astype(float) / 65535.0
    if mode == "LA":
        return arr[..., 0].astype(float) / 255.0
    if mode in ("RGB", "RGBA"):
        rgb = arr[..., :3].astype(float) / 255.0
        return rgb @ np.array(LUMA)
    raise FormatError(f"cannot decode frame {path}: unsupported image mode {mode}")


def _expand_source(source) -> list[str]:
    if isinstance(source, (list, tuple)):
        return [str(p) for p in source]
    source = str(source)
    if os.path.isdir(source):
        files = [
            os.path.join(source, f)
            for f in os.listdir(source)
            if f.lower().endswith((".pgm", ".png"))
        ]
        return sorted(files)
    return sorted(glob.glob(source))


def load_sequence(source, crop: CropRect | None = None, stride: int = 1, dt: float = 4e-3):
    """Read frames into an ``(h, w, K)`` tensor of intensities in [0, 1].

    ``source`` is a list of paths, a directory (all .pgm/.png inside, sorted
    by name) or a glob pattern. Every ``stride``-th frame is kept and the
    stored time step becomes ``stride * dt``.
    """
    if stride < 1:
        raise ValueError("stride must be >= 1")
    files = _expand_source(source)[::stride]
    if len(files) < 2:
        raise ValueError(f"need at least 2 frames after stride, found {len(files)} in {source!r}")
    frames = []
    for f in files:
        img = read_image(f)
        if crop is not None:
            img = crop.apply(img)
        if frames and img.shape != frames[0].shape:
            raise ValueError(f"frame {f} has shape {img.shape}, expected {frames[0].shape}")
        frames.append(img)
    T = np.stack(frames, axis=2)
    meta = FrameSequenceMeta(
        shape=T.shape[:2],
        num_snapshots=T.shape[2],
        dt=stride * dt,
        stride=stride,
        source=str(source) if not isinstance(source, (list, tuple)) else f"{len(source)} files",
    )
    return T, meta


def tensor_to_matrix(T) -> np.ndarray:
    """Column ``k`` is the column-major flattening of ``T[:, :, k]``."""
    T = np.asarray(T)
    I1, I2, K = T.shape
    return T.reshape(I1 * I2, K, order="F")


def matrix_to_tensor(V, shape: tuple[int, int]) -> np.ndarray:
    V = np.asarray(V)
    return V.reshape(shape[0], shape[1], V.shape[1], order="F")


def mode_pixels(mode, dims: tuple[int, int] | None = None) -> np.ndarray:
    """8-bit rendering ``round_half_up(255 (x / max|x| + 1) / 2)`` of the real part."""
    x = np.asarray(mode)
    if x.ndim == 1:
        if dims is None or dims[0] * dims[1] != x.shape[0]:
            raise ValueError(f"dims {dims} do not match a mode of length {x.shape[0]}")
        x = x.reshape(dims, order="F")
    elif dims is not None and tuple(x.shape) != tuple(dims):
        raise ValueError(f"dims {dims} do not match a mode of shape {x.shape}")
    x = np.real(x).astype(float)
    peak = np.abs(x).max()
    scaled = np.zeros_like(x) if peak == 0 else x / peak
    return np.floor(255.0 * (scaled + 1.0) / 2.0 + 0.5).astype(np.uint8)


def render_mode(mode, dims, path) -> np.ndarray:
    """Write a mode as a grey PGM (-1 black, 0 mid-grey, +1 white); return the pixels."""
    pixels = mode_pixels(mode, dims)
    write_pgm(path, pixels)
    return pixels


def to_bpm(omega) -> float:
    """Angular frequency (rad/s) to events per minute, ``|omega| * 60 / (2 pi)``.

    Rounded to 1e-9 BPM so that ``to_bpm(pi / dt)`` lands on ``30 / dt``
    for the usual sampling steps instead of one ulp below it.
    """
    return round(abs(float(omega)) * 30.0 / math.pi, BPM_DECIMALS)


def write_hodt(path, T, dt: float) -> None:
    T = np.asarray(T, dtype="<f8")
    if T.ndim == 2:
        T = T[:, None, :]
    if T.ndim != 3:
        raise ValueError("HODT stores 3-D tensors")
    I1, I2, K = T.shape
    with open(path, "wb") as fh:
        fh.write(HODT_MAGIC)
        fh.write(struct.pack("<QQQd", I1, I2, K, float(dt)))
        fh.write(T.reshape(-1, order="F").tobytes())


def read_hodt(path):
    """Return ``(tensor, dt)`` from a HODT file."""
    data = Path(path).read_bytes()
    if data[:8] != HODT_MAGIC:
        raise FormatError(f"{path}: not a HODT file")
    if len(data) < 40:
        raise FormatError(f"{path}: truncated HODT header")
    I1, I2, K, dt = struct.unpack("<QQQd", data[8:40])
    count = I1 * I2 * K
    if len(data) != 40 + 8 * count:
        raise FormatError(f"{path}: expected {count} values, file has {(len(data) - 40) // 8}")
    T = np.frombuffer(data, dtype="<f8", offset=40, count=count).astype(float)
    return T.reshape((I1, I2, K), order="F"), dt
