"""Image and statistics I/O: binary PPM (P6), optional PNG, stats CSV.

Images are stored gamma-2.2 encoded at 8 bits; the stats CSV keeps the full
float64 state of every pixel and is the lossless interchange format for
downstream analysis.
"""

from __future__ import annotations

import csv

import numpy as np

from ..errors import ValidationError
from .stats import PixelStats

GAMMA = 2.2

_STATS_FIELDS = ["mean_d", "mean_s", "var_d", "var_s", "cov_ds"]
_STATS_HEADER = ["x", "y", "n"] + [
    f"{f}_{c}" for f in _STATS_FIELDS for c in ("r", "g", "b")
]


def encode_srgb_bytes(image: np.ndarray) -> np.ndarray:
    """Linear radiance -> gamma-encoded uint8, clipping to [0, 1]."""
    enc = np.clip(np.asarray(image, dtype=np.float64), 0.0, 1.0) ** (1.0 / GAMMA)
    return (enc * 255.0 + 0.5).astype(np.uint8)


def decode_srgb_bytes(data: np.ndarray) -> np.ndarray:
    return (np.asarray(data, dtype=np.float64) / 255.0) ** GAMMA


def write_ppm(path, image: np.ndarray) -> None:
    img = np.asarray(image)
    if img.ndim != 3 or img.shape[2] != 3 or img.shape[0] < 1 or img.shape[1] < 1:
        raise ValidationError(f"expected (H, W, 3) image, got shape {img.shape}")
    h, w = img.shape[:2]
    with open(path, "wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        fh.write(encode_srgb_bytes(img).tobytes())


def read_ppm(path) -> np.ndarray:
    """Read a binary P6 file back to linear radiance."""
    with open(path, "rb") as fh:
        raw = fh.read()
    parts = raw.split(maxsplit=4)
    if len(parts) < 5 or parts[0] != b"P6":
        raise ValidationError(f"{path}: not a binary P6 PPM file")
    w, h, maxval = int(parts[1]), int(parts[2]), int(parts[3])
    if maxval != 255:
        raise ValidationError(f"{path}: only maxval 255 supported")
    data = np.frombuffer(parts[4][: w * h * 3], dtype=np.uint8).reshape(h, w, 3)
    return decode_srgb_bytes(data)


def write_png(path, image: np.ndarray) -> None:
    from PIL import Image

    Image.fromarray(encode_srgb_bytes(image), mode="RGB").save(path, format="PNG")


def write_stats_csv(path, stats: PixelStats) -> None:
    """One row per pixel: x, y, n and the RGB statistics columns."""
    h, w = stats.n.shape
    cols = [stats.mean_d, stats.mean_s, stats.var_d, stats.var_s, stats.cov_ds]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(_STATS_HEADER)
        for y in range(h):
            for x in range(w):
                row = [x, y, int(stats.n[y, x])]
                for col in cols:
                    row.extend(repr(float(v)) for v in col[y, x])
                writer.writerow(row)


def read_stats_csv(path):
    """Load a stats CSV; returns (n, dict of (H, W, 3) arrays)."""
    with open(path, "r", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != _STATS_HEADER:
            raise ValidationError(f"{path}: unexpected stats CSV header")
        rows = [r for r in reader if r]
    xs = np.array([int(r[0]) for r in rows])
    ys = np.array([int(r[1]) for r in rows])
    w, h = int(xs.max()) + 1, int(ys.max()) + 1
    n = np.zeros((h, w))
    n[ys, xs] = [float(r[2]) for r in rows]
    out = {}
    for i, f in enumerate(_STATS_FIELDS):
        arr = np.zeros((h, w, 3))
        block = np.array([[float(v) for v in r[3 + 3 * i : 6 + 3 * i]] for r in rows])
        arr[ys, xs] = block
        out[f] = arr
    return n, out
