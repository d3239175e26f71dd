"""Binary PGM (P5) read/write plus the world-anchoring sidecar.

Semantic maps are stored as P5 with maxval 22 (one byte per cell, value
== class id).  Cost maps are stored as P5 with maxval 255, cell value
round(cost * 255).  Either is accompanied by ``<name>.meta``, a text
sidecar with ``resolution=``, ``origin_x=`` and ``origin_y=`` lines;
when the sidecar is absent, loading falls back to resolution 1.0 and
origin (0, 0) so bare PGMs (e.g. mIoU inputs) still load.

Raster row 0 is grid row 0 (world y in [origin_y, origin_y + res)); no
vertical flip is applied anywhere, which keeps round-trips byte-exact.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .costmap import CostMap, MAX_LABEL, SemanticMap
from .errors import LoadError


def read_pgm(path) -> tuple[np.ndarray, int]:
    """Read a binary (P5) PGM; returns (values as (h, w) uint8, maxval)."""
    path = Path(path)
    try:
        blob = path.read_bytes()
    except OSError as exc:
        raise LoadError(f"{path}: {exc}") from exc

    pos = 0
    tokens = []
    while len(tokens) < 4 and pos < len(blob):
        ch = blob[pos:pos + 1]
        if ch.isspace():
            pos += 1
        elif ch == b"#":
            nl = blob.find(b"\n", pos)
            pos = len(blob) if nl < 0 else nl + 1
        else:
            end = pos
            while end < len(blob) and not blob[end:end + 1].isspace():
                end += 1
            tokens.append(blob[pos:end])
            pos = end
    if len(tokens) < 4:
        raise LoadError(f"{path}: truncated PGM header")
    if tokens[0] != b"P5":
        raise LoadError(f"{path}: not a binary PGM (magic {tokens[0]!r}, expected P5)")
    try:
        width, height, maxval = (int(t) for t in tokens[1:4])
    except ValueError as exc:
        raise LoadError(f"{path}: non-numeric PGM header field") from exc
    if width < 1 or height < 1:
        raise LoadError(f"{path}: bad PGM dimensions {width}x{height}")
    if not 0 < maxval < 256:
        raise LoadError(f"{path}: unsupported PGM maxval {maxval} (need 1..255)")
    pos += 1  # single whitespace byte after maxval
    raster = blob[pos:pos + width * height]
    if len(raster) < width * height:
        raise LoadError(f"{path}: truncated pixel data "
                        f"({len(raster)} bytes, expected {width * height})")
    values = np.frombuffer(raster, dtype=np.uint8).reshape(height, width)
    return values.copy(), maxval


def write_pgm(path, values: np.ndarray, maxval: int) -> None:
    """Write a binary (P5) PGM with one byte per cell."""
    values = np.asarray(values)
    if values.ndim != 2:
        raise LoadError(f"{path}: PGM payload must be 2D, got shape {values.shape}")
    if not 0 < maxval < 256:
        raise LoadError(f"{path}: unsupported PGM maxval {maxval} (need 1..255)")
    if values.min() < 0 or values.max() > maxval:
        raise LoadError(f"{path}: pixel values exceed maxval {maxval}")
    header = f"P5\n{values.shape[1]} {values.shape[0]}\n{maxval}\n".encode("ascii")
    Path(path).write_bytes(header + values.astype(np.uint8).tobytes())


def meta_path(path) -> Path:
    """Sidecar path for a map file: foo.pgm -> foo.meta."""
    return Path(path).with_suffix(".meta")


def write_meta(path, resolution: float, origin: tuple[float, float]) -> None:
    meta_path(path).write_text(
        f"resolution={resolution!r}\norigin_x={origin[0]!r}\norigin_y={origin[1]!r}\n",
        encoding="utf-8",
    )


def read_meta(path) -> tuple[float, tuple[float, float]] | None:
    """Parse the sidecar next to a map file; None when it does not exist."""
    side = meta_path(path)
    if not side.exists():
        return None
    fields = {}
    for lineno, line in enumerate(side.read_text(encoding="utf-8").splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise LoadError(f"{side}:{lineno}: expected key=value, got {line!r}")
        try:
            fields[key.strip()] = float(value)
        except ValueError as exc:
            raise LoadError(f"{side}:{lineno}: non-numeric value for {key.strip()!r}") from exc
    for key in ("resolution", "origin_x", "origin_y"):
        if key not in fields:
            raise LoadError(f"{side}: missing field {key!r}")
    return fields["resolution"], (fields["origin_x"], fields["origin_y"])


def save_semantic_map(sem: SemanticMap, path) -> None:
    write_pgm(path, sem.labels, MAX_LABEL)
    write_meta(path, sem.resolution, sem.origin)


def load_semantic_map(path) -> SemanticMap:
    values, maxval = read_pgm(path)
    if values.max() > MAX_LABEL:
        raise LoadError(
            f"{path}: label value {values.max()} exceeds {MAX_LABEL} (not a semantic map)"
        )
    meta = read_meta(path)
    resolution, origin = meta if meta is not None else (1.0, (0.0, 0.0))
    return SemanticMap(labels=values, resolution=resolution, origin=origin)


def save_costmap(cm: CostMap, path) -> None:
    quantized = np.floor(cm.costs * 255.0 + 0.5).astype(np.uint8)
    write_pgm(path, quantized, 255)
    write_meta(path, cm.resolution, cm.origin)


def load_costmap(path) -> CostMap:
    values, maxval = read_pgm(path)
    meta = read_meta(path)
    resolution, origin = meta if meta is not None else (1.0, (0.0, 0.0))
    return CostMap(costs=values / maxval, resolution=resolution, origin=origin)
