"""Image and stream files, frame sequences, and run reports.

PGM (P2 and P5, maxval 255) is the native image format. Grayscale PNG is
read and written through Pillow when it is installed.
"""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .bitstream import BitStream, FlipSpec, pack_streams, streams_from_text, streams_to_text, unpack_streams
from .device import MemristorParams, SneTransfer, params_dict
from .metrics import psnr, ssim
from .roberts import DetectorConfig, as_gray_image, gradient_to_image, reference_roberts, stochastic_roberts

__all__ = [
    "FrameError",
    "FrameMetrics",
    "FrameSequence",
    "PgmError",
    "PgmHeaderError",
    "PgmMaxvalError",
    "PgmTruncatedError",
    "RunReport",
    "atomic_write",
    "config_from_echo",
    "load_frames",
    "parse_pgm",
    "process_sequence",
    "read_image",
    "read_streams",
    "serialize_pgm",
    "write_csv",
    "write_image",
    "write_json",
    "write_streams",
]


class PgmError(ValueError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


class PgmHeaderError(PgmError):
    pass


class PgmMaxvalError(PgmError):
    pass


class PgmTruncatedError(PgmError):
    pass


_WS = b" \t\r\n\v\f"


def _header_token(data: bytes, pos: int) -> tuple[bytes, int, int]:
    """Next whitespace-delimited token, skipping '#' comments.

    Returns (token, token_start, position just past it).
    """
    while pos < len(data):
        ch = data[pos:pos + 1]
        if ch in (b" ", b"\t", b"\r", b"\n", b"\v", b"\f"):
            pos += 1
        elif ch == b"#":
            eol = data.find(b"\n", pos)
            pos = len(data) if eol < 0 else eol + 1
        else:
            break
    start = pos
    while pos < len(data) and data[pos] not in _WS and data[pos:pos + 1] != b"#":
        pos += 1
    return data[start:pos], start, pos


def parse_pgm(data: bytes) -> np.ndarray:
    if data[:2] in (b"P3", b"P6"):
        raise PgmHeaderError("color PNM images are not supported; convert to grayscale first", 0)
    if data[:2] not in (b"P2", b"P5"):
        raise PgmHeaderError(f"not a PGM file: magic {data[:2]!r}", 0)
    magic = data[:2]
    pos = 2
    dims = []
    for name in ("width", "height", "maxval"):
        tok, start, pos = _header_token(data, pos)
        if not tok:
            raise PgmHeaderError(f"header ends before {name}", start)
        if not tok.isdigit():
            raise PgmHeaderError(f"bad {name} {tok[:16]!r}", start)
        value = int(tok)
        if name == "maxval":
            if value != 255:
                raise PgmMaxvalError(f"maxval must be 255, got {value}", start)
        elif value < 1:
            raise PgmHeaderError(f"{name} must be positive, got {value}", start)
        else:
            dims.append(value)
    width, height = dims
    if pos >= len(data) or data[pos] not in _WS:
        raise PgmHeaderError("missing whitespace after maxval", pos)
    count = width * height
    if magic == b"P5":
        start = pos + 1
        if len(data) < start + count:
            raise PgmTruncatedError(f"raster needs {count} bytes from offset {start}", len(data))
        return np.frombuffer(data, dtype=np.uint8, count=count, offset=start).reshape(height, width).copy()
    values = np.empty(count, dtype=np.uint8)
    for k in range(count):
        tok, start, pos = _header_token(data, pos)
        if not tok:
            raise PgmTruncatedError(f"raster ends after {k} of {count} samples", len(data))
        if not tok.isdigit() or int(tok) > 255:
            raise PgmError(f"bad sample {tok[:16]!r}", start)
        values[k] = int(tok)
    return values.reshape(height, width)


def serialize_pgm(img, ascii: bool = False) -> bytes:
    img = as_gray_image(img)
    h, w = img.shape
    if not ascii:
        return f"P5\n{w} {h}\n255\n".encode("ascii") + np.ascontiguousarray(img).tobytes()
    rows = "\n".join(" ".join(str(int(v)) for v in row) for row in img)
    return f"P2\n{w} {h}\n255\n{rows}\n".encode("ascii")


def read_image(path) -> np.ndarray:
    path = Path(path)
    if path.suffix.lower() == ".png":
        return _read_png(path)
    return parse_pgm(path.read_bytes())


def write_image(img, path, ascii: bool = False) -> None:
    path = Path(path)
    if path.suffix.lower() == ".png":
        from PIL import Image

        buf = io.BytesIO()
        Image.fromarray(as_gray_image(img)).save(buf, format="PNG")
        atomic_write(path, buf.getvalue())
    else:
        atomic_write(path, serialize_pgm(img, ascii=ascii))


def _read_png(path: Path) -> np.ndarray:
    try:
        from PIL import Image
    except ImportError as exc:  # pragma: no cover - Pillow is an optional extra
        raise RuntimeError("reading PNG needs Pillow; install stochedge[png]") from exc
    with Image.open(path) as im:
        if im.mode != "L":
            raise ValueError(f"{path}: expected 8-bit grayscale PNG, got mode {im.mode!r}")
        return np.asarray(im, dtype=np.uint8).copy()


def read_streams(path) -> list[BitStream]:
    data = Path(path).read_bytes()
    if data.startswith(b"SNB1"):
        return unpack_streams(data)
    return streams_from_text(data.decode("ascii"))


def write_streams(streams, path, packed: bool = False) -> None:
    payload = pack_streams(streams) if packed else streams_to_text(streams).encode("ascii")
    atomic_write(Path(path), payload)


def atomic_write(path, payload: bytes | str) -> None:
    """Write via a temp file in the target directory, then rename over it."""
    path = Path(path)
    if isinstance(payload, str):
        payload = payload.encode("utf-8")
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.chmod(tmp, 0o644)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_json(path, obj) -> None:
    atomic_write(path, json.dumps(obj, indent=2) + "\n")


def write_csv(path, rows: Sequence[dict]) -> None:
    buf = io.StringIO()
    if rows:
        writer = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
    atomic_write(path, buf.getvalue())


# --- frame sequences -----------------------------------------------------------

@dataclass(frozen=True)
class FrameSequence:
    frames: tuple
    labels: tuple

    def __post_init__(self):
        frames = tuple(as_gray_image(f) for f in self.frames)
        if not frames:
            raise ValueError("a frame sequence needs at least one frame")
        shapes = {f.shape for f in frames}
        if len(shapes) != 1:
            raise ValueError(f"frames differ in size: {sorted(shapes)}")
        labels = tuple(self.labels) if self.labels else tuple(f"frame{k:04d}" for k in range(len(frames)))
        if len(labels) != len(frames):
            raise ValueError("need one label per frame")
        object.__setattr__(self, "frames", frames)
        object.__setattr__(self, "labels", labels)

    def __len__(self) -> int:
        return len(self.frames)


def load_frames(directory) -> FrameSequence:
    """Every ``.pgm``/``.png`` file in ``directory``, in filename order."""
    paths = sorted(p for p in Path(directory).iterdir() if p.suffix.lower() in (".pgm", ".png"))
    if not paths:
        raise ValueError(f"no .pgm or .png frames in {directory}")
    return FrameSequence(tuple(read_image(p) for p in paths), tuple(p.name for p in paths))


class FrameError(RuntimeError):
    def __init__(self, index: int, label: str, cause: Exception):
        super().__init__(f"frame {index} ({label}): {cause}")
        self.index = index
        self.label = label


@dataclass(frozen=True)
class FrameMetrics:
    index: int
    label: str
    ssim: float
    psnr_db: float

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "label": self.label,
            "ssim": self.ssim,
            "psnr_db": "inf" if np.isinf(self.psnr_db) else self.psnr_db,
        }


@dataclass
class RunReport:
    config: dict
    frames: list[FrameMetrics]
    elapsed_s: float | None = None
    artifacts: dict = field(default_factory=dict)

    def to_dict(self, include_timing: bool = False) -> dict:
        out = {"config": self.config, "frames": [m.to_dict() for m in self.frames]}
        if include_timing and self.elapsed_s is not None:
            out["elapsed_s"] = self.elapsed_s
        out["artifacts"] = dict(self.artifacts)
        return out


def config_echo(cfg: DetectorConfig) -> dict:
    echo = cfg.echo()
    if cfg.source == "device":
        echo["device"] = params_dict(cfg.params, cfg.transfer)
    return echo


def config_from_echo(echo: dict) -> DetectorConfig:
    flip = FlipSpec(echo["flip_mode"], echo["flip_rate"]) if echo.get("flip_mode") else None
    params, transfer = MemristorParams(), SneTransfer()
    if "device" in echo:
        dev = echo["device"]
        params = MemristorParams(**{k: dev[k] for k in MemristorParams.__dataclass_fields__ if k in dev})
        transfer = SneTransfer(**{k: dev[k] for k in SneTransfer.__dataclass_fields__ if k in dev})
    return DetectorConfig(bits=echo["bits"], seed=echo["seed"], flip=flip, source=echo["source"],
                          params=params, transfer=transfer)


def process_sequence(frames: FrameSequence, cfg: DetectorConfig,
                     src=None) -> tuple[list[np.ndarray], RunReport]:
    """Stochastic edge maps for every frame plus fidelity against the exact operator.

    Frame ``k`` uses the substreams of ``frame_index=k``.
    """
    t0 = time.perf_counter()
    maps, metrics = [], []
    for k, (img, label) in enumerate(zip(frames.frames, frames.labels)):
        try:
            g = stochastic_roberts(img, cfg, src, frame_index=k)
            out = gradient_to_image(g)
            ref = gradient_to_image(reference_roberts(img))
            metrics.append(FrameMetrics(k, label, ssim(out, ref).mean, psnr(out, ref).db))
        except Exception as exc:
            raise FrameError(k, label, exc) from exc
        maps.append(g)
    return maps, RunReport(config_echo(cfg), metrics, elapsed_s=time.perf_counter() - t0)
