"""Readers and writers: 8-bit grayscale images (PGM, PNG), the event text
format, ESLK kernel banks and the synthetic dataset directory layout.

Event files are one ``t x y p`` record per line, with the window and sensor
size in header comments::

    # window 0.0 0.016666666666666666
    # sensor 64 64
    0.0012 3 7 1

Kernel files start with ``ESLK <m> <q> <s>`` followed by ``s*s*m*q*q``
coefficients, phase-major then channel-major, each kernel row-major.
"""

from __future__ import annotations

import os
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .events import EventError, EventStream, normalize_stream
from .sparse import KernelBank


class FormatError(ValueError):
    def __init__(self, message: str, path=None, line: int | None = None):
        where = str(path) if path is not None else "<input>"
        if line is not None:
            where += f":{line}"
        super().__init__(f"{where}: {message}")
        self.path = path
        self.line = line


# -- images -----------------------------------------------------------------

def to_bytes(image) -> np.ndarray:
    return np.round(np.clip(np.asarray(image, dtype=float), 0.0, 1.0) * 255.0).astype(np.uint8)


def _pgm_tokens(data: bytes, path):
    """Header tokens of a PNM file and the offset where the raster starts."""
    tokens, pos = [], 0
    while len(tokens) < 4:
        m = re.compile(rb"\s*(#[^\n]*\n\s*)*").match(data, pos)
        pos = m.end()
        m = re.compile(rb"\S+").match(data, pos)
        if m is None:
            raise FormatError("truncated PGM header", path)
        tokens.append(m.group())
        pos = m.end()
    return tokens, pos + 1


def read_pgm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    if data[:2] not in (b"P5", b"P2"):
        raise FormatError("not a PGM file (expected P5 or P2 magic)", path)
    tokens, start = _pgm_tokens(data, path)
    try:
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError:
        raise FormatError("malformed PGM header", path) from None
    if maxval != 255:
        raise FormatError(f"unsupported bit depth (maxval {maxval}, need 255)", path)
    if width < 1 or height < 1:
        raise FormatError(f"bad PGM size {width}x{height}", path)
    if tokens[0] == b"P5":
        raster = data[start:start + width * height]
        if len(raster) < width * height:
            raise FormatError(f"truncated raster: {len(raster)} of {width * height} bytes", path)
        pixels = np.frombuffer(raster, dtype=np.uint8)
    else:
        values = data[start:].split()
        if len(values) < width * height:
            raise FormatError(f"truncated raster: {len(values)} of {width * height} values", path)
        pixels = np.array([int(v) for v in values[:width * height]])
        if pixels.min() < 0 or pixels.max() > 255:
            raise FormatError("pixel value outside [0, 255]", path)
    return pixels.reshape(height, width).astype(float) / 255.0


def write_pgm(path, image) -> None:
    raster = to_bytes(image)
    h, w = raster.shape
    Path(path).write_bytes(b"P5\n%d %d\n255\n" % (w, h) + raster.tobytes())


def read_image(path) -> np.ndarray:
    """Grayscale image in working units (8-bit values scaled by 1/255)."""
    path = Path(path)
    if path.suffix.lower() in (".pgm", ".pnm"):
        return read_pgm(path)
    try:
        with Image.open(path) as im:
            im.load()
            if im.mode in ("I;16", "I;16B", "I", "F"):
                raise FormatError(f"unsupported bit depth (mode {im.mode})", path)
            if im.mode != "L":
                im = im.convert("L")
            return np.asarray(im, dtype=float) / 255.0
    except OSError as exc:
        raise FormatError(f"cannot read image: {exc}", path) from None


def write_image(path, image) -> None:
    path = Path(path)
    if path.suffix.lower() in (".pgm", ".pnm"):
        write_pgm(path, image)
        return
    Image.fromarray(to_bytes(image), mode="L").save(path)


_NUMBER = re.compile(r"(\d+)")


def frame_files(directory) -> list[Path]:
    """Image files in a directory, sorted by the last number in their name."""
    exts = {".png", ".pgm", ".pnm", ".jpg", ".jpeg", ".bmp", ".tif", ".tiff"}
    files = [p for p in Path(directory).iterdir() if p.suffix.lower() in exts]

    def key(p: Path):
        nums = _NUMBER.findall(p.stem)
        return (int(nums[-1]) if nums else -1, p.name)

    return sorted(files, key=key)


def read_frames(directory) -> np.ndarray:
    files = frame_files(directory)
    if not files:
        raise FormatError("no image files found", directory)
    frames = [read_image(f) for f in files]
    shapes = {f.shape for f in frames}
    if len(shapes) != 1:
        raise FormatError(f"frames differ in size: {sorted(shapes)}", directory)
    return np.stack(frames)


# -- events -----------------------------------------------------------------

def format_events(stream: EventStream) -> str:
    lines = [f"# window {stream.t_start!r} {stream.duration!r}",
             f"# sensor {stream.width} {stream.height}"]
    lines += [f"{t!r} {x} {y} {p}" for t, x, y, p in
              zip(stream.t.tolist(), stream.x.tolist(), stream.y.tolist(), stream.p.tolist())]
    return "\n".join(lines) + "\n"


def write_events(path, stream: EventStream) -> None:
    Path(path).write_text(format_events(stream))


def parse_events(text: str, path=None, width: int | None = None, height: int | None = None,
                 window: tuple[float, float] | None = None) -> EventStream:
    """Parse the event text format; arguments override missing headers."""
    t, x, y, p, lines = [], [], [], [], []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            fields = line[1:].split()
            try:
                if fields[:1] == ["window"] and window is None:
                    window = (float(fields[1]), float(fields[2]))
                elif fields[:1] == ["sensor"] and width is None:
                    width, height = int(fields[1]), int(fields[2])
            except (IndexError, ValueError):
                raise FormatError(f"malformed header {line!r}", path, lineno) from None
            continue
        fields = line.split()
        if len(fields) != 4:
            raise FormatError(f"expected 't x y p', got {len(fields)} fields", path, lineno)
        try:
            tv = float(fields[0])
            xv, yv = int(fields[1]), int(fields[2])
        except ValueError:
            raise FormatError(f"malformed event {line!r}", path, lineno) from None
        if fields[3] not in ("1", "-1", "+1"):
            raise FormatError(f"bad polarity {fields[3]!r}", path, lineno)
        t.append(tv)
        x.append(xv)
        y.append(yv)
        p.append(int(fields[3]))
        lines.append(lineno)

    if window is None:
        raise FormatError("missing '# window t_start duration' header", path)
    if width is None:
        if not x:
            raise FormatError("missing '# sensor W H' header", path)
        width, height = max(x) + 1, max(y) + 1
    try:
        return normalize_stream((np.array(t, dtype=float), np.array(x, dtype=np.int64),
                                 np.array(y, dtype=np.int64), np.array(p, dtype=np.int64)),
                                width, height, window)
    except EventError as exc:
        m = re.match(r"event (\d+): (.*)", str(exc))
        if m:
            raise FormatError(m.group(2), path, lines[int(m.group(1))]) from None
        raise FormatError(str(exc), path) from None


def read_events(path, width=None, height=None, window=None) -> EventStream:
    return parse_events(Path(path).read_text(), path, width, height, window)


# -- kernel banks -----------------------------------------------------------

def format_kernels(bank: KernelBank) -> str:
    phases, m, q, _ = bank.weights.shape
    rows = [f"ESLK {m} {q} {bank.scale}"]
    for kernel in bank.weights.reshape(-1, q, q):
        rows += [" ".join(repr(float(v)) for v in row) for row in kernel]
    return "\n".join(rows) + "\n"


def write_kernels(path, bank: KernelBank) -> None:
    Path(path).write_text(format_kernels(bank))


def parse_kernels(text: str, path=None) -> KernelBank:
    tokens = text.split()
    if len(tokens) < 4 or tokens[0] != "ESLK":
        raise FormatError("missing 'ESLK <m> <q> <s>' header", path, 1)
    try:
        m, q, s = (int(v) for v in tokens[1:4])
    except ValueError:
        raise FormatError("malformed ESLK header", path, 1) from None
    if m < 1 or q < 1 or q % 2 == 0 or s < 1:
        raise FormatError(f"invalid bank dimensions m={m} q={q} s={s}", path, 1)
    expected = s * s * m * q * q
    values = tokens[4:]
    if len(values) != expected:
        raise FormatError(f"expected {expected} coefficients, found {len(values)}", path)
    try:
        coeffs = np.array([float(v) for v in values])
    except ValueError as exc:
        raise FormatError(f"bad coefficient: {exc}", path) from None
    if not np.all(np.isfinite(coeffs)):
        raise FormatError("non-finite coefficient", path)
    return KernelBank(coeffs.reshape(s * s, m, q, q), s)


def read_kernels(path) -> KernelBank:
    return parse_kernels(Path(path).read_text(), path)


# -- dataset layout ---------------------------------------------------------

@dataclass(frozen=True)
class DatasetLayout:
    """``hr/`` HR clear frames, ``lr/`` LR clear frames, ``blur/`` LR blurry
    noisy frames, ``events/`` one event file per blurry frame."""

    root: Path

    PARTS = ("hr", "lr", "blur", "events")

    def __post_init__(self):
        object.__setattr__(self, "root", Path(self.root))

    def create(self) -> "DatasetLayout":
        for part in self.PARTS:
            (self.root / part).mkdir(parents=True, exist_ok=True)
        return self

    def path(self, part: str, index: int) -> Path:
        ext = ".txt" if part == "events" else ".png"
        return self.root / part / f"{index:06d}{ext}"

    def write_sample(self, index: int, sample) -> None:
        write_image(self.path("hr", index), sample.hr)
        write_image(self.path("lr", index), sample.lr)
        write_image(self.path("blur", index), sample.blur)
        write_events(self.path("events", index), sample.events)

    def indices(self) -> list[int]:
        return sorted(int(p.stem) for p in (self.root / "blur").glob("*.png"))

    def read_sample(self, index: int):
        return (read_image(self.path("hr", index)), read_image(self.path("lr", index)),
                read_image(self.path("blur", index)), read_events(self.path("events", index)))


def ensure_parent(path) -> Path:
    path = Path(path)
    if path.parent and not path.parent.exists():
        os.makedirs(path.parent, exist_ok=True)
    return path
