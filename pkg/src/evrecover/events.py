"""Event records, validated event streams, count-frame binning and the
pre-reference polarity/order reversal.

Streams are stored column-wise (``t``, ``x``, ``y``, ``p`` arrays) so the
per-pixel integrals downstream stay vectorised; :class:`Event` is the row
view used at API boundaries and in tests.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

import numpy as np


class EventError(ValueError):
    """Raised for invalid events, streams or stream operations."""


class Event(NamedTuple):
    x: int
    y: int
    t: float
    p: int


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class EventStream:
    """Time-ordered events over the exposure ``[t_start, t_start + duration]``.

    Construct through :func:`normalize_stream` (or :meth:`from_arrays`) so the
    ordering and bounds invariants hold.
    """

    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    p: np.ndarray
    t_start: float
    duration: float
    width: int
    height: int

    @classmethod
    def from_arrays(cls, t, x, y, p, width, height, window) -> "EventStream":
        return normalize_stream(
            (np.asarray(t, float), np.asarray(x), np.asarray(y), np.asarray(p)),
            width, height, window)

    @classmethod
    def empty(cls, width: int, height: int, window) -> "EventStream":
        return normalize_stream([], width, height, window)

    @property
    def t_end(self) -> float:
        return self.t_start + self.duration

    @property
    def window(self) -> tuple[float, float]:
        return (self.t_start, self.duration)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.height, self.width)

    def __len__(self) -> int:
        return int(self.t.size)

    def __iter__(self):
        for x, y, t, p in zip(self.x.tolist(), self.y.tolist(),
                              self.t.tolist(), self.p.tolist()):
            yield Event(x, y, t, p)

    def events(self) -> list[Event]:
        return list(self)

    def __eq__(self, other) -> bool:
        if not isinstance(other, EventStream):
            return NotImplemented
        return (self.window == other.window and self.shape == other.shape
                and np.array_equal(self.t, other.t)
                and np.array_equal(self.x, other.x)
                and np.array_equal(self.y, other.y)
                and np.array_equal(self.p, other.p))

    def select(self, mask: np.ndarray, window=None) -> "EventStream":
        """Subset of events, optionally re-windowed (order is preserved)."""
        window = self.window if window is None else window
        return normalize_stream((self.t[mask], self.x[mask], self.y[mask], self.p[mask]),
                                self.width, self.height, window)

    def at_pixel(self, x: int, y: int) -> "EventStream":
        return self.select((self.x == x) & (self.y == y))

    def __repr__(self) -> str:
        return (f"EventStream(n={len(self)}, window=({self.t_start!r}, {self.duration!r}), "
                f"size={self.width}x{self.height})")


def _columns(raw) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    if isinstance(raw, tuple) and len(raw) == 4 and all(isinstance(c, np.ndarray) for c in raw):
        t, x, y, p = raw
    else:
        rows = list(raw)
        if not rows:
            return (np.empty(0), np.empty(0, np.int64), np.empty(0, np.int64),
                    np.empty(0, np.int8))
        x = np.array([e[0] for e in rows])
        y = np.array([e[1] for e in rows])
        t = np.array([e[2] for e in rows], dtype=float)
        p = np.array([e[3] for e in rows])
    return np.asarray(t, float), np.asarray(x), np.asarray(y), np.asarray(p)


def _as_index(a: np.ndarray, name: str) -> np.ndarray:
    if a.size and not np.issubdtype(a.dtype, np.integer):
        if not np.all(np.isfinite(a)) or np.any(a != np.round(a)):
            bad = int(np.flatnonzero(~np.isfinite(a) | (a != np.round(a)))[0])
            raise EventError(f"event {bad}: {name} coordinate {a[bad]!r} is not an integer")
    return a.astype(np.int64)


def normalize_stream(raw: Iterable[Event] | Sequence, width: int, height: int,
                     window: tuple[float, float]) -> EventStream:
    """Validate and sort raw events into an :class:`EventStream`.

    ``raw`` is any iterable of ``(x, y, t, p)`` records or a ``(t, x, y, p)``
    tuple of arrays. Sorting is by ``(t, y, x, p)``. Errors name the index of
    the first offending event in the input order.
    """
    t_start, duration = float(window[0]), float(window[1])
    if not duration > 0 or not np.isfinite(duration) or not np.isfinite(t_start):
        raise EventError(f"exposure duration must be positive and finite, got {duration!r}")
    width, height = int(width), int(height)
    if width < 1 or height < 1:
        raise EventError(f"sensor size must be positive, got {width}x{height}")

    t, x, y, p = _columns(raw)
    if not (t.shape == x.shape == y.shape == p.shape) or t.ndim != 1:
        raise EventError("event columns must be 1-D and of equal length")
    x = _as_index(x, "x")
    y = _as_index(y, "y")
    p = _as_index(p, "p")

    checks = [
        ((p != 1) & (p != -1), "polarity {v} is not +1 or -1", p),
        ((x < 0) | (x >= width), f"x={{v}} outside [0, {width})", x),
        ((y < 0) | (y >= height), f"y={{v}} outside [0, {height})", y),
        (~np.isfinite(t) | (t < t_start) | (t > t_start + duration),
         f"t={{v!r}} outside window [{t_start!r}, {t_start + duration!r}]", t),
    ]
    for bad, msg, col in checks:
        if bad.any():
            i = int(np.flatnonzero(bad)[0])
            raise EventError(f"event {i}: " + msg.format(v=col[i].item()))

    order = np.lexsort((p, x, y, t))
    return EventStream(_frozen(t[order]), _frozen(x[order]), _frozen(y[order]),
                       _frozen(p[order].astype(np.int8)), t_start, duration, width, height)


@dataclass(frozen=True)
class EventFrameStack:
    """``2k`` count frames ordered ``S_p1, S_n1, ..., S_pk, S_nk``."""

    k: int
    frames: np.ndarray
    window: tuple[float, float]

    @property
    def positive(self) -> np.ndarray:
        return self.frames[0::2]

    @property
    def negative(self) -> np.ndarray:
        return self.frames[1::2]

    def network_input(self, image: np.ndarray) -> np.ndarray:
        """The ``(1 + 2k, H, W)`` tensor: the observed image then the counts."""
        image = np.asarray(image, float)
        if image.shape != self.frames.shape[1:]:
            raise EventError(f"image shape {image.shape} != frame shape {self.frames.shape[1:]}")
        return np.concatenate([image[None], self.frames.astype(float)])


def bin_events(stream: EventStream, k: int) -> EventFrameStack:
    """Split the exposure into ``k`` equal bins and count events per polarity.

    Bins are half-open on the right except the last, which also takes events
    at exactly ``t_start + duration``.
    """
    if int(k) != k or k < 1:
        raise EventError(f"number of bins must be a positive integer, got {k!r}")
    k = int(k)
    frames = np.zeros((2 * k, stream.height, stream.width), dtype=np.int64)
    if len(stream):
        idx = np.floor((stream.t - stream.t_start) / stream.duration * k).astype(np.int64)
        idx = np.clip(idx, 0, k - 1)
        channel = 2 * idx + (stream.p < 0)
        np.add.at(frames, (channel, stream.y, stream.x), 1)
    return EventFrameStack(k, frames, stream.window)


def reverse_before(stream: EventStream, t_r: float) -> EventStream:
    """Flip polarity and time-reflect every event earlier than ``t_r``.

    An event at ``t < t_r`` moves to ``t_start + (t_r - t)`` with ``-p``;
    later events are untouched. With ``t_r = t_start`` this is the identity.
    """
    t_r = float(t_r)
    if not stream.t_start <= t_r <= stream.t_end:
        raise EventError(f"t_r={t_r!r} outside window [{stream.t_start!r}, {stream.t_end!r}]")
    before = stream.t < t_r
    # reflected times can round one ulp past t_r / t_end
    t = np.where(before, np.minimum(stream.t_start + (t_r - stream.t), t_r), stream.t)
    t = np.minimum(t, stream.t_end)
    p = np.where(before, -stream.p, stream.p)
    return normalize_stream((t, stream.x.copy(), stream.y.copy(), p),
                            stream.width, stream.height, stream.window)


def split_at(stream: EventStream, t_r: float) -> tuple[EventStream | None, EventStream | None]:
    """Split into the ``[t_start, t_r)`` and ``[t_r, t_end]`` segments.

    Each segment is windowed to its own interval; a zero-length segment is
    returned as ``None``.
    """
    t_r = float(t_r)
    if not stream.t_start <= t_r <= stream.t_end:
        raise EventError(f"t_r={t_r!r} outside window [{stream.t_start!r}, {stream.t_end!r}]")
    before = stream.t < t_r
    pre_len = t_r - stream.t_start
    post_len = stream.t_end - t_r
    pre = post = None
    if pre_len > 0:
        pre = _segment(stream, before, stream.t_start, pre_len)
    if post_len > 0:
        post = _segment(stream, ~before, t_r, post_len)
    return pre, post


def _segment(stream: EventStream, mask, start: float, length: float) -> EventStream:
    t = np.clip(stream.t[mask], start, start + length)
    return normalize_stream((t, stream.x[mask], stream.y[mask], stream.p[mask]),
                            stream.width, stream.height, (start, length))
