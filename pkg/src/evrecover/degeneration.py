"""Event-enhanced degeneration model.

The observed exposure ``Y`` relates to the latent low-resolution frame at a
reference time ``t_r`` through the per-pixel double integral of events,

    E(t_r) = 1/T * integral_{t_f}^{t_f+T} exp(c * n(t)) dt,

where ``n(t)`` is the signed event count between ``t_r`` and ``t``. With a
high-resolution latent ``X`` and downsampling ``P``: ``Y = E * (P X) + noise``.

Intensities are in working units ``[0, 1]`` (8-bit data scaled by 1/255).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .events import EventError, EventStream, reverse_before, split_at


class ModelError(ValueError):
    pass


def as_image(a, name: str = "image") -> np.ndarray:
    """Validate an intensity image: 2-D, finite, nonnegative."""
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.size == 0:
        raise ModelError(f"{name} must be a non-empty 2-D array, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ModelError(f"{name} has non-finite values")
    if np.any(a < 0):
        raise ModelError(f"{name} has negative values")
    return a


@dataclass(frozen=True)
class CameraModel:
    threshold: float = 0.1
    noise_sigma: float = 4.0       # on the 0-255 scale
    spurious_event_ratio: float = 0.3

    def __post_init__(self):
        if not self.threshold > 0:
            raise ModelError(f"threshold c must be > 0, got {self.threshold!r}")
        if not self.noise_sigma >= 0:
            raise ModelError(f"noise sigma must be >= 0, got {self.noise_sigma!r}")
        if not 0 <= self.spurious_event_ratio < 1:
            raise ModelError(f"spurious event ratio must be in [0, 1), got {self.spurious_event_ratio!r}")


@dataclass(frozen=True, eq=False)
class IntegralField:
    """Per-pixel double integral of events at ``t_ref``."""

    values: np.ndarray
    t_ref: float
    window: tuple[float, float]
    threshold: float

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def to_text(self) -> str:
        """Row-major decimal grid, one image row per line."""
        return "".join(" ".join(repr(float(v)) for v in row) + "\n" for row in self.values)


def inner_sum(stream: EventStream, pixel: tuple[int, int], t_a: float, t_b: float) -> int:
    """Signed event count at ``pixel = (x, y)`` from ``t_a`` to ``t_b``.

    Counts polarities with timestamps in ``[min, max)`` and negates the result
    when ``t_b < t_a``, so an event exactly at the reference ``t_a`` belongs to
    the forward side.
    """
    for v in (t_a, t_b):
        if not stream.t_start <= v <= stream.t_end:
            raise EventError(f"time {v!r} outside window [{stream.t_start!r}, {stream.t_end!r}]")
    x, y = pixel
    lo, hi = min(t_a, t_b), max(t_a, t_b)
    sel = (stream.x == x) & (stream.y == y) & (stream.t >= lo) & (stream.t < hi)
    total = int(stream.p[sel].astype(np.int64).sum())
    return -total if t_b < t_a else total


def _group_cumsum(values: np.ndarray, starts: np.ndarray) -> np.ndarray:
    """Inclusive cumulative sum restarting at each index in ``starts``."""
    c = np.cumsum(values)
    before = np.r_[0.0, c][starts]
    sizes = np.diff(np.r_[starts, values.size])
    return c - np.repeat(before, sizes)


def _sided_integral(times, pol, pix, t0, t1, c, npix, forward: bool) -> np.ndarray:
    """Integral of ``exp(c n(t)) - 1`` over one side of ``t_r``, per pixel.

    ``times`` are sorted by (pixel, time). Forward side: ``t0 = t_r``,
    ``t1 = t_end``, n accumulates positively. Backward side: ``t0 = t_start``,
    ``t1 = t_r``, n is minus the polarity sum of events between t and t_r.
    """
    out = np.zeros(npix)
    if times.size == 0:
        return out
    starts = np.flatnonzero(np.r_[True, pix[1:] != pix[:-1]])
    ends = np.r_[starts[1:], pix.size] - 1
    if forward:
        n = _group_cumsum(pol, starts)
        nxt = np.empty_like(times)
        nxt[:-1] = times[1:]
        nxt[ends] = t1
        seg = nxt - times
    else:
        rev = _group_cumsum(pol[::-1], np.sort(pix.size - 1 - ends))[::-1]
        n = -rev
        prv = np.empty_like(times)
        prv[1:] = times[:-1]
        prv[starts] = t0
        seg = times - prv
    np.add.at(out, pix, np.expm1(c * n) * seg)
    return out


def double_integral(stream: EventStream, c: float, t_r: float) -> IntegralField:
    """Closed-form ``E(t_r)`` over the stream's exposure.

    The exponent is piecewise constant between event times, so the integral is
    an exact finite sum. Events exactly at ``t_r`` count on the forward side.
    """
    if not stream.duration > 0:
        raise ModelError("exposure duration must be positive")
    if not c > 0:
        raise ModelError(f"threshold c must be > 0, got {c!r}")
    t_r = float(t_r)
    if not stream.t_start <= t_r <= stream.t_end:
        raise EventError(f"t_r={t_r!r} outside window [{stream.t_start!r}, {stream.t_end!r}]")

    npix = stream.width * stream.height
    pix = stream.y.astype(np.int64) * stream.width + stream.x
    order = np.lexsort((stream.t, pix))
    t, p, pix = stream.t[order], stream.p[order].astype(float), pix[order]

    fwd = t >= t_r
    acc = _sided_integral(t[fwd], p[fwd], pix[fwd], t_r, stream.t_end, c, npix, True)
    acc += _sided_integral(t[~fwd], p[~fwd], pix[~fwd], stream.t_start, t_r, c, npix, False)
    # the "-1" of expm1 integrates back to the full duration
    values = 1.0 + acc / stream.duration
    return IntegralField(values.reshape(stream.height, stream.width), t_r,
                         stream.window, float(c))


def double_integral_by_reversal(stream: EventStream, c: float, t_r: float) -> IntegralField:
    """``E(t_r)`` assembled from two segments referenced at their own starts.

    The pre-``t_r`` events are polarity/order reversed so a reconstruction
    referenced at the window start applies at ``t_r``; the weighted segment
    averages recombine to the full-exposure value.
    """
    reversed_stream = reverse_before(stream, t_r)
    pre, post = split_at(reversed_stream, t_r)
    total = np.zeros(stream.shape)
    for seg in (pre, post):
        if seg is not None:
            total += seg.duration * double_integral(seg, c, seg.t_start).values
    return IntegralField(total / stream.duration, float(t_r), stream.window, float(c))


@dataclass(frozen=True)
class DownsampleOp:
    scale: int = 1
    method: str = "box"

    def __post_init__(self):
        if int(self.scale) != self.scale or self.scale < 1:
            raise ModelError(f"downsampling scale must be a positive integer, got {self.scale!r}")
        if self.method not in ("box", "bicubic"):
            raise ModelError(f"unknown downsampling method {self.method!r}")

    def __call__(self, image) -> np.ndarray:
        return downsample(image, self)


def _cubic_weights(frac: np.ndarray, a: float = -0.5) -> np.ndarray:
    """Catmull-Rom weights for taps at offsets -1, 0, 1, 2 from floor(pos)."""
    d = np.stack([1 + frac, frac, 1 - frac, 2 - frac], axis=-1)
    w = np.where(d <= 1, (a + 2) * d**3 - (a + 3) * d**2 + 1,
                 a * d**3 - 5 * a * d**2 + 8 * a * d - 4 * a)
    return np.where(d < 2, w, 0.0)


def _bicubic_axis(img: np.ndarray, s: int, axis: int) -> np.ndarray:
    n = img.shape[axis]
    m = n // s
    pos = (np.arange(m) + 0.5) * s - 0.5
    base = np.floor(pos).astype(np.int64)
    w = _cubic_weights(pos - base)
    idx = np.clip(base[:, None] + np.arange(-1, 3)[None, :], 0, n - 1)
    taken = np.take(img, idx, axis=axis)  # axis becomes (m, 4)
    shape = [1] * taken.ndim
    shape[axis], shape[axis + 1] = m, 4
    return (taken * w.reshape(shape)).sum(axis=axis + 1)


def downsample(image, op: DownsampleOp) -> np.ndarray:
    img = np.asarray(image, dtype=float)
    s = int(op.scale)
    if s == 1:
        return img.copy()
    h, w = img.shape
    if op.method == "box":
        if h % s or w % s:
            raise ModelError(f"image {h}x{w} not divisible by scale {s} for box averaging")
        return img.reshape(h // s, s, w // s, s).mean(axis=(1, 3))
    if h < s or w < s:
        raise ModelError(f"image {h}x{w} smaller than scale {s}")
    return _bicubic_axis(_bicubic_axis(img, s, 0), s, 1)


def apply_forward(X, E: IntegralField | np.ndarray, P: DownsampleOp | None = None,
                  sigma: float = 0.0, rng_seed: int | None = 0) -> np.ndarray:
    """Degrade a latent image: ``Y = E * P(X) + N(0, sigma/255)``, clamped at 0."""
    X = as_image(X, "latent image")
    P = P or DownsampleOp()
    ev = E.values if isinstance(E, IntegralField) else np.asarray(E, dtype=float)
    low = downsample(X, P)
    if low.shape != ev.shape:
        raise ModelError(f"downsampled image {low.shape} does not match integral field {ev.shape}")
    if sigma < 0:
        raise ModelError(f"noise sigma must be >= 0, got {sigma!r}")
    Y = ev * low
    if sigma > 0:
        rng = np.random.default_rng(rng_seed)
        Y = Y + rng.normal(0.0, sigma / 255.0, size=Y.shape)
    return np.maximum(Y, 0.0)
