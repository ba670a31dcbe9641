"""Frame-sequence event simulator and the synthetic degradation recipe.

Events are generated per pixel from log intensity interpolated linearly in
time between frames; each crossing of the reference level +/- c emits one
event at the interpolated crossing time and moves the reference by c.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .degeneration import CameraModel, DownsampleOp, apply_forward, as_image, downsample
from .events import EventStream, normalize_stream


class SimulationError(ValueError):
    pass


DEFAULT_FLOOR = 1.0 / 255.0


@dataclass(frozen=True, eq=False)
class FrameSequence:
    frames: np.ndarray        # (n, H, W)
    timestamps: np.ndarray    # (n,), strictly increasing seconds

    def __post_init__(self):
        frames = np.asarray(self.frames, dtype=float)
        ts = np.asarray(self.timestamps, dtype=float)
        if frames.ndim != 3 or frames.shape[0] < 2:
            raise SimulationError(f"need at least 2 frames of shape (n, H, W), got {frames.shape}")
        if ts.shape != (frames.shape[0],):
            raise SimulationError(f"{ts.size} timestamps for {frames.shape[0]} frames")
        if np.any(np.diff(ts) <= 0):
            raise SimulationError("timestamps must be strictly increasing")
        for i, f in enumerate(frames):
            as_image(f, f"frame {i}")
        object.__setattr__(self, "frames", frames)
        object.__setattr__(self, "timestamps", ts)

    @classmethod
    def at_rate(cls, frames, fps: float, t0: float = 0.0) -> "FrameSequence":
        frames = np.asarray(frames, dtype=float)
        return cls(frames, t0 + np.arange(frames.shape[0]) / float(fps))

    def __len__(self) -> int:
        return self.frames.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.frames.shape[1:]

    def slice(self, first: int, count: int) -> "FrameSequence":
        return FrameSequence(self.frames[first:first + count], self.timestamps[first:first + count])


def simulate_events(seq: FrameSequence, c: float = 0.1, floor: float = DEFAULT_FLOOR) -> EventStream:
    """Events for a frame sequence, windowed to its first and last timestamps."""
    if not c > 0:
        raise SimulationError(f"threshold c must be > 0, got {c!r}")
    if not floor > 0:
        raise SimulationError(f"intensity floor must be > 0, got {floor!r}")
    h, w = seq.shape
    logs = np.log(np.maximum(seq.frames, floor)).reshape(len(seq), -1)
    ref = logs[0].copy()
    pix_all = np.arange(h * w)
    ts, pix, pol = [], [], []

    for k in range(len(seq) - 1):
        l0, l1 = logs[k], logs[k + 1]
        t0, dt = seq.timestamps[k], seq.timestamps[k + 1] - seq.timestamps[k]
        diff = l1 - ref
        # the tiny slack keeps exact multiples of c from losing a crossing to rounding
        up = np.floor(diff / c + 1e-9).astype(np.int64)
        dn = np.floor(-diff / c + 1e-9).astype(np.int64)
        count = np.where(diff > 0, np.maximum(up, 0), np.maximum(dn, 0))
        if not count.any():
            continue
        sign = np.where(diff > 0, 1, -1)
        p_idx = np.repeat(pix_all, count)
        j = np.arange(count.sum()) - np.repeat(np.cumsum(count) - count, count) + 1
        level = ref[p_idx] + sign[p_idx] * j * c
        slope = l1[p_idx] - l0[p_idx]
        frac = np.divide(level - l0[p_idx], slope, out=np.ones_like(slope), where=slope != 0)
        ts.append(t0 + np.clip(frac, 0.0, 1.0) * dt)
        pix.append(p_idx)
        pol.append(sign[p_idx])
        ref = ref + sign * count * c

    t_start = float(seq.timestamps[0])
    duration = float(seq.timestamps[-1] - seq.timestamps[0])
    if not ts:
        return normalize_stream([], w, h, (t_start, duration))
    t = np.minimum(np.concatenate(ts), t_start + duration)
    p_idx = np.concatenate(pix)
    return normalize_stream((t, p_idx % w, p_idx // w, np.concatenate(pol)), w, h,
                            (t_start, duration))


@dataclass(frozen=True, eq=False)
class BlurredFrame:
    image: np.ndarray
    t_start: float
    duration: float
    count: int

    @property
    def window(self) -> tuple[float, float]:
        return (self.t_start, self.duration)


def synthesize_blur(seq: FrameSequence, first: int = 0, count: int | None = None) -> BlurredFrame:
    """Average ``count`` consecutive frames starting at ``first``.

    The exposure runs from the first to the last averaged frame's timestamp.
    """
    n = len(seq)
    count = n - first if count is None else count
    if count < 1 or first < 0 or first + count > n:
        raise SimulationError(f"frames [{first}, {first + count}) outside sequence of {n}")
    chunk = seq.frames[first:first + count]
    t0 = float(seq.timestamps[first])
    return BlurredFrame(chunk.mean(axis=0), t0, float(seq.timestamps[first + count - 1]) - t0, count)


def inject_noise_events(stream: EventStream, ratio: float, rng_seed: int | None = 0) -> EventStream:
    """Append ``floor(ratio * len(stream))`` uniformly random spurious events."""
    if not 0 <= ratio < 1:
        raise SimulationError(f"noise ratio must be in [0, 1), got {ratio!r}")
    n = int(np.floor(ratio * len(stream)))
    if n == 0:
        return stream
    rng = np.random.default_rng(rng_seed)
    x = rng.integers(0, stream.width, n)
    y = rng.integers(0, stream.height, n)
    t = rng.uniform(stream.t_start, stream.t_end, n)
    p = rng.choice(np.array([-1, 1]), n)
    return normalize_stream((np.r_[stream.t, t], np.r_[stream.x, x], np.r_[stream.y, y],
                             np.r_[stream.p, p]), stream.width, stream.height, stream.window)


@dataclass(frozen=True, eq=False)
class DegradedSample:
    hr: np.ndarray           # HR clear frame at the exposure start
    lr: np.ndarray           # LR clear frame at the exposure start
    blur: np.ndarray         # LR blurry noisy observation
    events: EventStream


def degrade(hr_seq: FrameSequence, first: int, count: int = 17, scale: int = 1,
            camera: CameraModel | None = None, rng_seed: int = 0) -> DegradedSample:
    """One training sample: blur ``count`` LR frames, add image noise and
    spurious events. LR frames come from bicubic downsampling by ``scale``.
    """
    camera = camera or CameraModel()
    if count < 2:
        raise SimulationError("blur window needs at least 2 frames to define an exposure")
    if first < 0 or first + count > len(hr_seq):
        raise SimulationError(f"frames [{first}, {first + count}) outside sequence of {len(hr_seq)}")
    hr_chunk = hr_seq.slice(first, count)
    op = DownsampleOp(scale, "bicubic")
    lr = np.clip(np.stack([downsample(f, op) for f in hr_chunk.frames]), 0.0, None)
    lr_seq = FrameSequence(lr, hr_chunk.timestamps)

    blurred = synthesize_blur(lr_seq)
    ss = np.random.SeedSequence(rng_seed)
    img_seed, ev_seed = (int(s.generate_state(1)[0]) for s in ss.spawn(2))
    blur = apply_forward(blurred.image, np.ones(blurred.image.shape), None,
                         camera.noise_sigma, img_seed)
    events = simulate_events(lr_seq, camera.threshold)
    events = inject_noise_events(events, camera.spurious_event_ratio, ev_seed)
    return DegradedSample(hr_chunk.frames[0].copy(), lr[0].copy(), blur, events)
