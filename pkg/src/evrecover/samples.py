"""Synthetic frame sequences for demos and tests."""

from __future__ import annotations

import numpy as np

from .sim import FrameSequence


def moving_gradient(n_frames: int = 17, size: int = 64, fps: float = 960.0,
                    speed: float = 2.0, low: float = 0.2, high: float = 0.8,
                    t0: float = 0.0) -> FrameSequence:
    """A smooth diagonal intensity wave translating ``speed`` pixels per frame.

    Values stay inside ``[low, high]`` so the log intensity is well defined.
    """
    yy, xx = np.mgrid[0:size, 0:size].astype(float)
    frames = []
    for k in range(n_frames):
        phase = 2 * np.pi * (xx + 0.5 * yy - speed * k) / size
        frames.append(low + (high - low) * (0.5 + 0.5 * np.sin(phase)))
    return FrameSequence.at_rate(np.stack(frames), fps, t0)


def moving_edge(n_frames: int = 17, size: int = 32, fps: float = 960.0,
                speed: float = 0.5, low: float = 0.2, high: float = 0.8,
                width: float = 2.0) -> FrameSequence:
    """A vertical edge (smoothed over ``width`` pixels) sliding to the right."""
    xx = np.arange(size, dtype=float)[None, :].repeat(size, axis=0)
    frames = []
    for k in range(n_frames):
        pos = size / 3 + speed * k
        s = 0.5 * (1 + np.tanh((xx - pos) / width))
        frames.append(low + (high - low) * s)
    return FrameSequence.at_rate(np.stack(frames), fps)
