"""Convolutional sparse coding: thresholding, dictionary synthesis and its
adjoint, step-size estimation, ISTA for the event-weighted LASSO

    min_a  0.5 * ||Y - E * (D_I a)||^2 + lam * ||a||_1

and high-resolution synthesis through a sub-pixel (pixel-shuffle) dictionary.

A :class:`KernelBank` holds weights of shape ``(s*s, m, q, q)``: for each of
the ``s*s`` sub-pixel phases, one ``q x q`` kernel per code channel. An LR
dictionary is the ``s = 1`` case.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np
from scipy.signal import convolve2d, correlate2d

from .degeneration import IntegralField

logger = logging.getLogger(__name__)


class SparseError(ValueError):
    pass


class SolverDivergedError(ArithmeticError):
    def __init__(self, iteration: int):
        super().__init__(f"non-finite sparse code at iteration {iteration}")
        self.iteration = iteration


@dataclass(frozen=True, eq=False)
class KernelBank:
    weights: np.ndarray
    scale: int = 1

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.ndim == 3:
            w = w[None]
        if w.ndim != 4:
            raise SparseError(f"kernel weights must be (s*s, m, q, q), got shape {w.shape}")
        phases, m, q, q2 = w.shape
        if q != q2 or q % 2 == 0:
            raise SparseError(f"kernels must be square with odd size, got {q}x{q2}")
        if m < 1:
            raise SparseError("bank needs at least one atom")
        if int(self.scale) != self.scale or self.scale < 1 or phases != self.scale ** 2:
            raise SparseError(f"{phases} phase channels do not match shuffle factor {self.scale}")
        if not np.all(np.isfinite(w)):
            raise SparseError("kernel coefficients must be finite")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "scale", int(self.scale))

    @property
    def atoms(self) -> int:
        return self.weights.shape[1]

    @property
    def size(self) -> int:
        return self.weights.shape[2]

    def __eq__(self, other):
        if not isinstance(other, KernelBank):
            return NotImplemented
        return self.scale == other.scale and np.array_equal(self.weights, other.weights)


def identity_bank() -> KernelBank:
    """A single 1x1 unit kernel."""
    return KernelBank(np.ones((1, 1, 1, 1)))


def dct_bank(q: int = 3, m: int = 8) -> KernelBank:
    """Separable orthonormal DCT-II atoms of size ``q x q``, lowest frequencies first.

    The default 3x3 bank keeps the 8 lowest of the 9 products (DC, first and
    second derivatives), dropping the checkerboard.
    """
    n = np.arange(q)
    basis = np.array([np.cos(np.pi * (n + 0.5) * k / q) for k in range(q)])
    basis /= np.linalg.norm(basis, axis=1, keepdims=True)
    pairs = sorted(((i, j) for i in range(q) for j in range(q)), key=lambda ij: (ij[0] + ij[1], ij))
    if not 1 <= m <= len(pairs):
        raise SparseError(f"a {q}x{q} DCT bank has between 1 and {len(pairs)} atoms, asked for {m}")
    atoms = np.stack([np.outer(basis[i], basis[j]) for i, j in pairs[:m]])
    return KernelBank(atoms[None])


def replicate_hr_bank(bank: KernelBank, s: int) -> KernelBank:
    """HR bank whose synthesis is nearest-neighbour upsampling of the LR one."""
    if bank.scale != 1:
        raise SparseError("replicate an LR (scale 1) bank")
    return KernelBank(np.repeat(bank.weights, s * s, axis=0), s)


def soft_threshold(v, theta: float, nonnegative: bool = False) -> np.ndarray:
    if theta < 0:
        raise SparseError(f"threshold must be >= 0, got {theta!r}")
    v = np.asarray(v, dtype=float)
    if nonnegative:
        return np.maximum(v - theta, 0.0)
    # adding +0.0 turns the -0.0 produced by sign(v) * 0 into +0.0
    return np.sign(v) * np.maximum(np.abs(v) - theta, 0.0) + 0.0


def _synthesize(bank: KernelBank, alpha: np.ndarray) -> np.ndarray:
    alpha = np.asarray(alpha, dtype=float)
    if alpha.ndim != 3 or alpha.shape[0] != bank.atoms:
        raise SparseError(f"code has shape {alpha.shape}, bank expects {bank.atoms} channels")
    out = np.zeros((bank.weights.shape[0],) + alpha.shape[1:])
    for j, phase in enumerate(bank.weights):
        for i in range(bank.atoms):
            out[j] += convolve2d(alpha[i], phase[i], mode="same")
    return out


def dict_apply(bank: KernelBank, alpha) -> np.ndarray:
    """``sum_i kernel_i * alpha_i`` with zero-padded borders, same size as alpha."""
    if bank.scale != 1:
        raise SparseError("dict_apply takes an LR bank; use recover_hr for scale > 1")
    return _synthesize(bank, alpha)[0]


def dict_adjoint(bank: KernelBank, r) -> np.ndarray:
    """Exact adjoint of :func:`dict_apply`: per-channel correlation with each kernel."""
    if bank.scale != 1:
        raise SparseError("dict_adjoint takes an LR bank")
    r = np.asarray(r, dtype=float)
    if r.ndim != 2:
        raise SparseError(f"residual must be 2-D, got shape {r.shape}")
    return np.stack([correlate2d(r, k, mode="same") for k in bank.weights[0]])


def _field(E, shape=None) -> np.ndarray:
    ev = E.values if isinstance(E, IntegralField) else np.asarray(E, dtype=float)
    if shape is not None and ev.shape != shape:
        raise SparseError(f"integral field {ev.shape} does not match image {shape}")
    return ev


def power_iteration(bank: KernelBank, E, iters: int = 50, seed: int = 0) -> float:
    """Largest eigenvalue of ``a -> D^T E^2 D a`` by power iteration."""
    if iters < 1:
        raise SparseError("power iteration needs at least one step")
    ev = _field(E)
    e2 = ev * ev
    x = np.random.default_rng(seed).standard_normal((bank.atoms,) + ev.shape)
    x /= np.linalg.norm(x)
    lam = 0.0
    for _ in range(iters):
        y = dict_adjoint(bank, e2 * dict_apply(bank, x))
        lam = float(np.vdot(x, y))
        norm = np.linalg.norm(y)
        if norm == 0:
            return 0.0
        x = y / norm
    return lam


def estimate_lipschitz(bank: KernelBank, E, iters: int = 50, seed: int = 0) -> float:
    """Power-iteration estimate of the data-term Lipschitz constant, times 1.05.

    Returns 1.0 when the operator is zero.
    """
    lam = power_iteration(bank, E, iters, seed)
    if not lam > 0:
        return 1.0
    return 1.05 * lam


Lipschitz = Union[float, str]


@dataclass(frozen=True)
class SolverConfig:
    lam: float = 0.01
    iterations: int = 20
    tolerance: float = 0.0
    lipschitz: Lipschitz = "auto"
    nonnegative: bool = False

    def __post_init__(self):
        if not self.lam >= 0:
            raise SparseError(f"lambda must be >= 0, got {self.lam!r}")
        if int(self.iterations) != self.iterations or self.iterations < 1:
            raise SparseError(f"iterations must be a positive integer, got {self.iterations!r}")
        if not self.tolerance >= 0:
            raise SparseError(f"tolerance must be >= 0, got {self.tolerance!r}")
        if self.lipschitz != "auto" and not (isinstance(self.lipschitz, (int, float))
                                             and self.lipschitz > 0):
            raise SparseError(f"Lipschitz constant must be > 0 or 'auto', got {self.lipschitz!r}")


def lasso_objective(Y, E, bank: KernelBank, alpha, lam: float) -> float:
    Y = np.asarray(Y, dtype=float)
    r = Y - _field(E, Y.shape) * dict_apply(bank, alpha)
    return 0.5 * float(np.sum(r * r)) + lam * float(np.sum(np.abs(alpha)))


def ista_step(alpha: np.ndarray, e2: np.ndarray, b: np.ndarray, bank: KernelBank,
              L: float, lam: float, nonnegative: bool = False) -> np.ndarray:
    """One ISTA update; ``e2 = E*E`` and ``b = D^T (E*Y)`` are precomputed."""
    grad = dict_adjoint(bank, e2 * dict_apply(bank, alpha)) - b
    return soft_threshold(alpha - grad / L, lam / L, nonnegative)


def ista_solve(Y, E, bank: KernelBank, cfg: SolverConfig | None = None,
               callback: Callable[[int, np.ndarray], None] | None = None) -> np.ndarray:
    """Sparse code of ``Y`` on ``bank`` weighted by the integral field ``E``.

    Starts from zero and runs ``cfg.iterations`` ISTA steps, stopping early
    once the relative change of the code drops below ``cfg.tolerance`` (a
    zero tolerance runs every step). ``callback(n, alpha)`` sees each iterate.
    """
    cfg = cfg or SolverConfig()
    Y = np.asarray(Y, dtype=float)
    if Y.ndim != 2:
        raise SparseError(f"observation must be 2-D, got shape {Y.shape}")
    if bank.scale != 1:
        raise SparseError("solve on an LR (scale 1) bank")
    ev = _field(E, Y.shape)
    L = estimate_lipschitz(bank, ev) if cfg.lipschitz == "auto" else float(cfg.lipschitz)
    e2 = ev * ev
    b = dict_adjoint(bank, ev * Y)
    alpha = np.zeros((bank.atoms,) + Y.shape)

    for n in range(1, int(cfg.iterations) + 1):
        nxt = ista_step(alpha, e2, b, bank, L, cfg.lam, cfg.nonnegative)
        if not np.all(np.isfinite(nxt)):
            raise SolverDivergedError(n)
        change = np.linalg.norm(nxt - alpha)
        ref = np.linalg.norm(alpha)
        alpha = nxt
        if callback is not None:
            callback(n, alpha)
        if cfg.tolerance > 0 and (change == 0 or (ref > 0 and change / ref < cfg.tolerance)):
            logger.debug("ISTA stopped at iteration %d (relative change %.3g)", n,
                         change / ref if ref else 0.0)
            break
    return alpha


def pixel_shuffle(channels: np.ndarray, s: int) -> np.ndarray:
    """``(s*s, H, W) -> (s*H, s*W)``; output ``(y*s + dy, x*s + dx)`` takes
    channel ``dy*s + dx`` at ``(y, x)``."""
    c, h, w = channels.shape
    if c != s * s:
        raise SparseError(f"{c} channels cannot be shuffled by factor {s}")
    return channels.reshape(s, s, h, w).transpose(2, 0, 3, 1).reshape(h * s, w * s)


def pixel_unshuffle(image: np.ndarray, s: int) -> np.ndarray:
    h, w = image.shape
    if h % s or w % s:
        raise SparseError(f"image {h}x{w} not divisible by {s}")
    return image.reshape(h // s, s, w // s, s).transpose(1, 3, 0, 2).reshape(s * s, h // s, w // s)


def recover_hr(bank: KernelBank, alpha, s: int | None = None) -> np.ndarray:
    """Synthesize the HR image from a shared code, clamped at zero."""
    s = bank.scale if s is None else int(s)
    if s != bank.scale:
        raise SparseError(f"bank has shuffle factor {bank.scale}, asked for {s}")
    return np.maximum(pixel_shuffle(_synthesize(bank, alpha), s), 0.0)
