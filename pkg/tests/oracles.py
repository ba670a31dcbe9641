"""Independent reference computations used by the tests.

None of these call into the code paths they check: the double integral is
integrated numerically from a brute-force event count, dictionaries are
materialized element by element, LASSO is solved by coordinate descent and
SSIM is evaluated one window at a time.
"""

import numpy as np
from scipy.integrate import quad


def signed_count(times, pols, t_r, t):
    """Signed event count from t_r to t; events at t_r count forward."""
    total = 0
    for ti, pi in zip(times, pols):
        if t >= t_r and t_r <= ti <= t:
            total += pi
        elif t < t_r and t < ti < t_r:
            total -= pi
    return total


def quadrature_integral(times, pols, c, t_r, t_start, duration):
    """E(t_r) for one pixel by adaptive quadrature, split at every event time."""
    t_end = t_start + duration
    edges = sorted({t_start, t_end, t_r, *[t for t in times if t_start < t < t_end]})
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        if b <= a:
            continue
        val, _ = quad(lambda t: np.exp(c * signed_count(times, pols, t_r, t)), a, b,
                      epsabs=1e-14, epsrel=1e-13, limit=50)
        total += val
    return total / duration


def dense_operator(weights, E):
    """Matrix of alpha -> E * sum_i (k_i conv alpha_i), zero padded, same size."""
    m, q = weights.shape[0], weights.shape[1]
    h = q // 2
    H, W = E.shape
    A = np.zeros((H * W, m * H * W))
    for i in range(m):
        for y in range(H):
            for x in range(W):
                for dy in range(q):
                    for dx in range(q):
                        yy, xx = y - dy + h, x - dx + h
                        if 0 <= yy < H and 0 <= xx < W:
                            A[y * W + x, i * H * W + yy * W + xx] += E[y, x] * weights[i, dy, dx]
    return A


def coordinate_descent_lasso(A, y, lam, sweeps=100000, tol=1e-14):
    """min 0.5||y - A a||^2 + lam ||a||_1 by cyclic coordinate descent."""
    a = np.zeros(A.shape[1])
    r = y.astype(float).copy()
    col2 = (A * A).sum(axis=0)
    for _ in range(sweeps):
        biggest = 0.0
        for j in range(A.shape[1]):
            if col2[j] == 0:
                continue
            old = a[j]
            rho = A[:, j] @ r + col2[j] * old
            new = np.sign(rho) * max(abs(rho) - lam, 0.0) / col2[j]
            if new != old:
                r -= A[:, j] * (new - old)
                a[j] = new
                biggest = max(biggest, abs(new - old))
        if biggest < tol:
            break
    return a, 0.5 * float(r @ r) + lam * float(np.abs(a).sum())


def ssim_by_windows(a, b, size=11, sigma=1.5, k1=0.01, k2=0.03, L=1.0):
    x = np.arange(size) - (size - 1) / 2
    g = np.exp(-x ** 2 / (2 * sigma ** 2))
    w = np.outer(g, g)
    w /= w.sum()
    c1, c2 = (k1 * L) ** 2, (k2 * L) ** 2
    vals = []
    for i in range(a.shape[0] - size + 1):
        for j in range(a.shape[1] - size + 1):
            pa = a[i:i + size, j:j + size]
            pb = b[i:i + size, j:j + size]
            ma, mb = (w * pa).sum(), (w * pb).sum()
            va = (w * (pa - ma) ** 2).sum()
            vb = (w * (pb - mb) ** 2).sum()
            cov = (w * (pa - ma) * (pb - mb)).sum()
            vals.append((2 * ma * mb + c1) * (2 * cov + c2)
                        / ((ma ** 2 + mb ** 2 + c1) * (va + vb + c2)))
    return float(np.mean(vals))


def stepped_crossings(l0, l1, c, t0=0.0, t1=1.0, step=1e-6):
    """Event times of a linear log ramp found by dense time stepping."""
    grid = np.arange(t0, t1 + step / 2, step)
    logs = l0 + (l1 - l0) * (grid - t0) / (t1 - t0)
    sign = 1 if l1 > l0 else -1
    times, k = [], 1
    while True:
        level = l0 + sign * k * c
        hit = np.flatnonzero(sign * (logs - level) >= 0)
        if hit.size == 0:
            break
        times.append(grid[hit[0]])
        k += 1
    return np.array(times)


def stepped_simulation(frames, timestamps, c, step, floor=1.0 / 255):
    """Per-pixel stepping simulator over a whole sequence for one pixel series."""
    logs = np.log(np.maximum(frames, floor))
    ref = logs[0]
    events = []
    for k in range(len(frames) - 1):
        ta, tb = timestamps[k], timestamps[k + 1]
        n = int(round((tb - ta) / step))
        for i in range(1, n + 1):
            t = ta + (tb - ta) * i / n
            level = logs[k] + (logs[k + 1] - logs[k]) * i / n
            while level >= ref + c:
                ref += c
                events.append((t, 1))
            while level <= ref - c:
                ref -= c
                events.append((t, -1))
    return events
