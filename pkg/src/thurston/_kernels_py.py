"""Pure numpy implementations of the hot kernels.

These mirror ``_kernels.pyx`` function for function and are used whenever the
compiled module is unavailable (or ``THURSTON_PURE_PYTHON=1`` is set).
"""

from __future__ import annotations

import numpy as np


def polish_roots(coeffs, roots):
    """One Newton step for each root of each polynomial.

    Parameters
    ----------
    coeffs : (N, d+1) complex array
        Coefficients in increasing degree order.
    roots : (N, k) complex array
        Approximate roots, ``k <= d``.
    """
    coeffs = np.ascontiguousarray(coeffs, dtype=complex)
    roots = np.array(roots, dtype=complex, copy=True)
    deg = coeffs.shape[1] - 1
    p = np.zeros_like(roots)
    dp = np.zeros_like(roots)
    for i in range(deg, -1, -1):
        dp = dp * roots + p
        p = p * roots + coeffs[:, i : i + 1]
    ok = dp != 0
    step = np.where(ok, p / np.where(ok, dp, 1.0), 0.0)
    # Reject steps that would blow up (clustered roots, tiny derivative).
    big = np.abs(step) > 1e-2 * (1.0 + np.abs(roots))
    return np.where(big, roots, roots - step)


def poly_eval(coeffs, t):
    """Evaluate rows of increasing-order coefficients at the matching rows of ``t``."""
    coeffs = np.ascontiguousarray(coeffs, dtype=complex)
    t = np.asarray(t, dtype=complex)
    out = np.zeros_like(t)
    for i in range(coeffs.shape[1] - 1, -1, -1):
        out = out * t + coeffs[:, i : i + 1]
    return out


def polygon_test(poly, pts):
    """Even-odd inside test and distance to the boundary of a closed polygon.

    Parameters
    ----------
    poly : (M,) complex array
        Polygon vertices in order; the closing segment is implicit.
    pts : (N,) complex array
        Query points; non-finite entries are reported outside at infinite
        distance.

    Returns
    -------
    inside : (N,) bool array
    dist : (N,) float array
    """
    poly = np.asarray(poly, dtype=complex)
    pts = np.asarray(pts, dtype=complex)
    finite = np.isfinite(pts)
    q = np.where(finite, pts, 0.0)
    a = poly
    b = np.roll(poly, -1)
    inside = np.zeros(q.shape, dtype=bool)
    dist2 = np.full(q.shape, np.inf)
    px, py = q.real, q.imag
    for ax, ay, bx, by in zip(a.real, a.imag, b.real, b.imag):
        cond = (ay > py) != (by > py)
        with np.errstate(divide="ignore", invalid="ignore"):
            xint = ax + (py - ay) * (bx - ax) / (by - ay)
        inside ^= cond & (px < xint)
        ex, ey = bx - ax, by - ay
        ee = ex * ex + ey * ey
        if ee > 0:
            t = np.clip(((px - ax) * ex + (py - ay) * ey) / ee, 0.0, 1.0)
        else:
            t = np.zeros_like(px)
        dx = px - (ax + t * ex)
        dy = py - (ay + t * ey)
        dist2 = np.minimum(dist2, dx * dx + dy * dy)
    inside &= finite
    dist = np.where(finite, np.sqrt(dist2), np.inf)
    return inside, dist


def greedy_separated(coords, eps):
    """Greedy maximal separated subset under the dynamical chordal metric.

    Parameters
    ----------
    coords : (N, n, 3) float array
        Unit-sphere embeddings of ``x, f(x), ..., f^{n-1}(x)`` per candidate.
    eps : float
        Separation threshold for ``max_i q(f^i x, f^i y)``, where ``q`` is
        half the Euclidean distance.

    Returns
    -------
    list of int
        Selected candidate indices in scan order.
    """
    coords = np.ascontiguousarray(coords, dtype=float)
    lim = 2.0 * eps
    lim2 = lim * lim
    cell = lim
    keys = np.floor(coords[:, 0, :] / cell).astype(np.int64)
    buckets: dict[tuple, list[int]] = {}
    chosen: list[int] = []
    offsets = [(i, j, k) for i in (-1, 0, 1) for j in (-1, 0, 1) for k in (-1, 0, 1)]
    for idx in range(coords.shape[0]):
        kx, ky, kz = keys[idx]
        close = False
        cand = coords[idx]
        for ox, oy, oz in offsets:
            lst = buckets.get((kx + ox, ky + oy, kz + oz))
            if not lst:
                continue
            other = coords[lst]
            d2 = np.sum((other - cand[None, :, :]) ** 2, axis=2)
            if np.any(np.all(d2 < lim2, axis=1)):
                close = True
                break
        if not close:
            chosen.append(idx)
            buckets.setdefault((kx, ky, kz), []).append(idx)
    return chosen
