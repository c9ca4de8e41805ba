"""Reference implementations used only by the tests.

Deliberately naive: explicit loops, no scipy, no code shared with the
package.
"""

from fractions import Fraction
import math

import numpy as np


def gauss_solve(a, b):
    """Solve ``a x = b`` by Gaussian elimination with partial pivoting."""
    a = [list(map(float, row)) for row in np.asarray(a, dtype=float)]
    b = np.asarray(b, dtype=float)
    vec = b.ndim == 1
    rhs = [list(map(float, row)) for row in (b.reshape(-1, 1) if vec else b)]
    n = len(a)
    for col in range(n):
        piv = max(range(col, n), key=lambda r: abs(a[r][col]))
        if a[piv][col] == 0.0:
            raise ZeroDivisionError("singular matrix")
        a[col], a[piv] = a[piv], a[col]
        rhs[col], rhs[piv] = rhs[piv], rhs[col]
        for r in range(col + 1, n):
            f = a[r][col] / a[col][col]
            if f == 0.0:
                continue
            for c in range(col, n):
                a[r][c] -= f * a[col][c]
            for c in range(len(rhs[r])):
                rhs[r][c] -= f * rhs[col][c]
    x = [[0.0] * len(rhs[0]) for _ in range(n)]
    for r in range(n - 1, -1, -1):
        for c in range(len(rhs[0])):
            s = rhs[r][c] - sum(a[r][k] * x[k][c] for k in range(r + 1, n))
            x[r][c] = s / a[r][r]
    x = np.array(x)
    return x[:, 0] if vec else x


def gaussian(u, v, sigma2):
    return math.exp(-sum((p - q) ** 2 for p, q in zip(u, v)) / (2.0 * sigma2))


def gram_loops(rows, cols, sigma2):
    rows = np.atleast_2d(np.asarray(rows, dtype=float).reshape(len(rows), -1))
    cols = np.atleast_2d(np.asarray(cols, dtype=float).reshape(len(cols), -1))
    return np.array([[gaussian(r, c, sigma2) for c in cols] for r in rows])


def km_product_limit(times, events, t):
    """Product over distinct event times s <= t of (1 - d_s / r_s), exact rationals."""
    times = [Fraction(x).limit_denominator(10**9) for x in times]
    t = Fraction(t).limit_denominator(10**9)
    s = Fraction(1)
    for u in sorted(set(times)):
        if u > t:
            break
        d = sum(1 for x, e in zip(times, events) if x == u and e == 1)
        r = sum(1 for x in times if x >= u)
        if d:
            s *= 1 - Fraction(d, r)
    return s


def reverse_km_product_limit(times, events, t):
    """Censoring survival with events leaving the risk set before tied censorings."""
    times = [Fraction(x).limit_denominator(10**9) for x in times]
    t = Fraction(t).limit_denominator(10**9)
    g = Fraction(1)
    for u in sorted(set(times)):
        if u > t:
            break
        c = sum(1 for x, e in zip(times, events) if x == u and e == 0)
        d = sum(1 for x, e in zip(times, events) if x == u and e == 1)
        r = sum(1 for x in times if x >= u) - d
        if c:
            g *= 1 - Fraction(c, r)
    return g


def median_pairs(points):
    pts = [np.atleast_1d(p).astype(float) for p in points]
    d = sorted(
        float(np.sum((pts[i] - pts[j]) ** 2))
        for i in range(len(pts))
        for j in range(i + 1, len(pts))
    )
    k = len(d)
    mid = d[k // 2] if k % 2 else 0.5 * (d[k // 2 - 1] + d[k // 2])
    return mid / 2.0


def uncensored_cme(x0, times, x1, eps, cov_sigma2, time_sigma2, grid):
    """Plain conditional mean embedding: solve (K + n eps I) C = H, average over x1."""
    n = len(times)
    k = gram_loops(x0, x0, cov_sigma2)
    h = gram_loops(np.reshape(times, (-1, 1)), np.reshape(grid, (-1, 1)), time_sigma2)
    c = gauss_solve(k + n * eps * np.eye(n), h)
    k_cross = gram_loops(x0, x1, cov_sigma2)
    return k_cross.mean(axis=1) @ c
