"""Brute-force reference implementations used to check the vectorized code.

Each oracle is a plain loop written from the definition, sharing no code with
the package.
"""

import math

import numpy as np


def rescan_excursions(mask):
    """Single forward pass over the zero mask: intervals, unfinished flag, gamma."""
    n = len(mask)
    intervals, gamma = [], []
    last = 0
    open_at = None
    for i in range(n):
        if mask[i]:
            last = i
            if open_at is not None:
                intervals.append((open_at, i))
                open_at = None
        elif open_at is None:
            open_at = i - 1
        gamma.append(last)
    unfinished = open_at is not None
    if unfinished:
        intervals.append((open_at, n - 1))
    return intervals, unfinished, gamma


def backward_last_zero(mask, i):
    j = i
    while j >= 0:
        if mask[j]:
            return j
        j -= 1
    raise ValueError("no zero at or before i")


def boundary_mask(values):
    """Zero set surrogate of a signed path, written one index at a time."""
    n = len(values)
    mask = [v == 0.0 for v in values]
    for i in range(n - 1):
        a, b = values[i], values[i + 1]
        if a * b < 0 or (a > 0 > b) or (a < 0 < b):
            if abs(a) <= abs(b):
                mask[i] = True
            else:
                mask[i + 1] = True
    return np.array(mask)


def inverse_scan_tau(qv, t):
    """First index where qv reaches t, moved past any flat stretch sitting exactly at t > 0."""
    if t == 0:
        return 0
    j = 0
    while qv[j] < t:
        j += 1
    while qv[j] == t and j + 1 < len(qv) and qv[j + 1] == t:
        j += 1
    return j


def band_local_time(x, qv, eps):
    out = [0.0]
    acc = 0.0
    for j in range(1, len(x)):
        if abs(x[j - 1]) <= eps:
            acc += qv[j] - qv[j - 1]
        out.append(acc / (2 * eps))
    return np.array(out)


def tanaka_local_time(x):
    out = [0.0]
    s = 0.0
    best = 0.0
    for j in range(1, len(x)):
        sign = 1.0 if x[j - 1] >= 0 else -1.0
        s += sign * (x[j] - x[j - 1])
        best = max(best, abs(x[j]) - abs(x[0]) - s)
        out.append(best)
    return np.array(out)


def resampled_skew_cdf(y, alpha, t, n=400_000, seed=12345):
    """Empirical CDF of zeta |N(0, t)| with P(zeta = 1) = alpha at the points y."""
    rng = np.random.default_rng(seed)
    mag = np.abs(rng.standard_normal(n)) * math.sqrt(t)
    zeta = np.where(rng.random(n) < alpha, 1.0, -1.0)
    sample = np.sort(zeta * mag)
    return np.searchsorted(sample, np.asarray(y), side="right") / n


def ks_distance_loop(sample, cdf):
    xs = sorted(sample)
    n = len(xs)
    d = 0.0
    for i, x in enumerate(xs):
        f = cdf(x)
        d = max(d, (i + 1) / n - f, f - i / n)
    return d
