"""Independent reference computations used only by the tests."""

from __future__ import annotations

import math
from itertools import combinations

import numpy as np


def power_iteration(a: np.ndarray, tol: float = 1e-13, max_iter: int = 10_000) -> tuple[np.ndarray, float]:
    """Principal eigenvector (sum-normalized) and eigenvalue of a positive matrix."""
    a = np.asarray(a, dtype=float)
    v = np.full(a.shape[0], 1.0 / a.shape[0])
    lam = 0.0
    for _ in range(max_iter):
        w = a @ v
        lam_new = w.sum() / v.sum()
        w = w / w.sum()
        if np.max(np.abs(w - v)) < tol:
            v, lam = w, lam_new
            break
        v, lam = w, lam_new
    return v, float(lam)


def normal_cdf(x: float, mean: float = 0.0, sd: float = 1.0) -> float:
    return 0.5 * (1.0 + math.erf((x - mean) / (sd * math.sqrt(2.0))))


def uniform_tail(threshold: float, lo: float, hi: float) -> float:
    return min(max((hi - threshold) / (hi - lo), 0.0), 1.0)


def triangular_tail(x: float, a: float, c: float, b: float) -> float:
    if x <= a:
        return 1.0
    if x >= b:
        return 0.0
    if x <= c:
        return 1.0 - (x - a) ** 2 / ((b - a) * (c - a))
    return (b - x) ** 2 / ((b - a) * (b - c))


def pairwise_conflicts(events) -> set[tuple]:
    """Brute-force conflicting pairs: every pair tested against the four conditions directly."""
    out = set()
    for e1, e2 in combinations(events, 2):
        if e1.location != e2.location or e1.service_id != e2.service_id:
            continue
        if not (max(e1.start, e2.start) < min(e1.end, e2.end)):
            continue
        if e1.user == e2.user:
            continue
        shared = set(e1.attrs) & set(e2.attrs)
        if not any(e1.attrs[k] != e2.attrs[k] for k in shared):
            continue
        out.add(tuple(sorted([e1.user, e2.user])) + (e1.service_id, e1.location))
    return out


COMPARISON_SCALE = tuple([1 / k for k in range(9, 1, -1)] + list(range(1, 10)))
_LOG_SCALE = np.log(COMPARISON_SCALE)


def noisy_scale_matrix(rng, n, sigma=0.3):
    """Ratios of a random weight vector with log-normal judgement noise, snapped onto the 1-9 scale."""
    w = rng.uniform(1, 9, n)
    a = np.ones((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            x = np.log(w[i] / w[j]) + rng.normal(0, sigma)
            v = COMPARISON_SCALE[int(np.argmin(np.abs(_LOG_SCALE - x)))]
            a[i, j], a[j, i] = v, 1 / v
    return a
