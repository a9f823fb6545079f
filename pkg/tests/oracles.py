"""Reference implementations that share no code with the package.

Scalar losses are evaluated in 50-digit arithmetic straight from their
definitions; the projection is solved by enumerating active sets.
"""

import itertools

import mpmath as mp
import numpy as np

mp.mp.dps = 50


def sig(t):
    return 1 / (1 + mp.e ** (-mp.mpf(t)))


def bounds(zeta, z):
    K = len(zeta) // 2
    padded = [-mp.inf] + [mp.mpf(float(t)) for t in zeta] + [mp.inf]
    rank = z + K + 1
    return padded[rank - 1], padded[rank]


def prob(s, zeta, z):
    lo, hi = bounds(zeta, z)
    s = mp.mpf(float(s))
    up = mp.mpf(1) if hi == mp.inf else sig(hi - s)
    down = mp.mpf(0) if lo == -mp.inf else sig(lo - s)
    return up - down


def nll(s, zeta, z):
    return float(-mp.log(prob(s, zeta, z)))


def at(s, zeta, z):
    """Sum over sorted thresholds j of -log sigmoid(nu_j (zeta_j - s)), nu_j = -1 below the target rank."""
    K = len(zeta) // 2
    rank = z + K + 1
    total = mp.mpf(0)
    for j, t in enumerate(zeta, 1):
        nu = -1 if j < rank else 1
        total += -mp.log(sig(nu * (mp.mpf(float(t)) - mp.mpf(float(s)))))
    return float(total)


def it(s, zeta, z):
    lo, hi = bounds(zeta, z)
    s = mp.mpf(float(s))
    total = mp.mpf(0)
    if lo != -mp.inf:
        total += -mp.log(sig(s - lo))
    if hi != mp.inf:
        total += -mp.log(sig(hi - s))
    return float(total)


def log_sigmoid(t):
    return float(mp.log(sig(t)))


def project_active_sets(raw, eps):
    """Exact projection onto {x : x_{j+1} - x_j >= eps} by trying every active set.

    For an active set A the constraints in A hold with equality, which ties
    consecutive coordinates into blocks; each block's optimum is its mean
    after removing the eps offsets.  Keep the closest feasible candidate.
    """
    raw = np.asarray(raw, dtype=float)
    n = raw.size
    best, best_d = None, np.inf
    for active in itertools.product((False, True), repeat=n - 1):
        x = np.empty(n)
        start = 0
        for j in range(n):
            if j == n - 1 or not active[j]:
                idx = np.arange(start, j + 1)
                off = eps * (idx - start)
                base = np.mean(raw[idx] - off)
                x[idx] = base + off
                start = j + 1
        if np.all(np.diff(x) >= eps - 1e-12):
            d = np.sum((x - raw) ** 2)
            if d < best_d:
                best, best_d = x, d
    return best
