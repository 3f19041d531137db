"""Brute-force reference implementations used to check the fast paths.

Everything here works by explicit loops over blocks and index pairs and
shares nothing with the prefix-sum machinery it verifies.
"""

import numpy as np

from episcan import enumerate_blocks
from episcan.scan import TIE_RTOL


def block_indices(shape, block):
    """Flat C-order indices of the lattice points inside a block."""
    flat = np.arange(shape.total).reshape(shape.dims)
    return flat[block.slices()].reshape(-1)


def brute_scan_gram(gram):
    """Max of Q(B)/N over all blocks by double loops over the Gram.

    Applies the same tie rule as the scan: scores within a small relative
    tolerance of the maximum are tied and the lexicographically smallest
    block wins.
    """
    shape = gram.shape
    n_total = shape.total
    scored = []
    for block in enumerate_blocks(shape):
        idx = block_indices(shape, block)
        pbb = float(gram.entries[np.ix_(idx, idx)].sum())
        pball = float(gram.row_sums[idx].sum())
        lam = block.volume / n_total
        q = pbb - 2.0 * lam * pball + lam * lam * gram.total
        scored.append((q, block))
    best = max(q for q, _ in scored)
    cutoff = best - TIE_RTOL * max(1.0, abs(best))
    argmax = min((b for q, b in scored if q >= cutoff), key=lambda b: b.key())
    return max(best, 0.0) / n_total, argmax


def brute_scan_mean(field):
    """Mean scan by direct summation of observation vectors per block."""
    shape = field.shape
    n_total = shape.total
    pts = field.points()
    total_vec = pts.sum(axis=0)
    scored = []
    for block in enumerate_blocks(shape):
        idx = block_indices(shape, block)
        lam = block.volume / n_total
        diff = pts[idx].sum(axis=0) - lam * total_vec
        scored.append((float(diff @ diff), block))
    best = max(q for q, _ in scored)
    cutoff = best - TIE_RTOL * max(1.0, abs(best))
    argmax = min((b for q, b in scored if q >= cutoff), key=lambda b: b.key())
    return max(best, 0.0) / n_total, argmax


def brute_bootstrap_statistic(centered, v_values, kind):
    """Bootstrapped statistic by scaling the centered Gram entrywise and
    running the brute-force scan on it."""
    from episcan import GramMatrix

    v = np.asarray(v_values, dtype=np.float64).reshape(-1)
    scaled = centered.entries * np.outer(v, v)
    g = GramMatrix.from_entries(centered.shape, scaled)
    max_sq, _ = brute_scan_gram(g)
    return np.sqrt(max_sq) if kind == "mean" else max_sq


def loop_lrv(field, weight_of_lag, block, centered_points):
    """Long-run variance by an explicit double loop over block points."""
    shape = field.shape
    p = field.p
    grid = centered_points.reshape(shape.dims + (p,))
    points = list(np.ndindex(*[m - k for k, m in zip(block.lo, block.hi)]))
    offset = block.lo
    acc = np.zeros((p, p))
    for a in points:
        for b in points:
            h = tuple(b[l] - a[l] for l in range(shape.d))
            pa = tuple(offset[l] + a[l] for l in range(shape.d))
            pb = tuple(offset[l] + b[l] for l in range(shape.d))
            acc += weight_of_lag(h) * np.outer(grid[pa], grid[pb])
    acc /= shape.total
    return 0.5 * (acc + acc.T)


def empirical_ks_uniform(pvalues):
    """Kolmogorov-Smirnov distance of a sample from the uniform law."""
    p = np.sort(np.asarray(pvalues, dtype=np.float64))
    n = len(p)
    grid_hi = np.arange(1, n + 1) / n
    grid_lo = np.arange(0, n) / n
    return float(max(np.max(grid_hi - p), np.max(p - grid_lo)))
