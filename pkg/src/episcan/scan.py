"""Epidemic-change scan over all rectangular blocks.

For a block B with volume share lam = vol(B)/N, the centered block score is

    Q(B) = P(B, B) - 2 * lam * P(B, all) + lam^2 * P(all, all)

with P(A, C) the Gram mass over A x C.  The scan maximizes Q(B)/N over
every block; the mean-change statistic is the square root of that
maximum and the distribution-change statistic is the maximum itself.

The fast path evaluates every block at once from a pair-prefix tensor
via corner gathers; a tiled sweep serves as fallback when the tensor
would exceed the memory cap.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from itertools import product
from functools import lru_cache
from math import prod, sqrt

import numpy as np

from .errors import ConfigError, MemoryCapError
from .gram import GramMatrix, MeanAssignment, ObservationField
from .lattice import (
    DEFAULT_MEMORY_CAP,
    Block,
    LatticeShape,
    PairPrefixTensor,
    PrefixTensor,
    _padded_prefix,
    axis_pairs,
    box_sum,
)
from .multipliers import KernelSpec, kernel_value


# blocks whose scores agree with the maximum to this relative tolerance
# count as ties; mathematically equal maxima (e.g. a block and its
# complement in one dimension) otherwise order unpredictably across
# summation paths
TIE_RTOL = 1e-12


def _tie_cutoff(best: float) -> float:
    return best - TIE_RTOL * max(1.0, abs(best))


@dataclass(frozen=True)
class ScanResult:
    """Outcome of a block scan.

    ``max_squared`` is max_B Q(B)/N; ``statistic`` is its square root for
    the mean scan ("mean") and the value itself for the distribution scan
    ("cvm").  ``argmax`` is the attaining block, ties broken toward the
    lexicographically smallest (lo, hi).
    """

    kind: str
    max_squared: float
    statistic: float
    argmax: Block
    n_blocks_evaluated: int


def _statistic_from_max(kind: str, max_squared: float) -> float:
    if kind == "mean":
        return sqrt(max_squared)
    if kind == "cvm":
        return max_squared
    raise ConfigError(f"unknown statistic kind {kind!r}")


class _ScanPlan:
    """Shape-dependent precomputation shared by every scan and replicate."""

    def __init__(self, dims: tuple[int, ...]):
        self.dims = dims
        d = len(dims)
        self.d = d
        self.total = prod(dims)
        self.pair_k = []
        self.pair_m = []
        for n in dims:
            k, m = axis_pairs(n)
            self.pair_k.append(k)
            self.pair_m.append(m)
        self.pair_counts = tuple(len(k) for k in self.pair_k)
        # block volumes and volume shares, one entry per block
        vol = np.ones((), dtype=np.int64)
        for k, m in zip(self.pair_k, self.pair_m):
            vol = np.multiply.outer(vol, (m - k).astype(np.int64))
        self.volumes = vol
        self.lam = vol.astype(np.float64) / self.total
        # corner gathers for the pair-prefix tensor, deduplicated by the
        # (i, j) swap symmetry of a symmetric matrix
        pad_dims = tuple(n + 1 for n in dims)
        strides = np.empty(2 * d, dtype=np.int64)
        acc = 1
        for t in range(2 * d - 1, -1, -1):
            strides[t] = acc
            acc *= pad_dims[t % d]
        patterns: dict[tuple[int, ...], float] = {}
        for eps in product((0, 1), repeat=2 * d):
            swapped = eps[d:] + eps[:d]
            canon = min(eps, swapped)
            sign = 1.0 if sum(eps) % 2 == 0 else -1.0
            patterns[canon] = patterns.get(canon, 0.0) + sign
        self.pair_gathers: list[tuple[np.ndarray, float]] = []
        for eps, coef in patterns.items():
            if coef == 0.0:
                continue
            idx = np.zeros((), dtype=np.int64)
            for l in range(d):
                ci = self.pair_m[l] if eps[l] else self.pair_k[l]
                cj = self.pair_m[l] if eps[d + l] else self.pair_k[l]
                contrib = ci * strides[l] + cj * strides[d + l]
                idx = np.add.outer(idx, contrib)
            self.pair_gathers.append((np.ascontiguousarray(idx.reshape(-1)), coef))

    def box_all_blocks(self, prefix: np.ndarray) -> np.ndarray:
        """Box sums of a padded d-dim prefix for every block at once.

        Trailing feature axes are preserved.
        """
        out = prefix
        for l in range(self.d):
            out = np.take(out, self.pair_m[l], axis=l) - np.take(out, self.pair_k[l], axis=l)
        return out

    def block_at(self, flat_index: int) -> Block:
        multi = np.unravel_index(flat_index, self.pair_counts)
        lo = tuple(int(self.pair_k[l][p]) for l, p in enumerate(multi))
        hi = tuple(int(self.pair_m[l][p]) for l, p in enumerate(multi))
        return Block(lo, hi)

    def argmin_lex(self, flat_candidates: np.ndarray) -> Block:
        """Lexicographically smallest (lo, hi) among candidate blocks."""
        multi = np.unravel_index(flat_candidates, self.pair_counts)
        cols = [self.pair_k[l][p] for l, p in enumerate(multi)]
        cols += [self.pair_m[l][p] for l, p in enumerate(multi)]
        order = np.lexsort(tuple(cols[::-1]))
        return self.block_at(int(flat_candidates[order[0]]))


@lru_cache(maxsize=8)
def _plan_for(dims: tuple[int, ...]) -> _ScanPlan:
    return _ScanPlan(dims)


def _volume_mask(plan: _ScanPlan, bounds: tuple[float, float] | None) -> np.ndarray | None:
    if bounds is None:
        return None
    v_lo, v_hi = bounds
    mask = (plan.volumes >= v_lo) & (plan.volumes <= v_hi)
    if not mask.any():
        raise ConfigError(f"no block has volume within {bounds}")
    return mask


class GramScanner:
    """Reusable scan engine over a fixed lattice shape.

    Holds the pair-prefix buffer so that repeated scans (one per bootstrap
    replicate) only pay for cumulative sums and gathers.
    """

    def __init__(self, shape: LatticeShape,
                 volume_bounds: tuple[float, float] | None = None,
                 memory_cap: int = DEFAULT_MEMORY_CAP):
        need = PairPrefixTensor.required_bytes(shape)
        if need > memory_cap:
            raise MemoryCapError(
                f"pair prefix tensor needs {need} bytes, cap is {memory_cap}"
            )
        self.shape = shape
        self.plan = _plan_for(shape.dims)
        self.mask = _volume_mask(self.plan, volume_bounds)
        d = shape.d
        pad_dims = tuple(n + 1 for n in shape.dims)
        self._pair_pad = np.zeros(pad_dims + pad_dims, dtype=np.float64)
        self._pair_inner = (slice(1, None),) * (2 * d)
        self._row_pad = np.zeros(pad_dims, dtype=np.float64)
        self._row_inner = (slice(1, None),) * d
        n_blocks = prod(self.plan.pair_counts)
        self._gather_buf = np.empty(n_blocks, dtype=np.float64)
        self._pbb = np.empty(n_blocks, dtype=np.float64)

    @property
    def n_blocks(self) -> int:
        if self.mask is None:
            return prod(self.plan.pair_counts)
        return int(self.mask.sum())

    def scan_matrix(self, entries: np.ndarray, row_sums: np.ndarray,
                    total: float, kind: str) -> ScanResult:
        plan = self.plan
        dims = self.shape.dims
        d = self.shape.d
        # pair-prefix rebuild (faces stay zero across reuses)
        pad = self._pair_pad
        pad[self._pair_inner] = entries.reshape(dims + dims)
        for ax in range(2 * d):
            np.cumsum(pad, axis=ax, out=pad)
        flat = pad.reshape(-1)
        pbb = self._pbb
        pbb[:] = 0.0
        buf = self._gather_buf
        for idx, coef in plan.pair_gathers:
            np.take(flat, idx, out=buf)
            if coef == 1.0:
                pbb += buf
            elif coef == -1.0:
                pbb -= buf
            else:
                pbb += coef * buf
        pbb = pbb.reshape(plan.pair_counts)
        # row-sum prefix and per-block box sums
        rpad = self._row_pad
        rpad[self._row_inner] = row_sums.reshape(dims)
        for ax in range(d):
            np.cumsum(rpad, axis=ax, out=rpad)
        pball = plan.box_all_blocks(rpad)
        lam = plan.lam
        q = pbb - lam * (2.0 * pball - lam * total)
        if self.mask is not None:
            q = np.where(self.mask, q, -np.inf)
        flat_q = q.reshape(-1)
        best = int(np.argmax(flat_q))
        best_val = float(flat_q[best])
        candidates = np.flatnonzero(flat_q >= _tie_cutoff(best_val))
        if len(candidates) > 1:
            argmax = plan.argmin_lex(candidates)
        else:
            argmax = plan.block_at(best)
        max_squared = max(best_val, 0.0) / plan.total
        return ScanResult(kind, max_squared, _statistic_from_max(kind, max_squared),
                          argmax, self.n_blocks)

    def scan_gram(self, g: GramMatrix, kind: str) -> ScanResult:
        return self.scan_matrix(g.entries, g.row_sums, g.total, kind)


def _tiled_scan_matrix(shape: LatticeShape, entries: np.ndarray, row_sums: np.ndarray,
                       total: float, kind: str,
                       volume_bounds: tuple[float, float] | None) -> ScanResult:
    """Direct block sweep: lower corners outer, upper corners inner, with
    running row-restricted sums along the last axis.  Quadratic in the
    number of blocks but needs no pair-prefix tensor."""
    d = shape.d
    n_total = shape.total
    dims = shape.dims
    flat_ids = np.arange(n_total).reshape(dims)
    row_prefix = _padded_prefix(row_sums.reshape(dims), tuple(range(d)), compensated=False)
    pt = PrefixTensor(shape, row_prefix)
    best_val = -np.inf
    ties: list[tuple[float, Block]] = []
    n_eval = 0
    for lo in product(*[range(n) for n in dims]):
        outer_ranges = [range(lo[l] + 1, dims[l] + 1) for l in range(d - 1)]
        for hi_outer in product(*outer_ranges):
            r = np.zeros(n_total, dtype=np.float64)
            pbb = 0.0
            for m_last in range(lo[-1] + 1, dims[-1] + 1):
                hi = hi_outer + (m_last,)
                slab_slices = tuple(
                    slice(lo[l], hi[l]) for l in range(d - 1)
                ) + (slice(m_last - 1, m_last),)
                slab = flat_ids[slab_slices].reshape(-1)
                pbb += 2.0 * float(r[slab].sum()) + float(entries[np.ix_(slab, slab)].sum())
                r[:] += entries[slab].sum(axis=0)
                block = Block(lo, hi)
                vol = block.volume
                if volume_bounds is not None and not (
                    volume_bounds[0] <= vol <= volume_bounds[1]
                ):
                    continue
                n_eval += 1
                lam = vol / n_total
                q = pbb - lam * (2.0 * float(box_sum(pt, block)) - lam * total)
                if q > best_val:
                    best_val = q
                    cut = _tie_cutoff(best_val)
                    ties = [t for t in ties if t[0] >= cut]
                if q >= _tie_cutoff(best_val):
                    ties.append((q, block))
    if not ties:
        raise ConfigError(f"no block has volume within {volume_bounds}")
    cut = _tie_cutoff(best_val)
    best_block = min((b for v, b in ties if v >= cut), key=lambda b: b.key())
    max_squared = max(best_val, 0.0) / n_total
    return ScanResult(kind, max_squared, _statistic_from_max(kind, max_squared),
                      best_block, n_eval)


def scan_gram(g: GramMatrix, *, kind: str = "cvm",
              volume_bounds: tuple[float, float] | None = None,
              memory_cap: int = DEFAULT_MEMORY_CAP,
              allow_fallback: bool = True) -> ScanResult:
    """Maximize the centered block score over every rectangle of the lattice.

    Falls back to the tiled sweep (with a performance warning) when the
    pair-prefix tensor would exceed ``memory_cap``; set
    ``allow_fallback=False`` to fail instead.
    """
    try:
        scanner = GramScanner(g.shape, volume_bounds, memory_cap)
    except MemoryCapError:
        if not allow_fallback:
            raise
        warnings.warn(
            "pair-prefix tensor exceeds the memory cap; using the tiled scan, "
            "which is quadratic in the number of blocks",
            RuntimeWarning,
            stacklevel=2,
        )
        return _tiled_scan_matrix(g.shape, g.entries, g.row_sums, g.total,
                                  kind, volume_bounds)
    return scanner.scan_gram(g, kind)


def scan_mean_change(field_obs: ObservationField, *,
                     volume_bounds: tuple[float, float] | None = None) -> ScanResult:
    """Mean-change scan from vector prefix sums, without a Gram matrix."""
    shape = field_obs.shape
    plan = _plan_for(shape.dims)
    mask = _volume_mask(plan, volume_bounds)
    prefix = _padded_prefix(field_obs.data, tuple(range(shape.d)), compensated=False)
    sums = plan.box_all_blocks(prefix)  # (..., p) block sums
    total_vec = field_obs.points().sum(axis=0)
    lam = plan.lam[..., np.newaxis]
    q = np.square(sums - lam * total_vec).sum(axis=-1)
    if mask is not None:
        q = np.where(mask, q, -np.inf)
    flat_q = q.reshape(-1)
    best = int(np.argmax(flat_q))
    best_val = float(flat_q[best])
    candidates = np.flatnonzero(flat_q >= _tie_cutoff(best_val))
    argmax = plan.argmin_lex(candidates) if len(candidates) > 1 else plan.block_at(best)
    n_eval = prod(plan.pair_counts) if mask is None else int(mask.sum())
    max_squared = max(best_val, 0.0) / plan.total
    return ScanResult("mean", max_squared, _statistic_from_max("mean", max_squared),
                      argmax, n_eval)


def evaluate_block_gram(g: GramMatrix, block: Block) -> float:
    """Q(B)/N for one block, straight from the Gram entries."""
    block.check_inside(g.shape)
    flat_ids = np.arange(g.shape.total).reshape(g.shape.dims)
    idx = flat_ids[block.slices()].reshape(-1)
    pbb = float(g.entries[np.ix_(idx, idx)].sum())
    pball = float(g.row_sums[idx].sum())
    lam = block.volume / g.shape.total
    q = pbb - 2.0 * lam * pball + lam * lam * g.total
    return q / g.shape.total


def estimate_change_set(result: ScanResult) -> Block:
    """The argmax block of a completed scan, the change-set estimate."""
    return result.argmax


def _centered_points(field_obs: ObservationField, assignment: MeanAssignment) -> np.ndarray:
    labels = assignment.labels(field_obs.shape)
    pts = field_obs.points()
    n_groups = int(labels.max()) + 1
    centered = np.empty_like(pts)
    for a in range(n_groups):
        sel = labels == a
        centered[sel] = pts[sel] - pts[sel].mean(axis=0)
    return centered


def _lrv_weighted(field_obs: ObservationField, weight_of_lag, block: Block,
                  assignment: MeanAssignment) -> np.ndarray:
    shape = field_obs.shape
    block.check_inside(shape)
    if block.volume < 2:
        raise ConfigError("long-run variance needs a block with at least 2 points")
    centered = _centered_points(field_obs, assignment).reshape(
        shape.dims + (field_obs.p,)
    )
    sub = centered[block.slices()]
    lens = tuple(m - k for k, m in zip(block.lo, block.hi))
    p = field_obs.p
    acc = np.zeros((p, p), dtype=np.float64)
    for h in product(*[range(-(L - 1), L) for L in lens]):
        w = float(weight_of_lag(h))
        if w == 0.0:
            continue
        a_slices = tuple(
            slice(max(0, -h[l]), lens[l] - max(0, h[l])) for l in range(len(lens))
        )
        b_slices = tuple(
            slice(max(0, h[l]), lens[l] + min(0, h[l])) for l in range(len(lens))
        )
        a = sub[a_slices].reshape(-1, p)
        b = sub[b_slices].reshape(-1, p)
        acc += w * (a.T @ b)
    acc /= shape.total
    return 0.5 * (acc + acc.T)


def lrv_estimate(field_obs: ObservationField, kernel: KernelSpec, block: Block,
                 assignment: MeanAssignment | None = None) -> np.ndarray:
    """Kernel-weighted sum of empirical autocovariances over a block.

    Lags run over every difference of block points; the weight at lag h
    is the multiplier covariance kernel value.  Normalization is by the
    total lattice size, so the full-lattice block targets the long-run
    variance itself and a sub-block scales it by the volume share.
    """
    if assignment is None:
        assignment = MeanAssignment.global_mean()
    return _lrv_weighted(field_obs, lambda h: kernel_value(kernel, h), block, assignment)


__all__ = [
    "ScanResult",
    "GramScanner",
    "scan_gram",
    "scan_mean_change",
    "evaluate_block_gram",
    "estimate_change_set",
    "lrv_estimate",
]
