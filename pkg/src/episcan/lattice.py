"""Index algebra for d-dimensional lattices.

Lattice points are 1-based, so a block ``(k, m]`` holds the points with
``k[l] < i[l] <= m[l]`` on every axis.  In 0-based array coordinates that
is exactly the slice ``k[l]:m[l]``, which keeps block arithmetic literal.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product
from math import prod
from typing import Iterator

import numpy as np

from .errors import MemoryCapError

# Refusal threshold for dense pair-prefix construction (bytes).
DEFAULT_MEMORY_CAP = 2 * 1024**3


@dataclass(frozen=True)
class LatticeShape:
    """Side lengths (n_1, ..., n_d) of a rectangular lattice."""

    dims: tuple[int, ...]

    def __post_init__(self):
        dims = tuple(int(n) for n in self.dims)
        object.__setattr__(self, "dims", dims)
        if len(dims) < 1:
            raise ValueError("lattice needs at least one axis")
        if any(n < 1 for n in dims):
            raise ValueError(f"all side lengths must be >= 1, got {dims}")
        total = prod(dims)
        if total > np.iinfo(np.int64).max:
            raise ValueError("lattice point count exceeds the index range")

    @property
    def d(self) -> int:
        return len(self.dims)

    @property
    def total(self) -> int:
        """Number of lattice points."""
        return prod(self.dims)


@dataclass(frozen=True)
class Block:
    """Half-open rectangle (lo, hi] of lattice points.

    ``lo`` is the exclusive lower corner (0-based), ``hi`` the inclusive
    upper corner, both of length d with ``0 <= lo < hi`` componentwise.
    """

    lo: tuple[int, ...]
    hi: tuple[int, ...]

    def __post_init__(self):
        lo = tuple(int(v) for v in self.lo)
        hi = tuple(int(v) for v in self.hi)
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        if len(lo) != len(hi):
            raise ValueError("corner vectors must have equal length")
        for axis, (k, m) in enumerate(zip(lo, hi)):
            if k < 0:
                raise ValueError(f"lower corner must be >= 0 on axis {axis}, got {k}")
            if m <= k:
                raise ValueError(f"block is empty on axis {axis}: ({k}, {m}]")

    @property
    def d(self) -> int:
        return len(self.lo)

    @property
    def volume(self) -> int:
        return prod(m - k for k, m in zip(self.lo, self.hi))

    def slices(self) -> tuple[slice, ...]:
        """0-based array slices selecting the block's points."""
        return tuple(slice(k, m) for k, m in zip(self.lo, self.hi))

    def key(self) -> tuple[int, ...]:
        """Concatenated (lo, hi) tuple; the lexicographic tie-break key."""
        return self.lo + self.hi

    def check_inside(self, shape: LatticeShape) -> None:
        if self.d != shape.d:
            raise IndexError(
                f"block dimension {self.d} does not match lattice dimension {shape.d}"
            )
        for axis, (m, n) in enumerate(zip(self.hi, shape.dims)):
            if m > n:
                raise IndexError(
                    f"block upper corner {m} exceeds side length {n} on axis {axis}"
                )

    def contains_point(self, point: tuple[int, ...]) -> bool:
        """Membership of a 1-based lattice point."""
        return all(k < i <= m for k, i, m in zip(self.lo, point, self.hi))


def fractional_block(theta, gamma, shape: LatticeShape) -> Block:
    """Integer block (floor(n*theta), floor(n*gamma)] of a fractional one."""
    theta = tuple(float(t) for t in theta)
    gamma = tuple(float(g) for g in gamma)
    if len(theta) != shape.d or len(gamma) != shape.d:
        raise ValueError("fractional corners must match the lattice dimension")
    for axis, (t, g) in enumerate(zip(theta, gamma)):
        if not (0.0 <= t < g <= 1.0):
            raise ValueError(
                f"fractional block needs 0 <= theta < gamma <= 1 on axis {axis}"
            )
    lo = tuple(int(np.floor(n * t)) for n, t in zip(shape.dims, theta))
    hi = tuple(int(np.floor(n * g)) for n, g in zip(shape.dims, gamma))
    return Block(lo, hi)


def _corner_signs(d: int) -> list[tuple[tuple[int, ...], int]]:
    """The 2^d inclusion-exclusion corners with signs (-1)^(d - sum eps)."""
    out = []
    for eps in product((0, 1), repeat=d):
        sign = 1 if (d - sum(eps)) % 2 == 0 else -1
        out.append((eps, sign))
    return out


def _compensated_cumsum(values: np.ndarray, axis: int) -> np.ndarray:
    """Neumaier-compensated running sum along one axis."""
    moved = np.moveaxis(values, axis, 0)
    out = np.empty_like(moved)
    total = np.zeros(moved.shape[1:], dtype=moved.dtype)
    comp = np.zeros_like(total)
    for t in range(moved.shape[0]):
        x = moved[t]
        s = total + x
        big = np.abs(total) >= np.abs(x)
        comp = comp + np.where(big, (total - s) + x, (x - s) + total)
        total = s
        out[t] = total + comp
    return np.moveaxis(out, 0, axis)


def _padded_prefix(values: np.ndarray, axes: tuple[int, ...], compensated: bool) -> np.ndarray:
    """Cumulative sums along ``axes`` with a zero face on every summed axis."""
    padded_shape = list(values.shape)
    for ax in axes:
        padded_shape[ax] += 1
    out = np.zeros(padded_shape, dtype=np.float64)
    inner = tuple(slice(1, None) if ax in axes else slice(None) for ax in range(values.ndim))
    out[inner] = values
    for ax in axes:
        if compensated:
            out = _compensated_cumsum(out, ax)
        else:
            np.cumsum(out, axis=ax, out=out)
    return out


@dataclass(frozen=True)
class PrefixTensor:
    """Cumulative sums of a lattice field over all boxes (0, m].

    ``values`` has shape (n_1+1, ..., n_d+1, *feature_shape); entry ``m``
    is the field summed over (0, m], and every face with a zero coordinate
    is exactly zero.
    """

    shape: LatticeShape
    values: np.ndarray = field(repr=False)

    @classmethod
    def from_field(cls, values: np.ndarray, shape: LatticeShape | None = None,
                   compensated: bool = False) -> "PrefixTensor":
        values = np.asarray(values, dtype=np.float64)
        if shape is None:
            shape = LatticeShape(values.shape)
        if values.shape[:shape.d] != shape.dims:
            raise ValueError(
                f"field shape {values.shape[:shape.d]} does not match lattice {shape.dims}"
            )
        prefix = _padded_prefix(values, tuple(range(shape.d)), compensated)
        prefix.setflags(write=False)
        return cls(shape, prefix)


def box_sum(t: PrefixTensor, b: Block):
    """Sum of the underlying field over (k, m], by 2^d-corner alternation."""
    b.check_inside(t.shape)
    d = t.shape.d
    acc = None
    for eps, sign in _corner_signs(d):
        corner = tuple(b.hi[l] if eps[l] else b.lo[l] for l in range(d))
        term = t.values[corner]
        acc = sign * term if acc is None else acc + sign * term
    return acc


@dataclass(frozen=True)
class PairPrefixTensor:
    """2d-dimensional cumulative sums of an N x N matrix over index pairs.

    The matrix is viewed as a field over pairs of lattice points (C-order
    flattening); entry (m, m') is its sum over (0, m] x (0, m'].
    """

    shape: LatticeShape
    values: np.ndarray = field(repr=False)

    @classmethod
    def required_bytes(cls, shape: LatticeShape) -> int:
        return 8 * prod(n + 1 for n in shape.dims) ** 2

    @classmethod
    def from_matrix(cls, matrix: np.ndarray, shape: LatticeShape,
                    memory_cap: int = DEFAULT_MEMORY_CAP) -> "PairPrefixTensor":
        need = cls.required_bytes(shape)
        if need > memory_cap:
            raise MemoryCapError(
                f"pair prefix tensor needs {need} bytes, cap is {memory_cap}; "
                "use the tiled scan path for lattices this large"
            )
        matrix = np.asarray(matrix, dtype=np.float64)
        n = shape.total
        if matrix.shape != (n, n):
            raise ValueError(f"matrix must be {n} x {n} for lattice {shape.dims}")
        as_field = matrix.reshape(shape.dims + shape.dims)
        prefix = _padded_prefix(as_field, tuple(range(2 * shape.d)), compensated=False)
        prefix.setflags(write=False)
        return cls(shape, prefix)


def pair_box_sum(t: PairPrefixTensor, b: Block) -> float:
    """Sum of the matrix over (k, m] x (k, m], by 4^d-corner alternation."""
    b.check_inside(t.shape)
    d = t.shape.d
    total = 0.0
    for eps, sign in _corner_signs(2 * d):
        corner = tuple(
            (b.hi[l % d] if eps[l] else b.lo[l % d]) for l in range(2 * d)
        )
        total += sign * t.values[corner]
    return float(total)


def axis_pairs(n: int) -> tuple[np.ndarray, np.ndarray]:
    """All (k, m) with 0 <= k < m <= n, in lexicographic order."""
    k, m = np.meshgrid(np.arange(n), np.arange(n + 1), indexing="ij")
    keep = m > k
    return k[keep].astype(np.intp), m[keep].astype(np.intp)


def enumerate_blocks(shape: LatticeShape,
                     bounds: tuple[int, int] | None = None) -> Iterator[Block]:
    """Yield every block of the lattice in lexicographic (lo, hi) order.

    ``bounds`` = (v_lo, v_hi) keeps only blocks with v_lo <= volume <= v_hi.
    """
    d = shape.d
    lo_ranges = [range(n) for n in shape.dims]
    for lo in product(*lo_ranges):
        hi_ranges = [range(lo[l] + 1, shape.dims[l] + 1) for l in range(d)]
        for hi in product(*hi_ranges):
            block = Block(lo, hi)
            if bounds is not None:
                v = block.volume
                if v < bounds[0] or v > bounds[1]:
                    continue
            yield block
