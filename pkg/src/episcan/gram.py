"""Inner products between lattice observations.

Two embeddings are supported: the plain Euclidean dot product, and the
weighted-indicator embedding whose Gram matrix has the closed form
``survival(componentwise max)`` under a product-form weight density.  The
second turns a change-in-distribution problem into a change-in-mean
problem without any quadrature.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

import numpy as np
from scipy.special import ndtr

from .errors import ConfigError
from .lattice import Block, LatticeShape


@dataclass(frozen=True)
class ObservationField:
    """Dense field of p-dimensional observations on a lattice.

    ``data`` has shape (n_1, ..., n_d, p) and must be finite everywhere.
    """

    shape: LatticeShape
    data: np.ndarray = field(repr=False)

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim != self.shape.d + 1:
            raise ValueError(
                f"data must have shape {self.shape.dims} + (p,), got {data.shape}"
            )
        if data.shape[:-1] != self.shape.dims:
            raise ValueError(
                f"data lattice axes {data.shape[:-1]} do not match {self.shape.dims}"
            )
        if not np.all(np.isfinite(data)):
            raise ValueError("observations must be finite")
        object.__setattr__(self, "data", data)

    @classmethod
    def from_array(cls, values: np.ndarray, d: int | None = None) -> "ObservationField":
        """Wrap an array; without ``d`` every axis is a lattice axis (p=1)."""
        values = np.asarray(values, dtype=np.float64)
        if d is None:
            d = values.ndim
        if values.ndim == d:
            values = values[..., np.newaxis]
        elif values.ndim != d + 1:
            raise ValueError(f"array with {values.ndim} axes cannot host a {d}-d lattice")
        return cls(LatticeShape(values.shape[:-1]), values)

    @property
    def p(self) -> int:
        return self.data.shape[-1]

    def points(self) -> np.ndarray:
        """Observations flattened to (N, p) in C order."""
        return self.data.reshape(self.shape.total, self.p)


@dataclass(frozen=True)
class GaussianWeight:
    """Normal density weight on one coordinate."""

    location: float = 100.0
    scale: float = 1000.0

    def __post_init__(self):
        if not (self.scale > 0):
            raise ConfigError(f"gaussian weight scale must be > 0, got {self.scale}")

    def survival(self, t: np.ndarray) -> np.ndarray:
        return ndtr((self.location - np.asarray(t, dtype=np.float64)) / self.scale)


@dataclass(frozen=True)
class UniformWeight:
    """Uniform density weight on one coordinate."""

    lower: float = 0.0
    upper: float = 1.0

    def __post_init__(self):
        if not (self.lower < self.upper):
            raise ConfigError(
                f"uniform weight needs lower < upper, got ({self.lower}, {self.upper})"
            )

    def survival(self, t: np.ndarray) -> np.ndarray:
        t = np.asarray(t, dtype=np.float64)
        width = self.upper - self.lower
        return np.clip((self.upper - t) / width, 0.0, 1.0)


WeightComponent = Union[GaussianWeight, UniformWeight]


@dataclass(frozen=True)
class WeightSpec:
    """Product-form weight: one density component per observation coordinate."""

    components: tuple[WeightComponent, ...]

    def __post_init__(self):
        if len(self.components) < 1:
            raise ConfigError("weight needs at least one component")

    @classmethod
    def gaussian(cls, location: float = 100.0, scale: float = 1000.0, p: int = 1) -> "WeightSpec":
        return cls((GaussianWeight(location, scale),) * p)

    @classmethod
    def uniform(cls, lower: float, upper: float, p: int = 1) -> "WeightSpec":
        return cls((UniformWeight(lower, upper),) * p)

    @property
    def p(self) -> int:
        return len(self.components)

    def for_dim(self, p: int) -> "WeightSpec":
        """Broadcast a single component to p coordinates, or validate p."""
        if self.p == p:
            return self
        if self.p == 1:
            return WeightSpec(self.components * p)
        raise ConfigError(f"weight has {self.p} components but observations have {p}")

    def survival(self, t: np.ndarray) -> np.ndarray:
        """Upper-tail weight mass above ``t``, coordinatewise product.

        ``t`` has shape (..., p); the result drops the last axis.
        """
        t = np.asarray(t, dtype=np.float64)
        if t.shape[-1] != self.p:
            raise ConfigError(f"point dimension {t.shape[-1]} != weight dimension {self.p}")
        out = self.components[0].survival(t[..., 0])
        for l in range(1, self.p):
            out = out * self.components[l].survival(t[..., l])
        return out


def weight_survival(w: WeightSpec, t) -> float:
    """Weight mass on {s >= t} for a single p-vector ``t``."""
    t = np.atleast_1d(np.asarray(t, dtype=np.float64))
    return float(w.survival(t))


@dataclass(frozen=True)
class GramMatrix:
    """Symmetric matrix of pairwise inner products, plus marginal sums."""

    shape: LatticeShape
    entries: np.ndarray = field(repr=False)
    row_sums: np.ndarray = field(repr=False)
    total: float

    @classmethod
    def from_entries(cls, shape: LatticeShape, entries: np.ndarray) -> "GramMatrix":
        entries = np.ascontiguousarray(entries, dtype=np.float64)
        n = shape.total
        if entries.shape != (n, n):
            raise ValueError(f"gram must be {n} x {n} for lattice {shape.dims}")
        row_sums = entries.sum(axis=1)
        return cls(shape, entries, row_sums, float(row_sums.sum()))

    @property
    def n(self) -> int:
        return self.entries.shape[0]


def gram_indicator_cvm(field_obs: ObservationField, w: WeightSpec,
                       row_chunk: int = 512) -> GramMatrix:
    """Gram matrix of the weighted-indicator embedding.

    Entry (i, j) is the weight mass above ``max(X_i, X_j)`` taken
    componentwise, computed in row chunks to bound peak memory.
    """
    w = w.for_dim(field_obs.p)
    pts = field_obs.points()
    n = pts.shape[0]
    out = np.empty((n, n), dtype=np.float64)
    for start in range(0, n, row_chunk):
        stop = min(start + row_chunk, n)
        pairwise_max = np.maximum(pts[start:stop, None, :], pts[None, :, :])
        out[start:stop] = w.survival(pairwise_max)
    # exact symmetry: entries were computed once per ordered pair
    out = np.triu(out) + np.triu(out, 1).T
    return GramMatrix.from_entries(field_obs.shape, out)


def gram_euclidean(field_obs: ObservationField) -> GramMatrix:
    """Gram matrix of the raw observations under the dot product."""
    pts = field_obs.points()
    out = pts @ pts.T
    out = np.triu(out) + np.triu(out, 1).T
    return GramMatrix.from_entries(field_obs.shape, out)


@dataclass(frozen=True)
class MeanAssignment:
    """How each lattice point is centered: one global group, or the
    estimated change block versus its complement."""

    kind: str  # "global" | "two_group"
    block: Block | None = None

    def __post_init__(self):
        if self.kind not in ("global", "two_group"):
            raise ConfigError(f"unknown mean assignment kind {self.kind!r}")
        if self.kind == "two_group" and self.block is None:
            raise ConfigError("two-group assignment needs a block")

    @classmethod
    def global_mean(cls) -> "MeanAssignment":
        return cls("global")

    @classmethod
    def two_group(cls, block: Block) -> "MeanAssignment":
        return cls("two_group", block)

    def labels(self, shape: LatticeShape) -> np.ndarray:
        """Group index per lattice point (flat C order): 0 outside, 1 inside."""
        if self.kind == "global":
            return np.zeros(shape.total, dtype=np.intp)
        self.block.check_inside(shape)
        mask = np.zeros(shape.dims, dtype=bool)
        mask[self.block.slices()] = True
        labels = mask.reshape(-1).astype(np.intp)
        if labels.all():
            raise ConfigError("change block covers the whole lattice; complement is empty")
        return labels


def center_gram(g: GramMatrix, assignment: MeanAssignment) -> GramMatrix:
    """Gram matrix of the observations after subtracting group means.

    Entry (i, j) becomes G_ij minus the mean of G_i,. over j's group,
    minus the mean of G_.,j over i's group, plus the mean over both
    groups.  Group means are precomputed per index, never per entry.
    """
    labels = assignment.labels(g.shape)
    n_groups = int(labels.max()) + 1
    counts = np.bincount(labels, minlength=n_groups).astype(np.float64)
    if np.any(counts == 0):
        raise ConfigError("every centering group must be nonempty")
    # row_group_mean[i, a] = mean of G[i, j] over j in group a
    row_group_sum = np.empty((g.n, n_groups), dtype=np.float64)
    for a in range(n_groups):
        row_group_sum[:, a] = g.entries[:, labels == a].sum(axis=1)
    row_group_mean = row_group_sum / counts
    # group_pair_mean[a, b] = mean of G over group a x group b
    group_pair_mean = np.empty((n_groups, n_groups), dtype=np.float64)
    for a in range(n_groups):
        group_pair_mean[a] = row_group_sum[labels == a].sum(axis=0) / (counts[a] * counts)
    # enforce exact symmetry of the result
    group_pair_mean = 0.5 * (group_pair_mean + group_pair_mean.T)
    centered = (
        g.entries
        - row_group_mean[:, labels]
        - row_group_mean[:, labels].T
        + group_pair_mean[np.ix_(labels, labels)]
    )
    # subtraction order differs across the two triangles; averaging the
    # two roundings restores exact symmetry
    centered = 0.5 * (centered + centered.T)
    return GramMatrix.from_entries(g.shape, centered)
