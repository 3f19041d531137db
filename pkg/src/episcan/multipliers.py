"""Gaussian dependent multiplier fields and their covariance kernels.

A multiplier field has mean 0 and variance 1 at every point, with
covariance ``omega((i - j) / q)`` for a product-form kernel: exponential
for the autoregressive construction, triangular (Bartlett) for the
moving-average one.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from math import exp, floor, sqrt

import numpy as np

from .errors import ConfigError
from .lattice import LatticeShape

KERNEL_AR = "ar"
KERNEL_MA = "ma"


@dataclass(frozen=True)
class KernelSpec:
    """Multiplier covariance kernel: kind ("ar" exponential or "ma"
    Bartlett) and integer bandwidth q >= 1."""

    kind: str
    q: int

    def __post_init__(self):
        if self.kind not in (KERNEL_AR, KERNEL_MA):
            raise ConfigError(f"kernel kind must be 'ar' or 'ma', got {self.kind!r}")
        if int(self.q) < 1:
            raise ConfigError(f"bandwidth must be >= 1, got {self.q}")
        object.__setattr__(self, "q", int(self.q))


def kernel_value(spec: KernelSpec, lag) -> float:
    """Product-form kernel at an integer lag vector."""
    lag = np.atleast_1d(np.asarray(lag, dtype=np.float64))
    if spec.kind == KERNEL_AR:
        per_axis = np.exp(-np.abs(lag) / spec.q)
    else:
        per_axis = np.clip(1.0 - np.abs(lag) / (spec.q + 1), 0.0, None)
    return float(np.prod(per_axis))


@dataclass(frozen=True)
class MultiplierField:
    """One realization of a multiplier field."""

    shape: LatticeShape
    values: np.ndarray = field(repr=False)
    spec: KernelSpec

    @property
    def flat(self) -> np.ndarray:
        return self.values.reshape(-1)


def check_bandwidth(spec: KernelSpec, shape: LatticeShape) -> None:
    """Warn when q is large relative to the lattice; the bootstrap
    calibration assumes the bandwidth grows slower than sqrt(min side)."""
    limit = sqrt(min(shape.dims))
    if spec.q >= limit:
        warnings.warn(
            f"bandwidth q={spec.q} is >= sqrt of the smallest side length "
            f"({limit:.2f}); the bootstrap is calibrated for q = o(sqrt(n))",
            UserWarning,
            stacklevel=2,
        )


def separable_ar_filter(values: np.ndarray, a: float) -> np.ndarray:
    """Stationary first-order autoregression applied along every axis.

    The input must be i.i.d. standard normal; each pass keeps the first
    slice and applies v[t] = a * v[t-1] + sqrt(1 - a^2) * x[t], so the
    output is exactly stationary with unit marginal variance and
    separable correlation a^|h| per axis.
    """
    if not (-1.0 < a < 1.0):
        raise ConfigError(f"autoregression parameter must satisfy |a| < 1, got {a}")
    out = np.array(values, dtype=np.float64, copy=True)
    if a == 0.0:
        return out
    scale = sqrt(1.0 - a * a)
    for axis in range(out.ndim):
        moved = np.moveaxis(out, axis, 0)
        moved[1:] *= scale
        for t in range(1, moved.shape[0]):
            moved[t] += a * moved[t - 1]
    return out


def sample_ar_field(shape: LatticeShape, q: int, rng: np.random.Generator) -> MultiplierField:
    """Exponential-kernel multiplier field.

    Realized by d stationary autoregressive passes with a = exp(-1/q);
    the covariance is exactly the product of exp(-|h_l| / q) over axes,
    with no burn-in transient.
    """
    spec = KernelSpec(KERNEL_AR, q)
    a = exp(-1.0 / spec.q)
    values = separable_ar_filter(rng.standard_normal(shape.dims), a)
    return MultiplierField(shape, values, spec)


def sample_ma_field(shape: LatticeShape, q: int, rng: np.random.Generator) -> MultiplierField:
    """Bartlett-kernel multiplier field.

    Innovations are drawn on the lattice padded by floor(q/2) per side
    and box-filtered per axis; the filter weight makes the per-point
    variance exactly 1.  For odd q the window half-width floor(q/2)
    keeps the window symmetric, so the realized covariance matches the
    Bartlett kernel at effective bandwidth 2*floor(q/2).
    """
    spec = KernelSpec(KERNEL_MA, q)
    half = floor(spec.q / 2)
    window = 2 * half + 1
    padded_dims = tuple(n + 2 * half for n in shape.dims)
    values = rng.standard_normal(padded_dims)
    for axis in range(len(shape.dims)):
        moved = np.moveaxis(values, axis, 0)
        csum = np.concatenate(
            [np.zeros((1,) + moved.shape[1:]), np.cumsum(moved, axis=0)], axis=0
        )
        moved = csum[window:] - csum[:-window]
        values = np.moveaxis(moved, 0, axis)
    values *= window ** (-shape.d / 2.0)
    return MultiplierField(shape, np.ascontiguousarray(values), spec)


def sample_multiplier_field(spec: KernelSpec, shape: LatticeShape,
                            rng: np.random.Generator) -> MultiplierField:
    if spec.kind == KERNEL_AR:
        return sample_ar_field(shape, spec.q, rng)
    return sample_ma_field(shape, spec.q, rng)


def empirical_multiplier_cov(spec: KernelSpec, shape: LatticeShape, lag,
                             replicates: int, rng: np.random.Generator) -> float:
    """Average of V(i) * V(i + lag) over positions and replicates."""
    if replicates < 2:
        raise ConfigError("need at least 2 replicates")
    lag = tuple(int(h) for h in np.atleast_1d(lag))
    if len(lag) != shape.d:
        raise ConfigError(f"lag must have {shape.d} components, got {len(lag)}")
    for axis, (h, n) in enumerate(zip(lag, shape.dims)):
        if abs(h) >= n:
            raise ConfigError(f"lag {h} on axis {axis} exceeds the lattice side {n}")
    a_slices = tuple(slice(max(0, -h), n - max(0, h)) for h, n in zip(lag, shape.dims))
    b_slices = tuple(slice(max(0, h), n + min(0, h)) for h, n in zip(lag, shape.dims))
    acc = 0.0
    for _ in range(replicates):
        v = sample_multiplier_field(spec, shape, rng).values
        acc += float((v[a_slices] * v[b_slices]).mean())
    return acc / replicates


__all__ = [
    "KernelSpec",
    "MultiplierField",
    "kernel_value",
    "check_bandwidth",
    "separable_ar_filter",
    "sample_ar_field",
    "sample_ma_field",
    "sample_multiplier_field",
    "empirical_multiplier_cov",
    "KERNEL_AR",
    "KERNEL_MA",
]
