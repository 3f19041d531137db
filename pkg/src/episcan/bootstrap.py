"""Dependent wild bootstrap for the block scan statistics.

Each replicate multiplies the centered observations pointwise by a
Gaussian dependent multiplier field and recomputes the scan statistic;
the collection of replicate statistics calibrates the critical value as
a sample quantile.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from math import ceil

import numpy as np

from .errors import ConfigError
from .gram import (
    GramMatrix,
    MeanAssignment,
    ObservationField,
    WeightSpec,
    center_gram,
    gram_euclidean,
    gram_indicator_cvm,
)
from .lattice import DEFAULT_MEMORY_CAP, Block
from .multipliers import (
    KernelSpec,
    MultiplierField,
    check_bandwidth,
    sample_multiplier_field,
)
from .scan import GramScanner, scan_gram

STAT_CVM = "cvm"
STAT_MEAN = "mean"
MU_GLOBAL = "global"
MU_ADAPTED = "adapted"


@dataclass(frozen=True)
class TestConfig:
    """Everything needed to run one test: statistic kind, multiplier
    kernel, replicate count, level, mean estimator and master seed."""

    __test__ = False  # not a pytest class, despite the name

    statistic: str = STAT_CVM
    kernel: KernelSpec = KernelSpec("ar", 6)
    n_bootstrap: int = 199
    alpha: float = 0.05
    mean_estimator: str = MU_GLOBAL
    weight: WeightSpec | None = None
    size_bounds: tuple[float, float] | None = None
    seed: int = 0
    keep_bootstrap: bool = False

    def __post_init__(self):
        if self.statistic not in (STAT_CVM, STAT_MEAN):
            raise ConfigError(f"statistic must be 'cvm' or 'mean', got {self.statistic!r}")
        if self.mean_estimator not in (MU_GLOBAL, MU_ADAPTED):
            raise ConfigError(
                f"mean estimator must be 'global' or 'adapted', got {self.mean_estimator!r}"
            )
        if int(self.n_bootstrap) < 1:
            raise ConfigError(f"need at least one bootstrap replicate, got {self.n_bootstrap}")
        object.__setattr__(self, "n_bootstrap", int(self.n_bootstrap))
        if not (0.0 < self.alpha < 1.0):
            raise ConfigError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.size_bounds is not None:
            eps1, eps2 = self.size_bounds
            if not (eps1 >= 0.0 and eps2 >= 0.0 and eps1 + eps2 < 1.0):
                raise ConfigError(
                    f"size bounds need eps1, eps2 >= 0 and eps1 + eps2 < 1, got {self.size_bounds}"
                )

    def resolve_weight(self, p: int) -> WeightSpec | None:
        if self.statistic != STAT_CVM:
            return None
        base = self.weight if self.weight is not None else WeightSpec.gaussian()
        return base.for_dim(p)


@dataclass(frozen=True)
class TestReport:
    """Full outcome of one test run, reproducible from the config echo."""

    __test__ = False  # not a pytest class, despite the name

    statistic: float
    statistic_kind: str
    change_block: Block
    threshold: float
    alpha: float
    p_value: float
    reject: bool
    degenerate: bool
    n_bootstrap: int
    kernel: KernelSpec
    mean_estimator: str
    weight: WeightSpec | None
    seed: int
    runtime_ms: float
    bootstrap_sample: np.ndarray | None = field(default=None, repr=False)

    @property
    def decision(self) -> str:
        return "reject" if self.reject else "retain"


def bootstrap_quantile(values, alpha: float) -> float:
    """Upper sample quantile: the ceil((1 - alpha) * K)-th ascending
    order statistic (1-based)."""
    values = np.asarray(values, dtype=np.float64)
    if values.size < 1:
        raise ConfigError("quantile of an empty bootstrap sample")
    if not (0.0 < alpha < 1.0):
        raise ConfigError(f"alpha must lie in (0, 1), got {alpha}")
    rank = ceil((1.0 - alpha) * values.size)
    return float(np.sort(values, kind="stable")[rank - 1])


def _volume_bounds(size_bounds: tuple[float, float] | None,
                   total: int) -> tuple[float, float] | None:
    if size_bounds is None:
        return None
    eps1, eps2 = size_bounds
    return (eps1 * total, (1.0 - eps2) * total)


def _replicate_statistic(scanner: GramScanner, centered: GramMatrix,
                         v_flat: np.ndarray, kind: str,
                         scaled_buf: np.ndarray) -> float:
    """Scan statistic of the multiplier-scaled centered Gram."""
    np.multiply(centered.entries, v_flat[:, None], out=scaled_buf)
    scaled_buf *= v_flat[None, :]
    row = v_flat * (centered.entries @ v_flat)
    total = float(row.sum())
    result = scanner.scan_matrix(scaled_buf, row, total, kind)
    return result.statistic


def bootstrap_statistic(centered: GramMatrix, v: MultiplierField,
                        kind: str = STAT_CVM,
                        size_bounds: tuple[float, float] | None = None,
                        memory_cap: int = DEFAULT_MEMORY_CAP) -> float:
    """One bootstrapped scan statistic from a centered Gram matrix and a
    multiplier field realization."""
    if v.shape != centered.shape:
        raise ConfigError(
            f"multiplier shape {v.shape.dims} != gram shape {centered.shape.dims}"
        )
    v_flat = v.flat
    scaled = centered.entries * np.outer(v_flat, v_flat)
    row = v_flat * (centered.entries @ v_flat)
    g = GramMatrix(centered.shape, scaled, row, float(row.sum()))
    result = scan_gram(g, kind=kind,
                       volume_bounds=_volume_bounds(size_bounds, centered.shape.total),
                       memory_cap=memory_cap)
    return result.statistic


def build_gram(field_obs: ObservationField, cfg: TestConfig) -> GramMatrix:
    if cfg.statistic == STAT_CVM:
        return gram_indicator_cvm(field_obs, cfg.resolve_weight(field_obs.p))
    return gram_euclidean(field_obs)


def run_test(field_obs: ObservationField, cfg: TestConfig,
             memory_cap: int = DEFAULT_MEMORY_CAP) -> TestReport:
    """Full pipeline: scan, change-set estimate, centering, K bootstrap
    replicates, quantile threshold, p-value and decision.

    Replicate l draws its multipliers from an independent stream derived
    from (seed, l), so the report is bit-reproducible for a fixed config
    regardless of execution order.
    """
    t0 = time.perf_counter()
    check_bandwidth(cfg.kernel, field_obs.shape)
    gram = build_gram(field_obs, cfg)
    bounds = _volume_bounds(cfg.size_bounds, field_obs.shape.total)

    scan_result = scan_gram(gram, kind=cfg.statistic, volume_bounds=bounds,
                            memory_cap=memory_cap)
    statistic = scan_result.statistic
    change_block = scan_result.argmax

    if cfg.mean_estimator == MU_ADAPTED:
        assignment = MeanAssignment.two_group(change_block)
    else:
        assignment = MeanAssignment.global_mean()
    centered = center_gram(gram, assignment)

    # constant data leaves nothing after centering; T >= q* would then
    # compare roundoff noise, so the decision is forced to retain
    scale = max(1.0, float(np.abs(gram.entries).max()))
    if float(np.abs(centered.entries).max()) <= 1e-12 * scale:
        runtime_ms = (time.perf_counter() - t0) * 1000.0
        sample = np.zeros(cfg.n_bootstrap, dtype=np.float64)
        return TestReport(
            statistic=0.0,
            statistic_kind=cfg.statistic,
            change_block=change_block,
            threshold=0.0,
            alpha=cfg.alpha,
            p_value=1.0,
            reject=False,
            degenerate=True,
            n_bootstrap=cfg.n_bootstrap,
            kernel=cfg.kernel,
            mean_estimator=cfg.mean_estimator,
            weight=cfg.resolve_weight(field_obs.p),
            seed=cfg.seed,
            runtime_ms=runtime_ms,
            bootstrap_sample=sample if cfg.keep_bootstrap else None,
        )

    try:
        scanner = GramScanner(field_obs.shape, bounds, memory_cap)
        scaled_buf = np.empty_like(centered.entries)
    except MemoryError:
        scanner = None
        scaled_buf = None

    seed_root = np.random.SeedSequence(cfg.seed)
    streams = seed_root.spawn(cfg.n_bootstrap)
    sample = np.empty(cfg.n_bootstrap, dtype=np.float64)
    for l in range(cfg.n_bootstrap):
        rng = np.random.Generator(np.random.PCG64(streams[l]))
        v = sample_multiplier_field(cfg.kernel, field_obs.shape, rng)
        if scanner is not None:
            sample[l] = _replicate_statistic(scanner, centered, v.flat,
                                             cfg.statistic, scaled_buf)
        else:
            sample[l] = bootstrap_statistic(centered, v, cfg.statistic,
                                            cfg.size_bounds, memory_cap)

    threshold = bootstrap_quantile(sample, cfg.alpha)
    p_value = (1.0 + float(np.count_nonzero(sample >= statistic))) / (cfg.n_bootstrap + 1.0)
    degenerate = statistic == 0.0 and threshold == 0.0
    reject = bool(statistic >= threshold) and not degenerate
    runtime_ms = (time.perf_counter() - t0) * 1000.0
    return TestReport(
        statistic=statistic,
        statistic_kind=cfg.statistic,
        change_block=change_block,
        threshold=threshold,
        alpha=cfg.alpha,
        p_value=p_value,
        reject=reject,
        degenerate=degenerate,
        n_bootstrap=cfg.n_bootstrap,
        kernel=cfg.kernel,
        mean_estimator=cfg.mean_estimator,
        weight=cfg.resolve_weight(field_obs.p),
        seed=cfg.seed,
        runtime_ms=runtime_ms,
        bootstrap_sample=sample if cfg.keep_bootstrap else None,
    )


def decide(statistic: float, sample: np.ndarray, alpha: float,
           degenerate: bool) -> tuple[float, bool]:
    """Threshold and decision for one level, from a stored bootstrap sample."""
    threshold = bootstrap_quantile(sample, alpha)
    reject = bool(statistic >= threshold) and not degenerate
    return threshold, reject


__all__ = [
    "TestConfig",
    "TestReport",
    "bootstrap_quantile",
    "bootstrap_statistic",
    "build_gram",
    "run_test",
    "decide",
    "STAT_CVM",
    "STAT_MEAN",
    "MU_GLOBAL",
    "MU_ADAPTED",
]
