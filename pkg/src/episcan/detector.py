"""Scikit-learn style front end for the epidemic change test."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from .bootstrap import TestConfig, run_test
from .gram import WeightSpec
from .multipliers import KernelSpec
from .validation import check_is_fitted, check_lattice_array


class EpidemicChangeDetector(BaseEstimator):
    """Test a lattice of observations for a rectangular change region.

    ``fit`` computes the scan statistic, estimates the change block as
    the maximizing rectangle, and calibrates the critical value with a
    dependent wild bootstrap.  ``predict`` labels each lattice point as
    inside (True) or outside (False) the estimated change region.

    Parameters
    ----------
    statistic : {"cvm", "mean"}
        "cvm" detects any change in the marginal distribution through
        the weighted-indicator embedding; "mean" targets mean shifts.
    kernel : {"ar", "ma"}
        Multiplier covariance family: exponential ("ar") or Bartlett
        ("ma").
    bandwidth : int
        Multiplier dependence range q.
    n_bootstrap : int
        Number of bootstrap replicates K.
    alpha : float
        Significance level in (0, 1).
    mean_estimator : {"global", "adapted"}
        Centering for the bootstrap: the grand mean, or separate means
        inside and outside the estimated change block.
    weight : WeightSpec or None
        Weight density for the "cvm" statistic; defaults to a Gaussian
        with location 100 and scale 1000 on every coordinate.
    size_bounds : (float, float) or None
        Optional (eps1, eps2) restricting the scanned block volumes to
        [eps1 * N, (1 - eps2) * N].
    field_dims : int or None
        Number of leading lattice axes of X.  None means every axis is
        a lattice axis and observations are scalar.
    keep_bootstrap : bool
        Retain the bootstrap sample on the report.
    random_state : int or None
        Master seed; None draws one and records it.

    Attributes
    ----------
    report_ : TestReport
    statistic_ : float
    threshold_ : float
    p_value_ : float
    reject_ : bool
    change_set_ : Block
    shape_ : tuple of int

    Examples
    --------
    >>> import numpy as np
    >>> from episcan import EpidemicChangeDetector
    >>> rng = np.random.default_rng(0)
    >>> X = rng.standard_normal((12, 12))
    >>> X[3:9, 2:7] += 3.0
    >>> det = EpidemicChangeDetector(bandwidth=2, n_bootstrap=99,
    ...                              random_state=0).fit(X)
    >>> bool(det.reject_)
    True
    >>> det.predict().shape
    (12, 12)
    """

    def __init__(self, statistic="cvm", kernel="ar", bandwidth=6,
                 n_bootstrap=199, alpha=0.05, mean_estimator="global",
                 weight=None, size_bounds=None, field_dims=None,
                 keep_bootstrap=False, random_state=None):
        self.statistic = statistic
        self.kernel = kernel
        self.bandwidth = bandwidth
        self.n_bootstrap = n_bootstrap
        self.alpha = alpha
        self.mean_estimator = mean_estimator
        self.weight = weight
        self.size_bounds = size_bounds
        self.field_dims = field_dims
        self.keep_bootstrap = keep_bootstrap
        self.random_state = random_state

    def _config(self) -> TestConfig:
        seed = self.random_state
        if seed is None:
            seed = int(np.random.SeedSequence().generate_state(1)[0])
        weight = self.weight
        if weight is not None and not isinstance(weight, WeightSpec):
            weight = WeightSpec(tuple(weight))
        return TestConfig(
            statistic=self.statistic,
            kernel=KernelSpec(self.kernel, self.bandwidth),
            n_bootstrap=self.n_bootstrap,
            alpha=self.alpha,
            mean_estimator=self.mean_estimator,
            weight=weight,
            size_bounds=self.size_bounds,
            seed=seed,
            keep_bootstrap=self.keep_bootstrap,
        )

    def fit(self, X, y=None):
        """Run the test on a lattice of observations."""
        field_obs = check_lattice_array(X, self.field_dims)
        report = run_test(field_obs, self._config())
        self.report_ = report
        self.statistic_ = report.statistic
        self.threshold_ = report.threshold
        self.p_value_ = report.p_value
        self.reject_ = report.reject
        self.change_set_ = report.change_block
        self.shape_ = field_obs.shape.dims
        return self

    def predict(self, X=None):
        """Boolean mask over the fitted lattice, True inside the
        estimated change region."""
        check_is_fitted(self)
        mask = np.zeros(self.shape_, dtype=bool)
        mask[self.change_set_.slices()] = True
        return mask

    def score_samples(self, X=None):
        """Per-point indicator of the estimated change region as floats;
        provided for pipeline compatibility."""
        return self.predict(X).astype(np.float64)
