"""Input validation helpers for the estimator-facing API."""

from __future__ import annotations

import numpy as np

from .gram import ObservationField
from .lattice import LatticeShape


def check_lattice_array(X, field_dims: int | None = None) -> ObservationField:
    """Coerce an array into an observation field.

    With ``field_dims=None`` every axis of ``X`` indexes the lattice and
    the observations are scalar; otherwise the first ``field_dims`` axes
    index the lattice and the last axis holds observation coordinates.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim < 1:
        raise ValueError("input must be at least 1-dimensional")
    if field_dims is not None:
        field_dims = int(field_dims)
        if field_dims < 1:
            raise ValueError(f"field_dims must be >= 1, got {field_dims}")
        if X.ndim == field_dims:
            X = X[..., np.newaxis]
        elif X.ndim != field_dims + 1:
            raise ValueError(
                f"array with {X.ndim} axes cannot host a {field_dims}-d lattice "
                "of vector observations"
            )
    else:
        X = X[..., np.newaxis]
    if not np.all(np.isfinite(X)):
        raise ValueError("input contains non-finite values")
    if any(n < 2 for n in X.shape[:-1]):
        raise ValueError(
            f"each lattice side needs at least 2 points, got {X.shape[:-1]}"
        )
    return ObservationField(LatticeShape(X.shape[:-1]), X)


def check_is_fitted(estimator, attribute: str = "report_") -> None:
    if not hasattr(estimator, attribute):
        raise RuntimeError(
            f"{type(estimator).__name__} is not fitted yet; call fit first"
        )
