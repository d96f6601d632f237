"""Numeric dataset container shared by every model."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ModelError


@dataclass
class Dataset:
    """Design matrix, outcome, and observation sites.

    `X` is the raw (already encoded) matrix; standardized copies are computed
    on demand and cached so linear solvers and distance computations share
    one set of constants. Binary outcomes are 0/1 floats.
    """

    X: np.ndarray                  # (n, p)
    y: np.ndarray                  # (n,)
    coords: np.ndarray             # (n, 3) sites in meters
    feature_names: tuple[str, ...]
    _std: tuple[np.ndarray, np.ndarray, np.ndarray] | None = field(
        default=None, repr=False, compare=False)

    def __post_init__(self):
        self.X = np.ascontiguousarray(self.X, dtype=np.float64)
        self.y = np.ascontiguousarray(self.y, dtype=np.float64)
        self.coords = np.ascontiguousarray(self.coords, dtype=np.float64)
        self.feature_names = tuple(self.feature_names)
        n = len(self.y)
        if self.X.ndim != 2 or self.X.shape[0] != n:
            raise ModelError(f"X shape {self.X.shape} does not match {n} outcomes")
        if self.coords.shape != (n, 3):
            raise ModelError(f"coords shape {self.coords.shape}, expected ({n}, 3)")
        if len(self.feature_names) != self.X.shape[1]:
            raise ModelError("feature name count does not match X columns")
        if not np.isfinite(self.X).all() or not np.isfinite(self.y).all():
            raise ModelError("dataset contains non-finite values")
        if not np.isfinite(self.coords).all():
            raise ModelError("coords contain non-finite values")

    @property
    def n(self) -> int:
        return len(self.y)

    @property
    def p(self) -> int:
        return self.X.shape[1]

    def standardized(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(X_std, mean, sd); constant columns keep sd 1 so they map to 0."""
        if self._std is None:
            mean = self.X.mean(axis=0)
            sd = self.X.std(axis=0)
            sd = np.where(sd < 1e-12, 1.0, sd)
            self._std = ((self.X - mean) / sd, mean, sd)
        return self._std

    def subset(self, idx: np.ndarray) -> "Dataset":
        return Dataset(self.X[idx], self.y[idx], self.coords[idx], self.feature_names)

    def is_binary(self) -> bool:
        vals = np.unique(self.y)
        return bool(vals.size <= 2 and np.all(np.isin(vals, (0.0, 1.0))))
