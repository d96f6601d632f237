"""ROSE: smoothed-bootstrap rebalancing for binary outcomes.

Draws 2n synthetic observations. Each draw flips a fair coin for the class,
picks a member of that class uniformly, and jitters its numeric features
with centered Gaussian noise at the per-class Silverman-style bandwidth

    h_j = (4 / ((p + 2) * n_class)) ** (1 / (p + 4)) * sd_j

where p counts the perturbed (numeric) features. Columns flagged as
categorical (e.g. one-hot dummies) are copied unperturbed.
"""

from __future__ import annotations

import numpy as np

from ..errors import ModelError
from .dataset import Dataset


def rose_sample(data: Dataset, seed: int, cat_mask: np.ndarray | None = None) -> Dataset:
    if not data.is_binary():
        raise ModelError("ROSE needs a 0/1 outcome")
    y = data.y
    idx0 = np.flatnonzero(y == 0.0)
    idx1 = np.flatnonzero(y == 1.0)
    if min(len(idx0), len(idx1)) < 2:
        raise ModelError("ROSE needs at least 2 observations in each class")
    if cat_mask is None:
        cat_mask = np.zeros(data.p, dtype=bool)
    cat_mask = np.asarray(cat_mask, dtype=bool)
    if cat_mask.shape != (data.p,):
        raise ModelError("cat_mask length must match feature count")

    num_cols = np.flatnonzero(~cat_mask)
    p_num = len(num_cols)
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    n_out = 2 * data.n

    cls = rng.random(n_out) < 0.5             # True -> minority-agnostic class 1
    picks = np.empty(n_out, dtype=np.int64)
    n1 = int(cls.sum())
    picks[cls] = idx1[rng.integers(0, len(idx1), size=n1)]
    picks[~cls] = idx0[rng.integers(0, len(idx0), size=n_out - n1)]

    X_new = data.X[picks].copy()
    y_new = cls.astype(np.float64)
    coords_new = data.coords[picks]

    if p_num:
        for cls_val, idx_c in ((1.0, idx1), (0.0, idx0)):
            rows = np.flatnonzero(y_new == cls_val)
            n_c = len(idx_c)
            scale = (4.0 / ((p_num + 2.0) * n_c)) ** (1.0 / (p_num + 4.0))
            sd = data.X[idx_c][:, num_cols].std(axis=0)
            h = scale * sd
            noise = rng.standard_normal((len(rows), p_num)) * h
            X_new[np.ix_(rows, num_cols)] += noise

    return Dataset(X_new, y_new, coords_new, data.feature_names)
