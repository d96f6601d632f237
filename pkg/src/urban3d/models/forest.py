"""Random forest of exact-scan CART trees.

Trees are grown on bootstrap resamples represented as integer row weights,
with candidate features drawn per node. Split search is an exhaustive scan
over feature-sorted row indices; the sorted index matrix is partitioned
stably into the children so every node sees presorted rows without
re-sorting. For a 0/1 outcome the weighted-variance objective used here is
half the Gini decrease, so minimizing child SSE maximizes Gini decrease;
leaves then hold the majority class and the forest score is the fraction of
trees voting 1 (a probability usable for ranking). Regression leaves hold
the weighted mean and the forest predicts the tree average.

Determinism: each tree owns an in-kernel counter RNG seeded from
(config seed, tree index), so results are identical for any worker count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit, prange

from ..errors import ModelError
from .dataset import Dataset


@dataclass(frozen=True)
class ForestConfig:
    n_trees: int = 500
    mtry: int | None = None      # default: ceil(sqrt(p)) classification, ceil(p/3) regression
    min_leaf: int = 5
    max_depth: int | None = None
    seed: int = 0

    def validate(self, p: int) -> "ForestConfig":
        if self.n_trees < 1:
            raise ModelError("n_trees must be >= 1")
        if self.min_leaf < 1:
            raise ModelError("min_leaf must be >= 1")
        if self.mtry is not None and not 1 <= self.mtry <= p:
            raise ModelError(f"mtry must be in [1, {p}]")
        if self.max_depth is not None and self.max_depth < 1:
            raise ModelError("max_depth must be >= 1")
        return self


# ---------------------------------------------------------------------------
# in-kernel counter RNG (splitmix64)

_SM_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_SM_M1 = np.uint64(0xBF58476D1CE4E5B9)
_SM_M2 = np.uint64(0x94D049BB133111EB)


@njit(cache=True, nogil=True, inline="always")
def _sm_next(state):
    state = state + _SM_GAMMA
    z = state
    z = (z ^ (z >> np.uint64(30))) * _SM_M1
    z = (z ^ (z >> np.uint64(27))) * _SM_M2
    z = z ^ (z >> np.uint64(31))
    return state, z


@njit(cache=True, nogil=True)
def _grow_tree(X, y, order_full, seed, mtry, min_leaf, max_depth, is_class,
               feat, thr, left, right, value):
    n, p = X.shape
    state = seed

    # bootstrap as integer row weights
    w = np.zeros(n, dtype=np.int64)
    for _ in range(n):
        state, z = _sm_next(state)
        w[int(z % np.uint64(n))] += 1

    m = 0
    for i in range(n):
        if w[i] > 0:
            m += 1
    idx = np.empty((p, m), dtype=np.int32)
    for f in range(p):
        k = 0
        for t in range(n):
            r = order_full[f, t]
            if w[r] > 0:
                idx[f, k] = r
                k += 1

    left_buf = np.empty(m, dtype=np.int32)
    right_buf = np.empty(m, dtype=np.int32)
    perm = np.arange(p, dtype=np.int32)

    slab = feat.shape[0]
    st_start = np.empty(slab, dtype=np.int64)
    st_end = np.empty(slab, dtype=np.int64)
    st_node = np.empty(slab, dtype=np.int64)
    st_depth = np.empty(slab, dtype=np.int64)
    st_start[0], st_end[0], st_node[0], st_depth[0] = 0, m, 0, 0
    top = 1
    n_nodes = 1

    while top > 0:
        top -= 1
        start, end = st_start[top], st_end[top]
        node, depth = st_node[top], st_depth[top]

        W = 0.0
        s = 0.0
        ss = 0.0
        for pos in range(start, end):
            r = idx[0, pos]
            wr = float(w[r])
            W += wr
            s += wr * y[r]
            ss += wr * y[r] * y[r]
        mean = s / W
        sse = ss - s * s / W

        if W < 2.0 * min_leaf or depth >= max_depth or sse <= 1e-12 or n_nodes + 2 > slab:
            feat[node] = -1
            value[node] = 1.0 if (is_class and 2.0 * s > W) else (mean if not is_class else 0.0)
            continue

        best_score = sse - 1e-12  # child SSE must strictly improve
        best_f = -1
        best_thr = 0.0
        for k in range(mtry):
            state, z = _sm_next(state)
            j = k + int(z % np.uint64(p - k))
            perm[k], perm[j] = perm[j], perm[k]
            f = perm[k]

            wl = 0.0
            sl = 0.0
            ssl = 0.0
            for pos in range(start, end - 1):
                r = idx[f, pos]
                wr_ = float(w[r])
                wl += wr_
                sl += wr_ * y[r]
                ssl += wr_ * y[r] * y[r]
                v0 = X[r, f]
                v1 = X[idx[f, pos + 1], f]
                if v1 > v0 and wl >= min_leaf and (W - wl) >= min_leaf:
                    sr = s - sl
                    ssr = ss - ssl
                    score = (ssl - sl * sl / wl) + (ssr - sr * sr / (W - wl))
                    if score < best_score:
                        best_score = score
                        best_f = f
                        best_thr = 0.5 * (v0 + v1)

        if best_f < 0:
            feat[node] = -1
            value[node] = 1.0 if (is_class and 2.0 * s > W) else (mean if not is_class else 0.0)
            continue

        # stable partition of every feature's sorted segment
        nl = 0
        for f in range(p):
            kl = 0
            kr = 0
            for pos in range(start, end):
                r = idx[f, pos]
                if X[r, best_f] <= best_thr:
                    left_buf[kl] = r
                    kl += 1
                else:
                    right_buf[kr] = r
                    kr += 1
            for t in range(kl):
                idx[f, start + t] = left_buf[t]
            for t in range(kr):
                idx[f, start + kl + t] = right_buf[t]
            nl = kl

        c0 = n_nodes
        c1 = n_nodes + 1
        n_nodes += 2
        feat[node] = best_f
        thr[node] = best_thr
        left[node] = c0
        right[node] = c1
        st_start[top], st_end[top], st_node[top], st_depth[top] = start, start + nl, c0, depth + 1
        top += 1
        st_start[top], st_end[top], st_node[top], st_depth[top] = start + nl, end, c1, depth + 1
        top += 1

    return n_nodes


@njit(cache=True, nogil=True, parallel=True)
def _grow_forest(X, y, order_full, seeds, mtry, min_leaf, max_depth, is_class,
                 feat, thr, left, right, value, n_nodes):
    for t in prange(seeds.shape[0]):
        n_nodes[t] = _grow_tree(
            X, y, order_full, seeds[t], mtry, min_leaf, max_depth, is_class,
            feat[t], thr[t], left[t], right[t], value[t],
        )


@njit(cache=True, nogil=True, parallel=True)
def _predict_forest(X, feat, thr, left, right, value, out):
    n = X.shape[0]
    T = feat.shape[0]
    for i in prange(n):
        acc = 0.0
        for t in range(T):
            node = 0
            while feat[t, node] >= 0:
                if X[i, feat[t, node]] <= thr[t, node]:
                    node = left[t, node]
                else:
                    node = right[t, node]
            acc += value[t, node]
        out[i] = acc / T


# ---------------------------------------------------------------------------
# public model


@dataclass
class RandomForest:
    feat: np.ndarray        # (T, S) int32, -1 marks a leaf
    thr: np.ndarray         # (T, S) float64
    left: np.ndarray        # (T, S) int32
    right: np.ndarray       # (T, S) int32
    value: np.ndarray       # (T, S) float64
    n_nodes: np.ndarray     # (T,) int64
    is_classification: bool
    feature_names: tuple[str, ...]
    config: ForestConfig

    def predict(self, X: np.ndarray) -> np.ndarray:
        """Tree-mean prediction; for classification the vote fraction in [0, 1]."""
        X = np.ascontiguousarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != len(self.feature_names):
            raise ModelError(f"predict expects (n, {len(self.feature_names)}) inputs")
        out = np.empty(X.shape[0])
        _predict_forest(X, self.feat, self.thr, self.left, self.right, self.value, out)
        return out


def fit_random_forest(data: Dataset, cfg: ForestConfig = ForestConfig()) -> RandomForest:
    n, p = data.n, data.p
    if p < 1:
        raise ModelError("random forest needs at least one feature")
    cfg = cfg.validate(p)
    if n < 2 * cfg.min_leaf:
        raise ModelError(f"need n >= 2*min_leaf = {2 * cfg.min_leaf}, got {n}")
    if np.all(data.y == data.y[0]):
        raise ModelError("constant outcome: nothing to fit")
    is_class = bool(data.is_binary())
    mtry = cfg.mtry
    if mtry is None:
        mtry = math.ceil(math.sqrt(p)) if is_class else max(1, math.ceil(p / 3))

    order_full = np.empty((p, n), dtype=np.int32)
    for f in range(p):
        order_full[f] = np.argsort(data.X[:, f], kind="stable")

    T = cfg.n_trees
    slab = min(2 * n + 1, 2 * math.ceil(n / cfg.min_leaf) + 1)
    feat = np.full((T, slab), -1, dtype=np.int32)
    thr = np.zeros((T, slab))
    left = np.zeros((T, slab), dtype=np.int32)
    right = np.zeros((T, slab), dtype=np.int32)
    value = np.zeros((T, slab))
    n_nodes = np.zeros(T, dtype=np.int64)
    seeds = np.random.SeedSequence(cfg.seed).generate_state(T, np.uint64)
    max_depth = cfg.max_depth if cfg.max_depth is not None else 1 << 30

    _grow_forest(data.X, data.y, order_full, seeds, mtry, cfg.min_leaf,
                 max_depth, is_class, feat, thr, left, right, value, n_nodes)

    used = int(n_nodes.max())
    return RandomForest(
        feat=np.ascontiguousarray(feat[:, :used]),
        thr=np.ascontiguousarray(thr[:, :used]),
        left=np.ascontiguousarray(left[:, :used]),
        right=np.ascontiguousarray(right[:, :used]),
        value=np.ascontiguousarray(value[:, :used]),
        n_nodes=n_nodes,
        is_classification=is_class,
        feature_names=data.feature_names,
        config=cfg,
    )
