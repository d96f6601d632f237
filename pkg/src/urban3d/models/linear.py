"""Ordinary least squares and elastic-net regression (Gaussian and logistic).

The elastic net minimizes

    (1/2n)·sum((y - a - X b)^2) + lam·(mix·|b|_1 + (1 - mix)/2·|b|_2^2)

by cyclic coordinate descent with soft-threshold updates on standardized
columns, using precomputed Gram products (covariance updates). The logistic
variant wraps the same solver in an iteratively reweighted quadratic
approximation. Lambda is selected by deterministic round-robin k-fold
cross-validation over a 100-point log grid spanning 4 decades down from
lambda_max, the smallest penalty that zeroes every coefficient.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from ..errors import ModelError
from .dataset import Dataset

GRID_POINTS = 100
GRID_DECADES = 4.0


@dataclass(frozen=True)
class ElasticNetConfig:
    lam: float | None = None     # None: select by cross-validation
    mix: float = 0.5             # 1 = pure L1, 0 = pure ridge
    tol: float = 1e-7
    max_iter: int = 10_000
    cv_folds: int = 5

    def validate(self) -> "ElasticNetConfig":
        if self.lam is not None and self.lam < 0:
            raise ModelError("lambda must be >= 0")
        if not 0.0 <= self.mix <= 1.0:
            raise ModelError("mix must be in [0, 1]")
        if self.tol <= 0 or self.max_iter < 1 or self.cv_folds < 2:
            raise ModelError("bad elastic net config")
        return self


@dataclass
class LinearModel:
    """Fitted linear predictor on raw (unstandardized) inputs."""

    intercept: float
    coef: np.ndarray
    link: str                       # identity | logit
    feature_names: tuple[str, ...]
    lam: float = 0.0
    mix: float = 0.0

    def __post_init__(self):
        self.coef = np.asarray(self.coef, dtype=np.float64)
        if self.link not in ("identity", "logit"):
            raise ModelError(f"unknown link {self.link!r}")
        if len(self.feature_names) != len(self.coef):
            raise ModelError("coefficient count does not match feature names")

    def latent(self, X: np.ndarray) -> np.ndarray:
        return self.intercept + np.asarray(X, dtype=np.float64) @ self.coef

    def predict(self, X: np.ndarray) -> np.ndarray:
        """Point prediction; probabilities for the logit link."""
        eta = self.latent(X)
        if self.link == "identity":
            return eta
        return _sigmoid(eta)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x, dtype=np.float64)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


# ---------------------------------------------------------------------------
# OLS


def fit_ols(data: Dataset) -> LinearModel:
    """Least squares through a pivoted QR; rank deficiency is reported with
    the offending column names rather than silently regularized."""
    n, p = data.n, data.p
    if n <= p:
        raise ModelError(f"OLS needs n > p, got n={n}, p={p}")
    A = np.column_stack([np.ones(n), data.X])
    q, r, piv = scipy.linalg.qr(A, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    tol = diag.max() * max(A.shape) * np.finfo(float).eps
    rank = int((diag > tol).sum())
    if rank < p + 1:
        names = ("(intercept)",) + data.feature_names
        dropped = sorted(names[j] for j in piv[rank:])
        raise ModelError(f"collinear columns: {', '.join(dropped)}")
    beta_piv = scipy.linalg.solve_triangular(r, q.T @ data.y)
    beta = np.empty(p + 1)
    beta[piv] = beta_piv
    return LinearModel(float(beta[0]), beta[1:], "identity", data.feature_names)


# ---------------------------------------------------------------------------
# elastic net: Gaussian core


def _cd_gaussian(G: np.ndarray, g: np.ndarray, beta: np.ndarray,
                 lam: float, mix: float, tol: float, max_iter: int) -> np.ndarray:
    """Coordinate descent on standardized Gram products.

    G = X'X/n (diagonal may deviate from 1 under observation weights),
    g = X'y/n. Updates in place and returns beta.
    """
    p = len(g)
    l1 = lam * mix
    l2 = lam * (1.0 - mix)
    Gb = G @ beta
    for it in range(max_iter):
        delta = 0.0
        for j in range(p):
            rho = g[j] - (Gb[j] - G[j, j] * beta[j])
            bj = np.sign(rho) * max(abs(rho) - l1, 0.0) / (G[j, j] + l2)
            step = bj - beta[j]
            if step != 0.0:
                Gb += G[:, j] * step
                beta[j] = bj
                delta = max(delta, abs(step))
        if delta < tol:
            return beta
    raise ModelError(f"elastic net did not converge: last max step {delta:.3e} "
                     f"after {max_iter} sweeps (lam={lam:.3e})")


def _lambda_grid(lam_max: float) -> np.ndarray:
    return np.geomspace(lam_max, lam_max * 10.0 ** -GRID_DECADES, GRID_POINTS)


def _folds(n: int, k: int) -> np.ndarray:
    # round-robin assignment: deterministic and stratification-free
    return np.arange(n) % k


def _gaussian_path_fit(Xs, y, lam, mix, tol, max_iter, beta0=None):
    n = len(y)
    ybar = float(y.mean())
    yc = y - ybar
    G = Xs.T @ Xs / n
    g = Xs.T @ yc / n
    beta = np.zeros(Xs.shape[1]) if beta0 is None else beta0.copy()
    beta = _cd_gaussian(G, g, beta, lam, mix, tol, max_iter)
    return ybar, beta


def _cv_gaussian(Xs, y, grid, mix, tol, max_iter, folds):
    k = folds.max() + 1
    errs = np.zeros(len(grid))
    for f in range(k):
        hold = folds == f
        Xtr, ytr = Xs[~hold], y[~hold]
        Xte, yte = Xs[hold], y[hold]
        n = len(ytr)
        ybar = float(ytr.mean())
        G = Xtr.T @ Xtr / n
        g = Xtr.T @ (ytr - ybar) / n
        beta = np.zeros(Xs.shape[1])
        for i, lam in enumerate(grid):  # warm start down the path
            beta = _cd_gaussian(G, g, beta, lam, mix, tol, max_iter)
            resid = yte - ybar - Xte @ beta
            errs[i] += float(resid @ resid)
    return errs


# ---------------------------------------------------------------------------
# elastic net: logistic core (IRLS around the Gaussian solver)

_W_FLOOR = 1e-5


def _irls_logistic(Xs, y, lam, mix, tol, max_iter, beta0, alpha0):
    n, p = Xs.shape
    beta = beta0.copy()
    alpha = alpha0
    for _outer in range(100):
        eta = alpha + Xs @ beta
        mu = _sigmoid(eta)
        w = np.maximum(mu * (1.0 - mu), _W_FLOOR)
        z = eta + (y - mu) / w
        # weighted centering absorbs the (unpenalized) intercept
        wsum = w.sum()
        xm = (w[:, None] * Xs).sum(axis=0) / wsum
        zm = float((w * z).sum() / wsum)
        Xc = Xs - xm
        zc = z - zm
        G = (Xc * w[:, None]).T @ Xc / n
        g = Xc.T @ (w * zc) / n
        new_beta = _cd_gaussian(G, g, beta.copy(), lam, mix, tol, max_iter)
        new_alpha = zm - float(xm @ new_beta)
        shift = max(float(np.max(np.abs(new_beta - beta))), abs(new_alpha - alpha))
        beta, alpha = new_beta, new_alpha
        if shift < 10.0 * tol:
            return alpha, beta
    raise ModelError(f"logistic elastic net did not converge: last shift {shift:.3e}")


def _cv_logistic(Xs, y, grid, mix, tol, max_iter, folds):
    k = folds.max() + 1
    dev = np.zeros(len(grid))
    for f in range(k):
        hold = folds == f
        Xtr, ytr = Xs[~hold], y[~hold]
        Xte, yte = Xs[hold], y[hold]
        base = float(ytr.mean())
        base = min(max(base, 1e-9), 1.0 - 1e-9)
        beta = np.zeros(Xs.shape[1])
        alpha = float(np.log(base / (1.0 - base)))
        for i, lam in enumerate(grid):
            alpha, beta = _irls_logistic(Xtr, ytr, lam, mix, tol, max_iter, beta, alpha)
            eta = alpha + Xte @ beta
            # binomial deviance, numerically safe around |eta| large
            dev[i] += 2.0 * float(np.sum(np.logaddexp(0.0, eta) - yte * eta))
    return dev


# ---------------------------------------------------------------------------
# public fit


def fit_elastic_net(data: Dataset, cfg: ElasticNetConfig = ElasticNetConfig(),
                    link: str = "identity") -> LinearModel:
    """Elastic net on standardized columns; reports coefficients on the raw
    scale. cfg.lam=None selects lambda by cross-validation (ties toward the
    stronger penalty); lam=0 reproduces the unpenalized fit."""
    cfg = cfg.validate()
    if link not in ("identity", "logit"):
        raise ModelError(f"unknown link {link!r}")
    Xs, x_mean, x_sd = data.standardized()
    y = data.y
    n = data.n
    if link == "logit" and not data.is_binary():
        raise ModelError("logit link needs a 0/1 outcome")

    mix_eff = max(cfg.mix, 1e-3)  # lambda_max undefined for pure ridge
    if link == "identity":
        lam_max = float(np.max(np.abs(Xs.T @ (y - y.mean())))) / (n * mix_eff)
    else:
        mu0 = min(max(float(y.mean()), 1e-9), 1 - 1e-9)
        lam_max = float(np.max(np.abs(Xs.T @ (y - mu0)))) / (n * mix_eff)
    lam_max = max(lam_max, 1e-12)

    lam = cfg.lam
    if lam is None:
        grid = _lambda_grid(lam_max)
        folds = _folds(n, cfg.cv_folds)
        if link == "identity":
            errs = _cv_gaussian(Xs, y, grid, cfg.mix, cfg.tol, cfg.max_iter, folds)
        else:
            errs = _cv_logistic(Xs, y, grid, cfg.mix, cfg.tol, cfg.max_iter, folds)
        lam = float(grid[int(np.argmin(errs))])  # argmin takes the largest lam on ties

    if link == "identity":
        ybar, beta_s = _gaussian_path_fit(Xs, y, lam, cfg.mix, cfg.tol, cfg.max_iter)
        alpha_s = ybar
    else:
        base = min(max(float(y.mean()), 1e-9), 1 - 1e-9)
        alpha_s, beta_s = _irls_logistic(
            Xs, y, lam, cfg.mix, cfg.tol, cfg.max_iter,
            np.zeros(data.p), float(np.log(base / (1 - base))),
        )

    coef = beta_s / x_sd
    intercept = float(alpha_s - x_mean @ coef)
    return LinearModel(intercept, coef, link, data.feature_names, lam=float(lam), mix=cfg.mix)


def kkt_residual(data: Dataset, model: LinearModel) -> float:
    """Max KKT violation of a Gaussian elastic-net fit on the standardized
    problem: |X'r/n - lam*(1-mix)*b| must equal lam*mix on active
    coordinates and be <= lam*mix on inactive ones."""
    if model.link != "identity":
        raise ModelError("KKT residual is defined for the identity link only")
    Xs, _x_mean, x_sd = data.standardized()
    beta_s = model.coef * x_sd
    r = data.y - data.y.mean() - Xs @ beta_s
    grad = Xs.T @ r / data.n - model.lam * (1.0 - model.mix) * beta_s
    l1 = model.lam * model.mix
    active = beta_s != 0.0
    viol = np.where(active,
                    np.abs(np.abs(grad) - l1),
                    np.maximum(np.abs(grad) - l1, 0.0))
    return float(viol.max(initial=0.0))
