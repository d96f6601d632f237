"""Spatial error model: regression with a Gaussian-process error term.

The error covariance is exponential, C(s, t) = sigma2 * exp(-phi * ||s - t||),
approximated by a Gaussian predictive process over m knots,

    K_tilde = C_nm C_mm^{-1} C_mn,

so every solve and log-determinant against (K_tilde + tau2 I) costs
O(n m^2) through the Woodbury and matrix-determinant identities; the n x n
covariance is never materialized.

Gaussian link: the marginal likelihood of y ~ N(X beta, K_tilde + tau2 I)
is maximized over (log sigma2, log phi, log tau2) by Nelder-Mead with three
jittered restarts, beta profiled out by generalized least squares at every
evaluation (outcome standardized internally, parameters reported on the raw
scale). Logit link: a Laplace approximation over the latent knot effects
(joint Newton over beta and the knot values) sits inside the same outer
search, which then runs over (log sigma2, log phi).

Prediction adds the kriged residual k*' (K_tilde + tau2 I)^{-1} (y - X beta)
to the fixed effects, with k* formed against knot-projected sites; the logit
link maps the latent mean through the logistic function.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from scipy.cluster.vq import kmeans2
from scipy.optimize import minimize
from scipy.spatial.distance import cdist

from ..errors import ModelError
from .dataset import Dataset

COND_LIMIT = 1e12
_JITTER_LADDER = (0.0, 1e-10, 1e-8, 1e-6)
LOG_VAR_BOUNDS = (-10.0, 10.0)   # on outcome standardized to unit variance


def exp_cov(dist, sigma2: float, phi: float):
    """C(s, t) = sigma2 * exp(-phi * d). `dist` may be a scalar or array."""
    if sigma2 <= 0 or phi <= 0:
        raise ModelError("exp_cov needs sigma2 > 0 and phi > 0")
    return sigma2 * np.exp(-phi * np.asarray(dist, dtype=np.float64))


def _pairwise(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return cdist(np.atleast_2d(a), np.atleast_2d(b))


class PredictiveProcess:
    """Low-rank covariance operator K_tilde (+ optional nugget).

    Factorizations are built once per (sigma2, phi, tau2) triple; the knot
    Gram matrix gets the smallest diagonal jitter (0, 1e-10, 1e-8, 1e-6)
    that admits a Cholesky factor, so exact interpolation (knots = sites)
    is preserved whenever the unjittered matrix is well posed.
    """

    def __init__(self, d_nm: np.ndarray, d_mm: np.ndarray,
                 sigma2: float, phi: float, tau2: float = 0.0):
        if tau2 < 0:
            raise ModelError("nugget tau2 must be >= 0")
        self.n, self.m = d_nm.shape
        self.sigma2, self.phi, self.tau2 = float(sigma2), float(phi), float(tau2)
        self.U = exp_cov(d_nm, sigma2, phi)                     # C_nm
        base = exp_cov(d_mm, sigma2, phi)
        for jit in _JITTER_LADDER:
            C_mm = base + (jit * sigma2) * np.eye(self.m)
            try:
                self._mm_chol = scipy.linalg.cho_factor(C_mm, lower=True)
                break
            except scipy.linalg.LinAlgError:
                continue
        else:
            raise ModelError("knot covariance is not positive definite; "
                             "use fewer or jittered knots")
        if np.linalg.cond(C_mm) > COND_LIMIT:
            raise ModelError(f"knot covariance condition exceeds {COND_LIMIT:.0e}; "
                             "use fewer or jittered knots")
        self._logdet_mm = 2.0 * float(np.log(np.diag(self._mm_chol[0])).sum())
        self._A_chol = None
        if tau2 > 0.0:
            # Low-rank smoothing loses diag variance (diag K_tilde < sigma2);
            # fold the deficit into the noise term so marginal variances stay
            # sigma2 + tau2 at every site. Vanishes when knots = sites.
            self._D = tau2 + np.maximum(sigma2 - self.diag(), 0.0)
            Ud = self.U / self._D[:, None]
            A = C_mm + Ud.T @ self.U
            self._A_chol = scipy.linalg.cho_factor(A, lower=True)
            self._logdet_A = 2.0 * float(np.log(np.diag(self._A_chol[0])).sum())

    @classmethod
    def from_coords(cls, coords: np.ndarray, knots: np.ndarray,
                    sigma2: float, phi: float, tau2: float = 0.0) -> "PredictiveProcess":
        return cls(_pairwise(coords, knots), _pairwise(knots, knots), sigma2, phi, tau2)

    # -- K_tilde itself ---------------------------------------------------

    def mm_solve(self, v: np.ndarray) -> np.ndarray:
        return scipy.linalg.cho_solve(self._mm_chol, v)

    def matvec(self, v: np.ndarray) -> np.ndarray:
        return self.U @ self.mm_solve(self.U.T @ v)

    def diag(self) -> np.ndarray:
        return np.einsum("ij,ji->i", self.U, self.mm_solve(self.U.T))

    def dense(self) -> np.ndarray:
        return self.U @ self.mm_solve(self.U.T)

    # -- (K_tilde + tau2 I) operator ---------------------------------------

    def solve(self, v: np.ndarray) -> np.ndarray:
        """(K_tilde + D)^{-1} v via Woodbury, O(n m^2)."""
        if self._A_chol is None:
            raise ModelError("nugget-free operator is singular; set tau2 > 0")
        D = self._D if v.ndim == 1 else self._D[:, None]
        vd = v / D
        return vd - (self.U @ scipy.linalg.cho_solve(self._A_chol, self.U.T @ vd)) / D

    def logdet(self) -> float:
        """log det(K_tilde + D) via the matrix determinant lemma."""
        if self._A_chol is None:
            raise ModelError("nugget-free operator is singular; set tau2 > 0")
        return float(np.log(self._D).sum()) + self._logdet_A - self._logdet_mm


def kmeans_knots(coords: np.ndarray, m: int | None = None, seed: int = 0) -> np.ndarray:
    """Default knot set: k-means centers, m = min(ceil(n/10), 64)."""
    coords = np.asarray(coords, dtype=np.float64)
    n = len(coords)
    if m is None:
        m = min(math.ceil(n / 10), 64)
    m = max(2, min(m, n))
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    centers, _ = kmeans2(coords, m, minit="++", seed=rng)
    centers = centers[np.isfinite(centers).all(axis=1)]
    centers = np.unique(centers, axis=0)
    if len(centers) < 2:  # degenerate site sets: fall back to extreme points
        centers = np.unique(coords, axis=0)[:2]
    return centers


# ---------------------------------------------------------------------------
# fitted parameters


@dataclass
class SemParams:
    link: str
    alpha: float
    beta: np.ndarray
    sigma2: float
    phi: float
    tau2: float
    knots: np.ndarray
    w_knots: np.ndarray              # latent posterior mode at knots (logit); zeros otherwise
    feature_names: tuple[str, ...]
    coord_dims: int = 3
    nll: float = math.nan

    def __post_init__(self):
        self.beta = np.asarray(self.beta, dtype=np.float64)
        self.knots = np.asarray(self.knots, dtype=np.float64)
        self.w_knots = np.asarray(self.w_knots, dtype=np.float64)


@dataclass(frozen=True)
class SemConfig:
    seed: int = 0
    restarts: int = 3
    max_evals: int = 2000
    xatol: float = 1e-3
    fatol: float = 1e-5
    coord_dims: int = 3              # 2 restricts distances to the horizontal plane

    def validate(self) -> "SemConfig":
        if self.restarts < 1 or self.max_evals < 10:
            raise ModelError("bad SEM optimizer config")
        if self.coord_dims not in (2, 3):
            raise ModelError("coord_dims must be 2 or 3")
        return self


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x, dtype=np.float64)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _box_penalty(v: float, lo: float, hi: float) -> tuple[float, float]:
    """Clip into [lo, hi]; return (clipped, squared violation)."""
    c = min(max(v, lo), hi)
    return c, (v - c) ** 2


# ---------------------------------------------------------------------------
# Gaussian link


def _gauss_nll(log_params, Xd, y, d_nm, d_mm, log_phi_box):
    ls2, lphi, lt2 = log_params
    pen = 0.0
    ls2, p1 = _box_penalty(ls2, *LOG_VAR_BOUNDS)
    lt2, p2 = _box_penalty(lt2, *LOG_VAR_BOUNDS)
    lphi, p3 = _box_penalty(lphi, *log_phi_box)
    pen = 1e3 * (p1 + p2 + p3)
    pp = PredictiveProcess(d_nm, d_mm, math.exp(ls2), math.exp(lphi), math.exp(lt2))
    SiX = pp.solve(Xd)
    Siy = pp.solve(y)
    XtSiX = Xd.T @ SiX
    XtSiy = Xd.T @ Siy
    with warnings.catch_warnings():
        warnings.simplefilter("error", scipy.linalg.LinAlgWarning)
        try:
            beta = scipy.linalg.solve(XtSiX, XtSiy, assume_a="pos")
        except (scipy.linalg.LinAlgError, scipy.linalg.LinAlgWarning):
            beta = scipy.linalg.lstsq(XtSiX, XtSiy)[0]   # degenerate designs
    r = y - Xd @ beta
    quad = float(r @ pp.solve(r))
    n = len(y)
    return 0.5 * (pp.logdet() + quad + n * math.log(2.0 * math.pi)) + pen, beta


def _fit_gaussian(Xd, y, coords, knots, cfg: SemConfig):
    y_mean, y_sd = float(y.mean()), float(y.std())
    y_sd = max(y_sd, 1e-12)
    ys = (y - y_mean) / y_sd
    d_nm = _pairwise(coords, knots)
    d_mm = _pairwise(knots, knots)
    D = max(float(d_nm.max()), 1e-9)
    log_phi_box = (math.log(1.0 / D), math.log(100.0 / D))

    def objective(lp):
        return _gauss_nll(lp, Xd, ys, d_nm, d_mm, log_phi_box)[0]

    rng = np.random.default_rng(np.random.SeedSequence(entropy=cfg.seed, spawn_key=(101,)))
    lo, hi = log_phi_box
    best = None
    for r in range(cfg.restarts):
        # phi starts spread across its box; variances split the outcome variance
        lphi0 = lo + (r + 0.5) * (hi - lo) / cfg.restarts
        x0 = np.array([math.log(0.5), lphi0, math.log(0.5)])
        if r > 0:
            x0[[0, 2]] += rng.normal(0.0, 0.3, size=2)
        x0 = np.clip(x0, [LOG_VAR_BOUNDS[0], log_phi_box[0], LOG_VAR_BOUNDS[0]],
                     [LOG_VAR_BOUNDS[1], log_phi_box[1], LOG_VAR_BOUNDS[1]])
        res = minimize(objective, x0, method="Nelder-Mead",
                       options={"maxfev": cfg.max_evals, "xatol": cfg.xatol,
                                "fatol": cfg.fatol, "adaptive": True})
        if not res.success and res.nfev >= cfg.max_evals:
            raise ModelError(
                f"SEM optimizer did not converge after {res.nfev} evaluations "
                f"(last simplex value {res.fun:.6g}, x={np.array2string(res.x, precision=4)})")
        if best is None or res.fun < best.fun:
            best = res

    nll, beta_s = _gauss_nll(best.x, Xd, ys, d_nm, d_mm, log_phi_box)
    ls2, lphi, lt2 = best.x
    ls2, _ = _box_penalty(ls2, *LOG_VAR_BOUNDS)
    lt2, _ = _box_penalty(lt2, *LOG_VAR_BOUNDS)
    lphi, _ = _box_penalty(lphi, *log_phi_box)
    # back to the raw outcome scale; the caller folds beta[0] into alpha
    beta = beta_s * y_sd
    sigma2 = math.exp(ls2) * y_sd ** 2
    tau2 = math.exp(lt2) * y_sd ** 2
    phi = math.exp(lphi)
    return beta, sigma2, phi, tau2, float(nll)


# ---------------------------------------------------------------------------
# logit link (Laplace approximation over latent knot effects)


def _laplace_fit(Z, y, mm_chol, logdet_mm, m, theta0, max_newton=60, tol=1e-8):
    """Newton maximization of the joint log posterior over theta = (beta, u).

    Z = [X_design, U C_mm^{-1}] stacked columns; the prior precision acts on
    the trailing m coordinates only. Returns (theta_hat, marginal_nll).
    """
    n, q = Z.shape
    pfix = q - m
    theta = theta0.copy()
    prev = math.inf
    for _ in range(max_newton):
        eta = Z @ theta
        mu = _sigmoid(eta)
        u = theta[pfix:]
        Qu = scipy.linalg.cho_solve(mm_chol, u)
        grad = Z.T @ (y - mu)
        grad[pfix:] -= Qu
        w = np.maximum(mu * (1.0 - mu), 1e-10)
        H = (Z * w[:, None]).T @ Z
        Cmm_inv = scipy.linalg.cho_solve(mm_chol, np.eye(m))
        H[pfix:, pfix:] += Cmm_inv
        try:
            step = scipy.linalg.solve(H, grad, assume_a="pos")
        except scipy.linalg.LinAlgError:
            H[np.diag_indices_from(H)] += 1e-8
            step = scipy.linalg.solve(H, grad)
        # damped update: halve until the objective improves
        ll = float(y @ eta - np.logaddexp(0.0, eta).sum() - 0.5 * u @ Qu)
        scale = 1.0
        for _half in range(30):
            cand = theta + scale * step
            eta_c = Z @ cand
            u_c = cand[pfix:]
            ll_c = float(y @ eta_c - np.logaddexp(0.0, eta_c).sum()
                         - 0.5 * u_c @ scipy.linalg.cho_solve(mm_chol, u_c))
            if ll_c >= ll - 1e-12:
                theta = cand
                break
            scale *= 0.5
        if abs(ll_c - prev) < tol * (1.0 + abs(ll_c)):
            break
        prev = ll_c

    eta = Z @ theta
    mu = _sigmoid(eta)
    u = theta[pfix:]
    w = np.maximum(mu * (1.0 - mu), 1e-10)
    H = (Z * w[:, None]).T @ Z
    H[pfix:, pfix:] += scipy.linalg.cho_solve(mm_chol, np.eye(m))
    sign, logdet_H = np.linalg.slogdet(H)
    if sign <= 0:
        raise ModelError("Laplace Hessian is not positive definite")
    ll_joint = float(y @ eta - np.logaddexp(0.0, eta).sum()
                     - 0.5 * u @ scipy.linalg.cho_solve(mm_chol, u))
    nll = -ll_joint + 0.5 * logdet_mm + 0.5 * logdet_H
    return theta, nll


def _fit_logit(Xd, y, coords, knots, cfg: SemConfig):
    n, pfix = Xd.shape
    m = len(knots)
    d_nm = _pairwise(coords, knots)
    d_mm = _pairwise(knots, knots)
    D = max(float(d_nm.max()), 1e-9)
    log_phi_box = (math.log(1.0 / D), math.log(100.0 / D))
    base_rate = min(max(float(y.mean()), 1e-9), 1.0 - 1e-9)
    theta_init = np.zeros(pfix + m)
    theta_init[0] = math.log(base_rate / (1.0 - base_rate))
    warm = {"theta": theta_init}

    def objective(lp):
        ls2, p1 = _box_penalty(lp[0], *LOG_VAR_BOUNDS)
        lphi, p2 = _box_penalty(lp[1], *log_phi_box)
        pen = 1e3 * (p1 + p2)
        pp = PredictiveProcess(d_nm, d_mm, math.exp(ls2), math.exp(lphi))
        P = pp.mm_solve(pp.U.T).T              # U C_mm^{-1}, (n, m)
        Z = np.concatenate([Xd, P], axis=1)
        theta, nll = _laplace_fit(Z, y, pp._mm_chol, pp._logdet_mm, m, warm["theta"])
        warm["theta"] = theta
        return nll + pen, theta

    rng = np.random.default_rng(np.random.SeedSequence(entropy=cfg.seed, spawn_key=(102,)))
    lo, hi = log_phi_box
    best = None
    best_theta = None
    for r in range(cfg.restarts):
        lphi0 = lo + (r + 0.5) * (hi - lo) / cfg.restarts
        x0 = np.array([math.log(1.0), lphi0])
        if r > 0:
            x0[0] += rng.normal(0.0, 0.3)
        x0 = np.clip(x0, [LOG_VAR_BOUNDS[0], log_phi_box[0]],
                     [LOG_VAR_BOUNDS[1], log_phi_box[1]])
        warm["theta"] = theta_init.copy()
        res = minimize(lambda lp: objective(lp)[0], x0, method="Nelder-Mead",
                       options={"maxfev": cfg.max_evals, "xatol": cfg.xatol,
                                "fatol": cfg.fatol, "adaptive": True})
        if not res.success and res.nfev >= cfg.max_evals:
            raise ModelError(
                f"SEM optimizer did not converge after {res.nfev} evaluations "
                f"(last simplex value {res.fun:.6g}, x={np.array2string(res.x, precision=4)})")
        if best is None or res.fun < best.fun:
            best = res
            warm["theta"] = theta_init.copy()
            _, best_theta = objective(res.x)

    ls2, _ = _box_penalty(best.x[0], *LOG_VAR_BOUNDS)
    lphi, _ = _box_penalty(best.x[1], *log_phi_box)
    return best_theta, math.exp(ls2), math.exp(lphi), float(best.fun)


# ---------------------------------------------------------------------------
# public fit / predict


def fit_sem(data: Dataset, knots: np.ndarray | None = None, link: str = "identity",
            cfg: SemConfig = SemConfig()) -> SemParams:
    """Maximum (approximate) marginal likelihood fit; see the module docstring."""
    cfg = cfg.validate()
    if link not in ("identity", "logit"):
        raise ModelError(f"unknown link {link!r}")
    n = data.n
    if n < 30:
        raise ModelError(f"SEM needs n >= 30, got {n}")
    coords = data.coords[:, : cfg.coord_dims]
    if knots is None:
        knots = kmeans_knots(coords, seed=cfg.seed)
    knots = np.asarray(knots, dtype=np.float64)[:, : cfg.coord_dims]
    if len(knots) < 2 or len(knots) > n:
        raise ModelError("need 2 <= m <= n distinct knots")
    # standardized columns keep the marginal-likelihood search well conditioned
    # (raw coordinates are nearly collinear with the intercept); coefficients
    # map back to the raw scale below
    mu_x = data.X.mean(axis=0)
    sd_x = data.X.std(axis=0)
    sd_x = np.where(sd_x > 1e-12, sd_x, 1.0)
    Xd = np.column_stack([np.ones(n), (data.X - mu_x) / sd_x])

    if link == "identity":
        beta_full, sigma2, phi, tau2, nll = _fit_gaussian(Xd, data.y, coords, knots, cfg)
        beta = beta_full[1:] / sd_x
        alpha = float(data.y.mean()) + float(beta_full[0]) - float(beta @ mu_x)
        w_knots = np.zeros(len(knots))
    else:
        if not data.is_binary():
            raise ModelError("logit link needs a 0/1 outcome")
        theta, sigma2, phi, nll = _fit_logit(Xd, data.y, coords, knots, cfg)
        beta = theta[1 : Xd.shape[1]] / sd_x
        alpha = float(theta[0]) - float(beta @ mu_x)
        w_knots = theta[Xd.shape[1] :]
        tau2 = 0.0

    return SemParams(link=link, alpha=alpha, beta=beta, sigma2=sigma2, phi=phi,
                     tau2=tau2, knots=knots, w_knots=w_knots,
                     feature_names=data.feature_names, coord_dims=cfg.coord_dims,
                     nll=nll)


def predict_sem(params: SemParams, train: Dataset, X_new: np.ndarray,
                coords_new: np.ndarray) -> np.ndarray:
    """Fixed effects plus kriged residual; probabilities for the logit link."""
    X_new = np.asarray(X_new, dtype=np.float64)
    coords_new = np.asarray(coords_new, dtype=np.float64)[:, : params.coord_dims]
    fixed = params.alpha + X_new @ params.beta
    d_sm = _pairwise(coords_new, params.knots)

    if params.link == "logit":
        pp = PredictiveProcess(d_sm, _pairwise(params.knots, params.knots),
                               params.sigma2, params.phi)
        latent = fixed + pp.U @ pp.mm_solve(params.w_knots)
        return _sigmoid(latent)

    coords_tr = train.coords[:, : params.coord_dims]
    pp = PredictiveProcess.from_coords(coords_tr, params.knots,
                                       params.sigma2, params.phi, params.tau2)
    r = train.y - (params.alpha + train.X @ params.beta)
    v = pp.mm_solve(pp.U.T @ pp.solve(r))       # C_mm^{-1} C_mn (K+tau2 I)^{-1} r
    k_star = exp_cov(d_sm, params.sigma2, params.phi)
    return fixed + k_star @ v
