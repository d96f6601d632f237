"""Regression, classification, and spatial model tests.

Closed-form checks (OLS, KKT conditions, Woodbury identities) are computed
independently with dense numpy linear algebra before being compared against
the package implementations.
"""

import numpy as np
import pytest
import scipy.linalg
from scipy.spatial.distance import cdist

from urban3d.errors import FormatError, ModelError
from urban3d.models import (
    Dataset,
    ElasticNetConfig,
    ForestConfig,
    LinearModel,
    PredictiveProcess,
    SemConfig,
    SemParams,
    exp_cov,
    fit_elastic_net,
    fit_ols,
    fit_random_forest,
    fit_sem,
    kkt_residual,
    kmeans_knots,
    load_model,
    predict_sem,
    rose_sample,
)


def _toy(n=200, p=4, seed=0, noise=0.5, link="identity"):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, p))
    beta = np.arange(1, p + 1, dtype=np.float64)
    eta = 1.5 + X @ beta
    if link == "identity":
        y = eta + noise * rng.standard_normal(n)
    else:
        y = (rng.random(n) < 1.0 / (1.0 + np.exp(-eta))).astype(np.float64)
    coords = np.column_stack([rng.uniform(0, 500, n), rng.uniform(0, 500, n),
                              rng.uniform(0, 30, n)])
    names = tuple(f"x{j}" for j in range(p))
    return Dataset(X, y, coords, names), beta


# ---------------------------------------------------------------------------
# dataset container


def test_dataset_validation():
    X = np.zeros((5, 2))
    y = np.zeros(5)
    coords = np.zeros((5, 3))
    with pytest.raises(ModelError):
        Dataset(X, np.zeros(4), coords, ("a", "b"))
    with pytest.raises(ModelError):
        Dataset(X, y, np.zeros((5, 2)), ("a", "b"))
    with pytest.raises(ModelError):
        Dataset(X, y, coords, ("a",))
    bad = X.copy()
    bad[0, 0] = np.nan
    with pytest.raises(ModelError):
        Dataset(bad, y, coords, ("a", "b"))


def test_dataset_subset_and_binary():
    data, _ = _toy(50, 3, seed=1)
    idx = np.array([4, 7, 9, 30])
    sub = data.subset(idx)
    assert sub.n == 4
    assert np.array_equal(sub.X, data.X[idx])
    assert not data.is_binary()
    yb = (data.y > data.y.mean()).astype(float)
    assert Dataset(data.X, yb, data.coords, data.feature_names).is_binary()


def test_standardized_constant_column():
    X = np.column_stack([np.ones(10), np.arange(10, dtype=float)])
    data = Dataset(X, np.zeros(10), np.zeros((10, 3)), ("c", "t"))
    Xs, mean, sd = data.standardized()
    assert np.allclose(Xs[:, 0], 0.0)      # constant maps to 0, sd floored at 1
    assert sd[0] == 1.0
    assert abs(Xs[:, 1].std() - 1.0) < 1e-12


# ---------------------------------------------------------------------------
# OLS


def test_ols_matches_normal_equations():
    data, _ = _toy(300, 5, seed=2)
    model = fit_ols(data)
    A = np.column_stack([np.ones(data.n), data.X])
    ref = np.linalg.lstsq(A, data.y, rcond=None)[0]
    assert abs(model.intercept - ref[0]) < 1e-10
    assert np.allclose(model.coef, ref[1:], atol=1e-10)


def test_ols_exact_on_noiseless_data():
    data, beta = _toy(100, 3, seed=3, noise=0.0)
    model = fit_ols(data)
    assert np.allclose(model.coef, beta, atol=1e-10)
    assert abs(model.intercept - 1.5) < 1e-10


def test_ols_rejects_collinear_columns():
    rng = np.random.default_rng(4)
    X = rng.standard_normal((50, 2))
    X = np.column_stack([X, X[:, 0] + X[:, 1]])       # exact linear combination
    data = Dataset(X, rng.standard_normal(50), np.zeros((50, 3)), ("a", "b", "absum"))
    with pytest.raises(ModelError, match="collinear"):
        fit_ols(data)


def test_ols_needs_more_rows_than_columns():
    data, _ = _toy(4, 4, seed=5)
    with pytest.raises(ModelError, match="n > p"):
        fit_ols(data)


# ---------------------------------------------------------------------------
# elastic net


def test_elastic_net_lam_zero_matches_ols():
    data, _ = _toy(250, 6, seed=6)
    ols = fit_ols(data)
    net = fit_elastic_net(data, ElasticNetConfig(lam=0.0, mix=0.5, tol=1e-10))
    assert np.allclose(net.coef, ols.coef, atol=1e-6)
    assert abs(net.intercept - ols.intercept) < 1e-6


def test_elastic_net_null_model_at_lambda_max():
    data, _ = _toy(200, 5, seed=7)
    Xs, _, _ = data.standardized()
    lam_max = float(np.max(np.abs(Xs.T @ (data.y - data.y.mean())))) / data.n
    net = fit_elastic_net(data, ElasticNetConfig(lam=lam_max, mix=1.0))
    assert np.all(net.coef == 0.0)
    assert abs(net.intercept - data.y.mean()) < 1e-12
    # anything strictly above stays null too
    net2 = fit_elastic_net(data, ElasticNetConfig(lam=2 * lam_max, mix=1.0))
    assert np.all(net2.coef == 0.0)


def test_elastic_net_kkt_conditions():
    data, _ = _toy(300, 8, seed=8)
    cfg = ElasticNetConfig(lam=0.05, mix=0.5, tol=1e-9)
    model = fit_elastic_net(data, cfg)

    # independent KKT check on the standardized problem
    Xs, x_mean, x_sd = data.standardized()
    b = model.coef * x_sd
    r = data.y - data.y.mean() - Xs @ b
    grad = Xs.T @ r / data.n - cfg.lam * (1 - cfg.mix) * b
    l1 = cfg.lam * cfg.mix
    worst = 0.0
    for j in range(data.p):
        if b[j] != 0.0:
            worst = max(worst, abs(abs(grad[j]) - l1))
        else:
            worst = max(worst, max(abs(grad[j]) - l1, 0.0))
    assert worst <= 10 * cfg.tol
    assert abs(kkt_residual(data, model) - worst) < 1e-14


def test_kkt_residual_rejects_logit():
    data, _ = _toy(100, 3, seed=9, link="logit")
    model = fit_elastic_net(data, ElasticNetConfig(lam=0.01, mix=0.5), link="logit")
    with pytest.raises(ModelError, match="identity"):
        kkt_residual(data, model)


def test_elastic_net_cv_selects_reasonable_lambda():
    data, beta = _toy(400, 6, seed=10, noise=1.0)
    model = fit_elastic_net(data, ElasticNetConfig(lam=None, mix=0.5))
    assert model.lam > 0.0
    assert np.isfinite(model.lam)
    # strong true signal: CV must not shrink everything away
    pred = model.predict(data.X)
    resid = data.y - pred
    assert resid.std() < 0.5 * data.y.std()


def test_elastic_net_cv_is_deterministic():
    data, _ = _toy(150, 5, seed=11)
    a = fit_elastic_net(data, ElasticNetConfig(lam=None, mix=0.5))
    b = fit_elastic_net(data, ElasticNetConfig(lam=None, mix=0.5))
    assert a.lam == b.lam
    assert np.array_equal(a.coef, b.coef)


def test_logistic_elastic_net_recovers_signal():
    data, beta = _toy(600, 4, seed=12, link="logit")
    model = fit_elastic_net(data, ElasticNetConfig(lam=1e-4, mix=0.0), link="logit")
    p = model.predict(data.X)
    assert np.all((p > 0) & (p < 1))
    # coefficient ordering matches the generating slopes 1 < 2 < 3 < 4
    assert np.all(np.diff(model.coef) > 0)
    acc = float(((p > 0.5) == (data.y == 1.0)).mean())
    assert acc > 0.85


def test_logit_link_requires_binary_outcome():
    data, _ = _toy(100, 3, seed=13)
    with pytest.raises(ModelError, match="0/1"):
        fit_elastic_net(data, ElasticNetConfig(lam=0.1), link="logit")


def test_elastic_net_config_validation():
    with pytest.raises(ModelError):
        ElasticNetConfig(lam=-1.0).validate()
    with pytest.raises(ModelError):
        ElasticNetConfig(mix=1.5).validate()
    with pytest.raises(ModelError):
        ElasticNetConfig(cv_folds=1).validate()
    data, _ = _toy(50, 2, seed=14)
    with pytest.raises(ModelError, match="unknown link"):
        fit_elastic_net(data, ElasticNetConfig(lam=0.1), link="probit")


def test_linear_model_validation():
    with pytest.raises(ModelError):
        LinearModel(0.0, np.zeros(2), "identity", ("a",))
    with pytest.raises(ModelError):
        LinearModel(0.0, np.zeros(1), "cauchit", ("a",))


# ---------------------------------------------------------------------------
# random forest


def _xor_data(n=400, seed=15):
    rng = np.random.default_rng(seed)
    X = np.column_stack([rng.integers(0, 2, n).astype(float),
                         rng.integers(0, 2, n).astype(float),
                         rng.standard_normal(n)])
    y = np.logical_xor(X[:, 0] > 0.5, X[:, 1] > 0.5).astype(np.float64)
    return Dataset(X, y, np.zeros((n, 3)), ("a", "b", "noise"))


def test_forest_learns_xor():
    data = _xor_data()
    model = fit_random_forest(data, ForestConfig(n_trees=200, min_leaf=2, seed=0))
    votes = model.predict(data.X)
    acc = float(((votes > 0.5) == (data.y == 1.0)).mean())
    assert acc >= 0.95


def test_forest_votes_are_tree_fractions():
    data = _xor_data(200, seed=16)
    cfg = ForestConfig(n_trees=40, min_leaf=2, seed=1)
    model = fit_random_forest(data, cfg)
    votes = model.predict(data.X)
    assert np.all((votes >= 0.0) & (votes <= 1.0))
    # classification trees store hard 0/1 leaves; averages live on a 1/T grid
    counts = votes * cfg.n_trees
    assert np.allclose(counts, np.round(counts), atol=1e-9)


def test_forest_regression_beats_mean():
    rng = np.random.default_rng(17)
    n = 500
    X = rng.uniform(-2, 2, (n, 3))
    y = np.sin(X[:, 0]) + 0.5 * X[:, 1] ** 2 + 0.1 * rng.standard_normal(n)
    data = Dataset(X, y, np.zeros((n, 3)), ("a", "b", "c"))
    model = fit_random_forest(data, ForestConfig(n_trees=200, min_leaf=5, seed=2))
    resid = y - model.predict(X)
    assert float(np.sqrt((resid ** 2).mean())) < 0.5 * float(y.std())


def test_forest_is_deterministic_in_seed():
    data = _xor_data(150, seed=18)
    a = fit_random_forest(data, ForestConfig(n_trees=30, seed=5))
    b = fit_random_forest(data, ForestConfig(n_trees=30, seed=5))
    c = fit_random_forest(data, ForestConfig(n_trees=30, seed=6))
    grid = data.X
    assert np.array_equal(a.predict(grid), b.predict(grid))
    assert not np.array_equal(a.predict(grid), c.predict(grid))


def test_forest_config_validation():
    data = _xor_data(60, seed=19)
    with pytest.raises(ModelError):
        fit_random_forest(data, ForestConfig(n_trees=0))
    with pytest.raises(ModelError):
        fit_random_forest(data, ForestConfig(mtry=99))
    const = Dataset(data.X, np.ones(data.n), data.coords, data.feature_names)
    with pytest.raises(ModelError, match="constant"):
        fit_random_forest(const)


def test_forest_predict_shape_check():
    data = _xor_data(80, seed=20)
    model = fit_random_forest(data, ForestConfig(n_trees=10))
    with pytest.raises(ModelError):
        model.predict(np.zeros((5, 7)))


# ---------------------------------------------------------------------------
# ROSE resampling


def _imbalanced(n=5000, rate=0.05, seed=21):
    rng = np.random.default_rng(seed)
    X = np.column_stack([rng.standard_normal(n), rng.integers(0, 2, n).astype(float)])
    y = (rng.random(n) < rate).astype(np.float64)
    y[:2] = 1.0                                     # guarantee both classes
    coords = rng.uniform(0, 100, (n, 3))
    return Dataset(X, y, coords, ("num", "dummy"))


def test_rose_balances_classes():
    data = _imbalanced()
    out = rose_sample(data, seed=0)
    assert out.n == 2 * data.n                      # 10^4 draws
    assert abs(float(out.y.mean()) - 0.5) <= 0.02


def test_rose_jitters_numeric_but_copies_categorical():
    data = _imbalanced(2000, seed=22)
    cat = np.array([False, True])
    out = rose_sample(data, seed=1, cat_mask=cat)
    assert set(np.unique(out.X[:, 1])) <= {0.0, 1.0}          # dummy untouched
    orig = set(data.X[:, 0].tolist())
    jittered = sum(v not in orig for v in out.X[:, 0].tolist())
    assert jittered > 0.9 * out.n                             # noise actually applied


def test_rose_bandwidth_matches_formula():
    # all-categorical mask: rows must be exact copies of training rows
    data = _imbalanced(500, rate=0.2, seed=23)
    out = rose_sample(data, seed=2, cat_mask=np.array([True, True]))
    rows = {tuple(r) for r in data.X}
    assert all(tuple(r) in rows for r in out.X)

    # single numeric column: per-class spread grows by the Silverman factor
    d1 = _imbalanced(4000, rate=0.5, seed=24)
    out1 = rose_sample(d1, seed=3, cat_mask=np.array([False, True]))
    for cls in (0.0, 1.0):
        src = d1.X[d1.y == cls, 0]
        n_c = len(src)
        h = (4.0 / (3.0 * n_c)) ** (1.0 / 5.0) * src.std()    # p = 1
        got = out1.X[out1.y == cls, 0].var()
        want = src.var() + h * h                              # variance inflation
        assert abs(got - want) / want < 0.1


def test_rose_is_deterministic_and_seed_sensitive():
    data = _imbalanced(800, seed=25)
    a = rose_sample(data, seed=7)
    b = rose_sample(data, seed=7)
    c = rose_sample(data, seed=8)
    assert np.array_equal(a.X, b.X) and np.array_equal(a.y, b.y)
    assert not np.array_equal(a.X, c.X)


def test_rose_input_validation():
    data, _ = _toy(50, 2, seed=26)
    with pytest.raises(ModelError, match="0/1"):
        rose_sample(data, seed=0)
    one_pos = _imbalanced(100, seed=27)
    one_pos.y[:] = 0.0
    one_pos.y[0] = 1.0
    with pytest.raises(ModelError, match="each class"):
        rose_sample(one_pos, seed=0)
    bal = _imbalanced(100, rate=0.5, seed=28)
    with pytest.raises(ModelError, match="cat_mask"):
        rose_sample(bal, seed=0, cat_mask=np.array([True]))


# ---------------------------------------------------------------------------
# predictive process operator


def _pp_setup(n=60, m=12, seed=29, tau2=0.3):
    rng = np.random.default_rng(seed)
    coords = rng.uniform(0, 200, (n, 3))
    knots = kmeans_knots(coords, m, seed=seed)
    # phi is a decay rate: 0.0125 puts the e-folding range at 80 m
    pp = PredictiveProcess.from_coords(coords, knots, sigma2=2.0, phi=0.0125,
                                       tau2=tau2)
    C_nm = exp_cov(cdist(coords, knots), 2.0, 0.0125)
    C_mm = exp_cov(cdist(knots, knots), 2.0, 0.0125)
    K = C_nm @ np.linalg.solve(C_mm, C_nm.T)
    return pp, K, coords


def test_pp_dense_matches_reference():
    pp, K, _ = _pp_setup()
    assert np.allclose(pp.dense(), K, atol=1e-8)
    assert np.allclose(pp.diag(), np.diag(K), atol=1e-8)


def test_pp_woodbury_solve_and_logdet():
    pp, K, _ = _pp_setup(tau2=0.3)
    # the operator folds the low-rank diagonal deficit into the noise term
    D = 0.3 + np.maximum(2.0 - np.diag(K), 0.0)
    full = K + np.diag(D)
    rng = np.random.default_rng(30)
    v = rng.standard_normal(len(K))
    assert np.allclose(pp.solve(v), np.linalg.solve(full, v), atol=1e-8)
    sign, logdet = np.linalg.slogdet(full)
    assert sign > 0
    assert abs(pp.logdet() - logdet) < 1e-8


def test_pp_exact_at_knots_equal_sites():
    rng = np.random.default_rng(31)
    coords = rng.uniform(0, 100, (25, 3))
    pp = PredictiveProcess.from_coords(coords, coords, sigma2=1.5, phi=0.05)
    K_exact = exp_cov(cdist(coords, coords), 1.5, 0.05)
    assert np.allclose(pp.dense(), K_exact, atol=1e-6)


def test_pp_marginal_variance_is_preserved():
    pp, K, _ = _pp_setup(tau2=0.5)
    # diag(K_tilde) + D == sigma2 + tau2 everywhere by construction
    total = pp.diag() + pp._D
    assert np.allclose(total, 2.0 + 0.5, atol=1e-10)


def test_pp_rejects_negative_nugget():
    with pytest.raises(ModelError):
        _pp_setup(tau2=-0.1)


def test_pp_nugget_free_solve_is_refused():
    pp, _, _ = _pp_setup(tau2=0.0)
    with pytest.raises(ModelError, match="nugget"):
        pp.solve(np.zeros(pp.n))
    with pytest.raises(ModelError, match="nugget"):
        pp.logdet()


def test_exp_cov_basics():
    d = np.array([[0.0, 50.0], [50.0, 0.0]])
    C = exp_cov(d, 2.0, 0.02)                       # decay 0.02 -> range 50 m
    assert C[0, 0] == 2.0
    assert abs(C[0, 1] - 2.0 * np.exp(-1.0)) < 1e-15


def test_kmeans_knots_counts():
    rng = np.random.default_rng(32)
    coords = rng.uniform(0, 1000, (500, 3))
    k = kmeans_knots(coords)                        # default m = min(ceil(n/10), 64)
    assert k.shape == (50, 3)
    k2 = kmeans_knots(rng.uniform(0, 1000, (1000, 3)))
    assert len(k2) == 64
    assert len(np.unique(k, axis=0)) == len(k)


# ---------------------------------------------------------------------------
# spatial error model


def _sem_sim(n=150, m=15, seed=33, tau=0.3, link="identity"):
    """Gaussian process regression data with a knot-rank spatial field."""
    rng = np.random.default_rng(seed)
    coords = np.column_stack([rng.uniform(0, 400, n), rng.uniform(0, 400, n),
                              rng.uniform(0, 25, n)])
    knots = kmeans_knots(coords, m, seed=seed)
    sigma2, phi = 1.0, 0.01                         # 100 m correlation range
    C_mm = exp_cov(cdist(knots, knots), sigma2, phi)
    w = np.linalg.cholesky(C_mm + 1e-10 * np.eye(m)) @ rng.standard_normal(m)
    field = exp_cov(cdist(coords, knots), sigma2, phi) @ np.linalg.solve(C_mm, w)
    X = rng.standard_normal((n, 2))
    beta = np.array([1.0, -2.0])
    eta = 0.5 + X @ beta + field
    if link == "identity":
        y = eta + tau * rng.standard_normal(n)
    else:
        y = (rng.random(n) < 1.0 / (1.0 + np.exp(-eta))).astype(np.float64)
    data = Dataset(X, y, coords, ("x0", "x1"))
    return data, knots, beta


def test_sem_gaussian_recovers_coefficients():
    data, knots, beta = _sem_sim(seed=34)
    params = fit_sem(data, knots=knots,
                     cfg=SemConfig(seed=0, restarts=2, max_evals=600))
    assert params.link == "identity"
    for got, want in zip(params.beta, beta):
        assert abs(got - want) < 0.5 * abs(want)
    assert 0.0 < params.sigma2 < 10.0
    assert params.tau2 >= 0.0


def test_sem_predictions_beat_ols_under_spatial_noise():
    data, knots, _ = _sem_sim(n=200, seed=35, tau=0.2)
    tr = data.subset(np.arange(150))
    te = data.subset(np.arange(150, 200))
    params = fit_sem(tr, knots=knots, cfg=SemConfig(seed=0, restarts=2, max_evals=600))
    sem_pred = predict_sem(params, tr, te.X, te.coords)
    ols_pred = fit_ols(tr).predict(te.X)
    rmse = lambda p: float(np.sqrt(((te.y - p) ** 2).mean()))
    assert rmse(sem_pred) < rmse(ols_pred)


def test_sem_logit_finds_signal():
    data, knots, _ = _sem_sim(n=200, seed=36, link="logit")
    params = fit_sem(data, knots=knots, link="logit",
                     cfg=SemConfig(seed=0, restarts=1, max_evals=400))
    p = predict_sem(params, data, data.X, data.coords)
    assert np.all((p > 0.0) & (p < 1.0))
    assert params.beta[0] > 0.0 and params.beta[1] < 0.0
    # in-sample ranking must separate the classes far better than chance
    pos, neg = p[data.y == 1.0], p[data.y == 0.0]
    auc = float((pos[:, None] > neg[None, :]).mean())
    assert auc > 0.75


def test_sem_interpolates_at_training_sites():
    # with knots = sites and a vanishing nugget, kriging reproduces the data
    rng = np.random.default_rng(37)
    n = 40
    coords = np.column_stack([rng.uniform(0, 100, (n, 2)), np.zeros(n)])
    y = rng.standard_normal(n)
    data = Dataset(np.zeros((n, 0)), y, coords, ())
    params = SemParams(link="identity", alpha=0.0, beta=np.zeros(0), sigma2=1.0,
                       phi=0.03, tau2=1e-8, knots=coords.copy(),
                       w_knots=np.zeros(n), feature_names=())
    pred = predict_sem(params, data, np.zeros((n, 0)), coords)
    assert np.allclose(pred, y, atol=1e-3)


def test_sem_zero_feature_fit_runs():
    # intercept-only SEM is a legitimate configuration (pure spatial smoother)
    data, knots, _ = _sem_sim(n=80, m=10, seed=38)
    empty = Dataset(np.zeros((data.n, 0)), data.y, data.coords, ())
    params = fit_sem(empty, knots=knots, cfg=SemConfig(seed=0, restarts=1,
                                                       max_evals=800))
    assert params.beta.shape == (0,)
    pred = predict_sem(params, empty, np.zeros((20, 0)), data.coords[:20])
    assert np.all(np.isfinite(pred))


def test_sem_coord_dims_two_ignores_height():
    data, knots, _ = _sem_sim(n=100, m=10, seed=39)
    cfg = SemConfig(seed=0, restarts=1, max_evals=800, coord_dims=2)
    params = fit_sem(data, knots=knots, cfg=cfg)
    assert params.knots.shape[1] == 2
    shifted = data.coords.copy()
    shifted[:, 2] += 500.0                          # height must not matter
    a = predict_sem(params, data, data.X[:10], data.coords[:10])
    b = predict_sem(params, data, data.X[:10], shifted[:10])
    assert np.allclose(a, b, atol=1e-12)


def test_sem_input_validation():
    data, _, _ = _sem_sim(n=40, m=5, seed=40)
    small = data.subset(np.arange(20))
    with pytest.raises(ModelError, match="n >= 30"):
        fit_sem(small)
    with pytest.raises(ModelError, match="unknown link"):
        fit_sem(data, link="tobit")
    with pytest.raises(ModelError):
        fit_sem(data, knots=data.coords[:1])        # m < 2
    with pytest.raises(ModelError):
        SemConfig(restarts=0).validate()
    with pytest.raises(ModelError):
        SemConfig(coord_dims=1).validate()


# ---------------------------------------------------------------------------
# serialization


def test_linear_model_roundtrip(tmp_path):
    data, _ = _toy(120, 4, seed=41)
    model = fit_elastic_net(data, ElasticNetConfig(lam=0.02, mix=0.7))
    path = tmp_path / "linear.json"
    from urban3d.models import save_model
    save_model(model, path)
    back = load_model(path)
    assert isinstance(back, LinearModel)
    assert back.intercept == model.intercept
    assert np.array_equal(back.coef, model.coef)
    assert back.feature_names == model.feature_names
    assert (back.lam, back.mix) == (model.lam, model.mix)
    assert np.array_equal(back.predict(data.X), model.predict(data.X))


def test_forest_roundtrip(tmp_path):
    from urban3d.models import save_model
    data = _xor_data(150, seed=42)
    model = fit_random_forest(data, ForestConfig(n_trees=25, seed=3))
    path = tmp_path / "forest.json"
    save_model(model, path)
    back = load_model(path)
    assert np.array_equal(back.predict(data.X), model.predict(data.X))
    assert back.is_classification == model.is_classification
    assert back.config == model.config


def test_sem_roundtrip(tmp_path):
    from urban3d.models import save_model
    data, knots, _ = _sem_sim(n=80, m=8, seed=43)
    params = fit_sem(data, knots=knots, cfg=SemConfig(seed=0, restarts=1,
                                                      max_evals=800))
    path = tmp_path / "sem.json"
    save_model(params, path)
    back = load_model(path)
    assert isinstance(back, SemParams)
    assert back.alpha == params.alpha
    assert np.array_equal(back.beta, params.beta)
    assert (back.sigma2, back.phi, back.tau2) == (params.sigma2, params.phi,
                                                  params.tau2)
    a = predict_sem(params, data, data.X[:10], data.coords[:10])
    b = predict_sem(back, data, data.X[:10], data.coords[:10])
    assert np.array_equal(a, b)


def test_load_model_rejects_junk(tmp_path):
    path = tmp_path / "junk.json"
    path.write_text("{\"format\": \"other\"}", encoding="utf-8")
    with pytest.raises(FormatError):
        load_model(path)
    path.write_text("not json", encoding="utf-8")
    with pytest.raises(FormatError):
        load_model(path)
