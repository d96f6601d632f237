"""Hold-out evaluation and the tier-by-model ablation grid.

`run_ablation` reproduces the showcase comparison: rows are feature tiers
(Intercept, 1D, 2D, 3D), columns are models, cells are RMSE (rent) or AUC
(PV) on a deterministic hold-out split. Linear-family models (OLS, OLSNet,
Logit, LgNet, SEM) see the monotone-transformed angle features; tree models
take the raw angles; "RF ROSE" balances the training set with a smoothed
bootstrap before fitting. The intercept row fits every model with zero
features, which collapses all non-spatial models to the train-mean (or
base-rate) predictor; the spatial error model still kriges its latent field.

Reports render as CSV (full float precision) and as a Markdown table with
feature checkmarks per tier and a dagger on the best model per row, ties
going to the simpler model. Relative improvement of 3D over the best lower
tier is (RMSE_lower - RMSE_3D)/RMSE_lower for regression and the
skill-over-chance form (AUC_3D - AUC_lower)/(AUC_lower - 0.5) for
classification.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from .errors import ConfigError, ModelError
from .features import FeatureTable, design_matrix, monotone_transform, select_tier
from .models import (Dataset, ElasticNetConfig, ForestConfig, fit_elastic_net,
                     fit_ols, fit_random_forest, fit_sem, predict_sem, rose_sample)
from .models.sem import SemConfig

TIER_ROWS = ("Intercept", "1D", "2D", "3D")
LOWER_TIERS = ("1D", "2D")
LINEAR_FAMILY = ("OLS", "OLSNet", "Logit", "LgNet", "SEM")

REGRESSION_MODELS = ("SEM", "RF", "OLS", "OLSNet")
CLASSIFICATION_MODELS = ("SEM", "RF", "RF ROSE", "SVM", "Logit", "LgNet")
DEFAULT_MODELS = {"rent": ("SEM", "RF", "OLS", "OLSNet"),
                  "pv": ("SEM", "RF", "RF ROSE", "Logit", "LgNet")}
# tie-breaking: earlier = simpler
SIMPLICITY = {"rent": ("OLS", "OLSNet", "RF", "SEM"),
              "pv": ("Logit", "LgNet", "RF", "RF ROSE", "SEM")}

# plain logistic regression runs as a tiny ridge fit: quasi-separated dummies
# (a rare category with no positive cases) otherwise push the MLE to infinity;
# 1e-4 leaves identified coefficients untouched to ~4 digits and never moves AUC
LOGIT_RIDGE = 1e-4


# ---------------------------------------------------------------------------
# splitting and metrics


@dataclass(frozen=True)
class SplitConfig:
    test_fraction: float = 0.2
    seed: int = 0
    stratify: bool | None = None     # None: stratify iff the outcome is binary

    def validate(self) -> "SplitConfig":
        if not 0.0 < self.test_fraction < 1.0:
            raise ConfigError(f"test_fraction must be in (0, 1), "
                              f"got {self.test_fraction}")
        return self


def split_indices(y: np.ndarray, cfg: SplitConfig) -> tuple[np.ndarray, np.ndarray]:
    """Deterministic (train, test) index split; stratified keeps class ratios.

    Stratification draws round(fraction * n_class) per class, so the test
    ratio matches within one observation; a class that would vanish from
    either side is an error.
    """
    cfg = cfg.validate()
    y = np.asarray(y, dtype=np.float64)
    n = len(y)
    if n < 10:
        raise ConfigError(f"split needs n >= 10, got {n}")
    binary = set(np.unique(y).tolist()) <= {0.0, 1.0}
    stratify = binary if cfg.stratify is None else cfg.stratify
    if stratify and not binary:
        raise ConfigError("stratified split needs a binary outcome")
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed))
    perm = rng.permutation(n)
    if not stratify:
        k = int(round(cfg.test_fraction * n))
        if k < 1 or k > n - 1:
            raise ConfigError(f"test fraction {cfg.test_fraction} leaves an "
                              f"empty side at n={n}")
        test = perm[:k]
    else:
        parts = []
        for cls in (0.0, 1.0):
            members = perm[y[perm] == cls]
            k = int(round(cfg.test_fraction * len(members)))
            if k < 1 or k > len(members) - 1:
                raise ConfigError(f"class {cls:g} would be absent from one side "
                                  f"of the split ({len(members)} members, "
                                  f"fraction {cfg.test_fraction})")
            parts.append(members[:k])
        test = np.concatenate(parts)
    mask = np.ones(n, dtype=bool)
    mask[test] = False
    return np.flatnonzero(mask), np.sort(test)


def split(data: Dataset, cfg: SplitConfig = SplitConfig()) -> tuple[Dataset, Dataset]:
    tr, te = split_indices(data.y, cfg)
    return data.subset(tr), data.subset(te)


def rmse(y, y_hat) -> float:
    y = np.asarray(y, dtype=np.float64)
    y_hat = np.asarray(y_hat, dtype=np.float64)
    if y.shape != y_hat.shape or y.size < 1:
        raise ConfigError("rmse needs two equal-length, non-empty vectors")
    return float(np.sqrt(np.mean((y - y_hat) ** 2)))


def auc(y, scores) -> float:
    """Mann-Whitney AUC with average ranks (half credit for ties)."""
    y = np.asarray(y, dtype=np.float64)
    s = np.asarray(scores, dtype=np.float64)
    if y.shape != s.shape:
        raise ConfigError("auc needs equal-length vectors")
    pos = y == 1.0
    n_pos, n_neg = int(pos.sum()), int((~pos).sum())
    if n_pos == 0 or n_neg == 0:
        raise ConfigError("auc needs both classes present")
    ranks = rankdata(s, method="average")
    return float((ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


# ---------------------------------------------------------------------------
# ablation grid


@dataclass
class AblationReport:
    showcase: str
    metric: str                         # "RMSE" | "AUC"
    models: tuple[str, ...]
    values: np.ndarray                  # (len(TIER_ROWS), len(models))
    feature_names: tuple[str, ...]      # 3D predictor list, rendering order
    tier_features: dict                 # tier row -> tuple of checked features
    n_train: int
    n_test: int
    seed: int

    @property
    def tiers(self) -> tuple[str, ...]:
        return TIER_ROWS

    def value(self, tier: str, model: str) -> float:
        return float(self.values[TIER_ROWS.index(tier), self.models.index(model)])

    def best_model(self, tier: str) -> str:
        """Row-best model; ties go to the simpler model."""
        row = self.values[TIER_ROWS.index(tier)]
        best = row.min() if self.metric == "RMSE" else row.max()
        order = [m for m in SIMPLICITY[self.showcase] if m in self.models]
        order += [m for m in self.models if m not in order]
        for name in order:
            if row[self.models.index(name)] == best:
                return name
        raise ModelError("empty report row")            # pragma: no cover

    def to_csv(self) -> str:
        lines = [f"# showcase={self.showcase} metric={self.metric} "
                 f"seed={self.seed} n_train={self.n_train} n_test={self.n_test}",
                 ",".join(("tier",) + self.models)]
        for i, tier in enumerate(TIER_ROWS):
            lines.append(",".join([tier] + [repr(float(v)) for v in self.values[i]]))
        imp = relative_improvement(self)
        lines.append(",".join(["improvement_3d_vs_lower_pct"]
                              + [repr(float(imp[m])) for m in self.models]))
        return "\n".join(lines) + "\n"

    def to_markdown(self) -> str:
        heads = ["Model"] + list(self.feature_names) + list(self.models)
        rows = []
        for i, tier in enumerate(TIER_ROWS):
            checked = set(self.tier_features.get(tier, ()))
            cells = [tier] + ["✓" if f in checked else "" for f in self.feature_names]
            best = self.best_model(tier)
            for m, v in zip(self.models, self.values[i]):
                cells.append(f"{v:.4f}†" if m == best else f"{v:.4f}")
            rows.append(cells)
        widths = [max(len(h), max(len(r[j]) for r in rows))
                  for j, h in enumerate(heads)]
        def fmt(cells):
            return "| " + " | ".join(c.ljust(w) for c, w in zip(cells, widths)) + " |"
        out = [fmt(heads), "| " + " | ".join("-" * w for w in widths) + " |"]
        out += [fmt(r) for r in rows]
        out.append("")
        out.append(f"Observations: {self.n_train + self.n_test} "
                   f"({self.n_train} train, {self.n_test} test, seed {self.seed})")
        out.append(f"Reported performance measure: {self.metric}")
        imp = relative_improvement(self)
        out.append("Improvement of 3D over best lower tier: "
                   + ", ".join(f"{m} {imp[m]:.1f}%" for m in self.models))
        out.append("† best prediction method in the tier row")
        return "\n".join(out) + "\n"


def relative_improvement(report: AblationReport) -> dict[str, float]:
    """Percent gain of the 3D tier over the best of 1D/2D, per model.

    Regression compares RMSE reductions; classification compares AUC gains
    relative to skill over chance (denominator AUC_lower - 0.5).
    """
    i3 = TIER_ROWS.index("3D")
    lower_rows = [TIER_ROWS.index(t) for t in LOWER_TIERS]
    out = {}
    for j, model in enumerate(report.models):
        v3 = float(report.values[i3, j])
        lows = [float(report.values[i, j]) for i in lower_rows]
        if report.metric == "RMSE":
            low = min(lows)
            out[model] = 100.0 * (low - v3) / low
        else:
            low = max(lows)
            out[model] = 100.0 * (v3 - low) / max(low - 0.5, 1e-12)
    return out


def _tier_columns(table: FeatureTable, tier: str) -> tuple[str, ...]:
    return () if tier == "Intercept" else select_tier(table, tier)


def _fit_and_score(model: str, tier: str, X_tr, X_te, names, cmask, y_tr,
                   coords_tr, coords_te, is_class: bool, forest: ForestConfig,
                   sem: SemConfig, enet: ElasticNetConfig) -> np.ndarray:
    n_te = len(X_te)
    if tier == "Intercept" and model != "SEM":
        # zero features: everything non-spatial collapses to the train mean
        return np.full(n_te, float(y_tr.mean()))
    ds_tr = Dataset(X_tr, y_tr, coords_tr, names)
    if model == "OLS":
        return fit_ols(ds_tr).predict(X_te)
    if model == "OLSNet":
        return fit_elastic_net(ds_tr, enet).predict(X_te)
    if model == "Logit":
        cfg = ElasticNetConfig(lam=LOGIT_RIDGE, mix=0.0, tol=enet.tol,
                               max_iter=enet.max_iter)
        return fit_elastic_net(ds_tr, cfg, link="logit").predict(X_te)
    if model == "LgNet":
        return fit_elastic_net(ds_tr, enet, link="logit").predict(X_te)
    if model == "RF":
        return fit_random_forest(ds_tr, forest).predict(X_te)
    if model == "RF ROSE":
        balanced = rose_sample(ds_tr, seed=forest.seed, cat_mask=cmask)
        return fit_random_forest(balanced, forest).predict(X_te)
    if model == "SEM":
        link = "logit" if is_class else "identity"
        params = fit_sem(ds_tr, link=link, cfg=sem)
        return predict_sem(params, ds_tr, X_te, coords_te)
    raise ConfigError(f"unknown model {model!r}")


def run_ablation(table: FeatureTable, models: tuple[str, ...] | None = None,
                 split_cfg: SplitConfig = SplitConfig(), *,
                 forest: ForestConfig = ForestConfig(),
                 sem: SemConfig = SemConfig(),
                 enet: ElasticNetConfig = ElasticNetConfig()) -> AblationReport:
    """Fill the tier-by-model grid on one deterministic hold-out split."""
    showcase = table.showcase
    if showcase not in DEFAULT_MODELS:
        raise ConfigError(f"ablation needs a rent or pv table, got {showcase!r}")
    is_class = showcase == "pv"
    allowed = CLASSIFICATION_MODELS if is_class else REGRESSION_MODELS
    models = tuple(models) if models is not None else DEFAULT_MODELS[showcase]
    unknown = [m for m in models if m not in allowed]
    if unknown:
        raise ConfigError(f"models {unknown} not available for {showcase} "
                          f"(choose from {allowed})")
    if "SVM" in models:
        raise ConfigError("SVM is not implemented; drop it from the model list")

    y = table.outcome_numeric()
    cfg = SplitConfig(split_cfg.test_fraction, split_cfg.seed,
                      is_class if split_cfg.stratify is None else split_cfg.stratify)
    tr, te = split_indices(y, cfg)
    y_tr, y_te = y[tr], y[te]
    coords_tr, coords_te = table.coords[tr], table.coords[te]
    mono = monotone_transform(table) if is_class else table

    values = np.full((len(TIER_ROWS), len(models)), np.nan)
    tier_features = {}
    for i, tier in enumerate(TIER_ROWS):
        cols = _tier_columns(table, tier)
        tier_features[tier] = cols
        X_lin, names_lin, _ = design_matrix(mono, cols, style="linear")
        X_for, names_for, cmask = design_matrix(table, cols, style="forest")
        for j, model in enumerate(models):
            linear = model in LINEAR_FAMILY
            X = X_lin if linear else X_for
            names = names_lin if linear else names_for
            try:
                scores = _fit_and_score(
                    model, tier, X[tr], X[te], names, cmask, y_tr,
                    coords_tr, coords_te, is_class, forest, sem, enet)
                values[i, j] = auc(y_te, scores) if is_class else rmse(y_te, scores)
            except Exception as exc:
                raise ModelError(f"tier {tier}, model {model}: {exc}") from exc
    if not np.isfinite(values).all():
        raise ModelError("ablation grid has non-finite cells")

    return AblationReport(
        showcase=showcase, metric="AUC" if is_class else "RMSE", models=models,
        values=values, feature_names=select_tier(table, "3D"),
        tier_features=tier_features, n_train=len(tr), n_test=len(te),
        seed=cfg.seed)
