"""Save and load fitted models as JSON.

One container for all model kinds:

    {"format": "urban3d-model", "version": 1, "kind": "linear" | "forest" | "sem", ...}

Floats survive a round trip exactly (shortest-repr encoding); integer arrays
keep their dtype on reload.
"""

from __future__ import annotations

import dataclasses
import json
from pathlib import Path

import numpy as np

from ..errors import FormatError
from .forest import ForestConfig, RandomForest
from .linear import LinearModel
from .sem import SemParams

MODEL_FORMAT = "urban3d-model"
MODEL_VERSION = 1


def _arr(a: np.ndarray) -> list:
    return np.asarray(a).tolist()


def _to_dict(model) -> dict:
    if isinstance(model, LinearModel):
        return {"kind": "linear", "intercept": model.intercept, "coef": _arr(model.coef),
                "link": model.link, "feature_names": list(model.feature_names),
                "lam": model.lam, "mix": model.mix}
    if isinstance(model, RandomForest):
        return {"kind": "forest",
                "feat": _arr(model.feat), "thr": _arr(model.thr),
                "left": _arr(model.left), "right": _arr(model.right),
                "value": _arr(model.value), "n_nodes": _arr(model.n_nodes),
                "is_classification": bool(model.is_classification),
                "feature_names": list(model.feature_names),
                "config": dataclasses.asdict(model.config)}
    if isinstance(model, SemParams):
        return {"kind": "sem", "link": model.link, "alpha": model.alpha,
                "beta": _arr(model.beta), "sigma2": model.sigma2, "phi": model.phi,
                "tau2": model.tau2, "knots": _arr(model.knots),
                "w_knots": _arr(model.w_knots),
                "feature_names": list(model.feature_names),
                "coord_dims": model.coord_dims, "nll": model.nll}
    raise FormatError(f"cannot serialize model of type {type(model).__name__}")


def save_model(model, path: str | Path) -> None:
    doc = {"format": MODEL_FORMAT, "version": MODEL_VERSION}
    doc.update(_to_dict(model))
    Path(path).write_text(json.dumps(doc, sort_keys=True, indent=1) + "\n",
                          encoding="utf-8")


def load_model(path: str | Path):
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise FormatError(f"cannot read model file {path}: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("format") != MODEL_FORMAT:
        raise FormatError(f"{path}: not a {MODEL_FORMAT} file")
    if doc.get("version") != MODEL_VERSION:
        raise FormatError(f"{path}: unsupported model version {doc.get('version')!r}")
    kind = doc.get("kind")
    try:
        if kind == "linear":
            return LinearModel(intercept=float(doc["intercept"]),
                               coef=np.asarray(doc["coef"], dtype=np.float64),
                               link=doc["link"],
                               feature_names=tuple(doc["feature_names"]),
                               lam=doc["lam"], mix=doc["mix"])
        if kind == "forest":
            return RandomForest(
                feat=np.asarray(doc["feat"], dtype=np.int32),
                thr=np.asarray(doc["thr"], dtype=np.float64),
                left=np.asarray(doc["left"], dtype=np.int32),
                right=np.asarray(doc["right"], dtype=np.int32),
                value=np.asarray(doc["value"], dtype=np.float64),
                n_nodes=np.asarray(doc["n_nodes"], dtype=np.int64),
                is_classification=bool(doc["is_classification"]),
                feature_names=tuple(doc["feature_names"]),
                config=ForestConfig(**doc["config"]))
        if kind == "sem":
            return SemParams(link=doc["link"], alpha=float(doc["alpha"]),
                             beta=np.asarray(doc["beta"], dtype=np.float64),
                             sigma2=float(doc["sigma2"]), phi=float(doc["phi"]),
                             tau2=float(doc["tau2"]),
                             knots=np.asarray(doc["knots"], dtype=np.float64),
                             w_knots=np.asarray(doc["w_knots"], dtype=np.float64),
                             feature_names=tuple(doc["feature_names"]),
                             coord_dims=int(doc["coord_dims"]),
                             nll=float(doc["nll"]))
    except KeyError as exc:
        raise FormatError(f"{path}: missing model field {exc}") from exc
    raise FormatError(f"{path}: unknown model kind {kind!r}")
