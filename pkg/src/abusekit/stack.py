"""Stacked ensemble: five base classifiers under a logistic-regression meta.

Bases are fitted on the full training set; the meta-classifier is then fitted
on their probability outputs over the same set (no internal cross-validation,
a documented simplification). Meta features are the 5-vector of base
P(abusive) values in the fixed order gpc, mlp100, linsvm, rforest, logreg.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bases import (
    BASE_KINDS,
    LogisticRegressionModel,
    base_from_blobs,
    base_to_blobs,
    fit_base,
    fit_logreg,
)
from .errors import TrainingError
from .serialize import decode_array, encode_array


@dataclass
class StackModel:
    bases: dict[str, object]  # kind -> fitted base model
    meta: LogisticRegressionModel

    def meta_features(self, X: np.ndarray) -> np.ndarray:
        """n x 5 matrix of base P(label = 1), in BASE_KINDS order."""
        return np.column_stack([self.bases[k].predict_proba(X) for k in BASE_KINDS])

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return self.meta.predict_proba(self.meta_features(X))

    def predict(self, X: np.ndarray) -> np.ndarray:
        return (self.predict_proba(X) >= 0.5).astype(np.int64)


def train_stack(X: np.ndarray, y: np.ndarray, seed: int = 0) -> StackModel:
    """Fit all five bases and the meta-classifier.

    Per-base seeds are pre-derived from the run seed so a per-base parallel
    fit would produce the same models as this sequential one.
    """
    rng = np.random.default_rng(seed)
    base_seeds = {kind: int(s) for kind, s in
                  zip(BASE_KINDS, rng.integers(0, 2**31 - 1, size=len(BASE_KINDS)))}
    bases = {kind: fit_base(kind, X, y, seed=base_seeds[kind]) for kind in BASE_KINDS}
    meta_X = np.column_stack([bases[k].predict_proba(X) for k in BASE_KINDS])
    meta = fit_logreg(meta_X, np.asarray(y, dtype=np.int64))
    return StackModel(bases=bases, meta=meta)


def stack_to_envelope(model: StackModel, config: dict | None = None) -> dict:
    blobs = {"meta.weights": encode_array(model.meta.weights),
             "meta.bias": encode_array(np.array([model.meta.bias]))}
    for kind in BASE_KINDS:
        for name, blob in base_to_blobs(kind, model.bases[kind]).items():
            blobs[f"{kind}.{name}"] = blob
    return {"format_version": 1, "kind": "sc", "config": config or {}, "blobs": blobs}


def stack_from_envelope(doc: dict) -> StackModel:
    if doc.get("kind") != "sc":
        raise TrainingError(f"not a stack model envelope: kind={doc.get('kind')!r}")
    blobs = doc["blobs"]
    bases = {}
    for kind in BASE_KINDS:
        prefix = f"{kind}."
        sub = {name[len(prefix):]: blob for name, blob in blobs.items()
               if name.startswith(prefix)}
        bases[kind] = base_from_blobs(kind, sub)
    meta = LogisticRegressionModel(weights=decode_array(blobs["meta.weights"]),
                                   bias=float(decode_array(blobs["meta.bias"])[0]))
    return StackModel(bases=bases, meta=meta)
