"""Evaluation protocol: stratified splits, metrics, experiment runs, ablations.

A run assembles per-modality vectors from the configured stores/caches, fits
the fusion model on the training split only, trains the requested classifier
and reports test metrics. Reports are deterministic: everything volatile
(wall-clock timing) stays out of the serialized JSON, which is emitted with
sorted keys and full float precision so identical config + seed reproduces
identical bytes. Metric values are percentages; rounding to two decimals
happens only in the aggregate CSV and console output.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, replace

import numpy as np

from .data import DatasetManifest, load_manifest
from .dsp import read_emotion_cache
from .embeddings import read_store
from .errors import ConfigError, StoreError
from .fusion import fit_fusion
from .mlp import TSP_INPUT_DIM, TrainConfig, train_ac, train_tsp
from .stack import train_stack

MODALITIES = ("audio", "emotion", "text")
CLASSIFIERS = ("ac", "sc", "tsp")
DEFAULT_TRAIN_RATIO = 0.70

_CONFIG_KEYS = {
    "language", "modalities", "classifier", "use_pca", "seed", "manifest",
    "audio_store", "text_store", "emotion_cache", "train_ratio", "train",
}
_TRAIN_KEYS = {"lr", "dropout", "batch_size", "epochs"}


@dataclass(frozen=True)
class ExperimentConfig:
    manifest: str
    modalities: tuple[str, ...]
    classifier: str = "ac"
    language: str | None = None
    use_pca: bool = True
    seed: int = 0
    audio_store: str | None = None
    text_store: str | None = None
    emotion_cache: str | None = None
    train_ratio: float = DEFAULT_TRAIN_RATIO
    train: TrainConfig | None = None  # optional hyperparameter overrides

    def validated(self) -> "ExperimentConfig":
        mods = tuple(sorted(set(self.modalities), key=MODALITIES.index))
        if not mods:
            raise ConfigError("modality set must be non-empty")
        unknown = set(mods) - set(MODALITIES)
        if unknown:
            raise ConfigError(f"unknown modalities: {sorted(unknown)}")
        if self.classifier not in CLASSIFIERS:
            raise ConfigError(f"classifier must be one of {CLASSIFIERS}, got {self.classifier!r}")
        if self.classifier == "tsp" and mods != ("text",):
            raise ConfigError("the two-stage classifier requires modalities = [text]")
        if not 0.0 < self.train_ratio < 1.0:
            raise ConfigError("train_ratio must be in (0, 1)")
        for mod, path_attr in (("audio", "audio_store"), ("text", "text_store"),
                               ("emotion", "emotion_cache")):
            if mod in mods and getattr(self, path_attr) is None:
                raise ConfigError(f"modality {mod!r} requires {path_attr} to be set")
        return replace(self, modalities=mods)

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        unknown = set(doc) - _CONFIG_KEYS
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        if "manifest" not in doc or "modalities" not in doc:
            raise ConfigError("config requires 'manifest' and 'modalities'")
        train = None
        if doc.get("train") is not None:
            bad = set(doc["train"]) - _TRAIN_KEYS
            if bad:
                raise ConfigError(f"unknown train keys: {sorted(bad)}")
            train = TrainConfig(seed=int(doc.get("seed", 0)), **doc["train"])
        return cls(
            manifest=doc["manifest"],
            modalities=tuple(doc["modalities"]),
            classifier=doc.get("classifier", "ac"),
            language=doc.get("language"),
            use_pca=bool(doc.get("use_pca", True)),
            seed=int(doc.get("seed", 0)),
            audio_store=doc.get("audio_store"),
            text_store=doc.get("text_store"),
            emotion_cache=doc.get("emotion_cache"),
            train_ratio=float(doc.get("train_ratio", DEFAULT_TRAIN_RATIO)),
            train=train,
        ).validated()

    def to_dict(self) -> dict:
        doc = {
            "manifest": self.manifest,
            "modalities": list(self.modalities),
            "classifier": self.classifier,
            "language": self.language,
            "use_pca": self.use_pca,
            "seed": self.seed,
            "audio_store": self.audio_store,
            "text_store": self.text_store,
            "emotion_cache": self.emotion_cache,
            "train_ratio": self.train_ratio,
        }
        if self.train is not None:
            doc["train"] = {
                "lr": self.train.lr,
                "dropout": self.train.dropout,
                "batch_size": self.train.batch_size,
                "epochs": self.train.epochs,
            }
        return doc

    def train_config(self) -> TrainConfig:
        if self.train is not None:
            return replace(self.train, seed=self.seed)
        return TrainConfig(seed=self.seed)


@dataclass
class EvalReport:
    language: str
    modalities: tuple[str, ...]
    classifier: str
    use_pca: bool
    seed: int
    accuracy: float  # percent
    f1: float  # macro, percent
    per_class: dict  # {"0": {"precision": .., "recall": ..}, "1": {...}}
    confusion: dict  # {"tn": .., "fp": .., "fn": .., "tp": ..}
    fused_dim: int
    per_modality_k: dict
    n_train: int
    n_test: int
    test_ids: list[str]
    config: dict
    timing_s: float = 0.0  # excluded from serialized reports

    def to_json(self) -> str:
        doc = {
            "language": self.language,
            "modalities": list(self.modalities),
            "classifier": self.classifier,
            "use_pca": self.use_pca,
            "seed": self.seed,
            "accuracy": self.accuracy,
            "f1": self.f1,
            "per_class": self.per_class,
            "confusion": self.confusion,
            "fused_dim": self.fused_dim,
            "per_modality_k": self.per_modality_k,
            "n_train": self.n_train,
            "n_test": self.n_test,
            "test_ids": self.test_ids,
            "config": self.config,
        }
        return json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n"

    def csv_row(self) -> str:
        mods = "+".join(self.modalities)
        return (f"{self.language},{mods},{self.classifier},{self.use_pca},"
                f"{self.accuracy:.2f},{self.f1:.2f},{self.seed}")


CSV_HEADER = "language,modality_set,classifier,use_pca,accuracy,f1,seed"


def stratified_split(manifest: DatasetManifest, ratio: float = DEFAULT_TRAIN_RATIO,
                     seed: int = 0) -> DatasetManifest:
    """Assign train/test splits per class; pre-assigned records are untouched."""
    unassigned = [r for r in manifest.records if r.split == "unassigned"]
    if not unassigned:
        raise ConfigError("stratified_split: no unassigned records")
    labels = {r.label for r in unassigned}
    if labels != {0, 1}:
        raise ConfigError("stratified_split: both classes must be present")
    rng = np.random.default_rng(seed)
    assignment: dict[str, str] = {}
    for cls in (0, 1):
        members = [r.id for r in unassigned if r.label == cls]
        order = rng.permutation(len(members))
        n_train = int(np.floor(ratio * len(members) + 0.5))
        for rank, idx in enumerate(order):
            assignment[members[idx]] = "train" if rank < n_train else "test"
    new_records = tuple(
        replace(r, split=assignment[r.id]) if r.id in assignment else r
        for r in manifest.records
    )
    return manifest.with_records(new_records)


def confusion_counts(predictions: np.ndarray, labels: np.ndarray) -> dict:
    predictions = np.asarray(predictions, dtype=np.int64)
    labels = np.asarray(labels, dtype=np.int64)
    return {
        "tn": int(np.sum((predictions == 0) & (labels == 0))),
        "fp": int(np.sum((predictions == 1) & (labels == 0))),
        "fn": int(np.sum((predictions == 0) & (labels == 1))),
        "tp": int(np.sum((predictions == 1) & (labels == 1))),
    }


def metrics(predictions, labels) -> tuple[float, float]:
    """(accuracy %, macro F1 %).

    Per-class F1 is 0 when precision + recall is 0, which also covers a class
    with neither support nor predictions.
    """
    predictions = np.asarray(predictions, dtype=np.int64)
    labels = np.asarray(labels, dtype=np.int64)
    if predictions.shape != labels.shape or predictions.size < 1:
        raise ConfigError("metrics: predictions and labels must have equal length >= 1")
    accuracy = 100.0 * float(np.mean(predictions == labels))
    f1s = []
    for cls in (0, 1):
        tp = int(np.sum((predictions == cls) & (labels == cls)))
        fp = int(np.sum((predictions == cls) & (labels != cls)))
        fn = int(np.sum((predictions != cls) & (labels == cls)))
        precision = tp / (tp + fp) if tp + fp > 0 else 0.0
        recall = tp / (tp + fn) if tp + fn > 0 else 0.0
        f1s.append(2 * precision * recall / (precision + recall)
                   if precision + recall > 0 else 0.0)
    return accuracy, 100.0 * float(np.mean(f1s))


def _per_class_stats(predictions: np.ndarray, labels: np.ndarray) -> dict:
    stats = {}
    for cls in (0, 1):
        tp = int(np.sum((predictions == cls) & (labels == cls)))
        fp = int(np.sum((predictions == cls) & (labels != cls)))
        fn = int(np.sum((predictions != cls) & (labels == cls)))
        stats[str(cls)] = {
            "precision": tp / (tp + fp) if tp + fp > 0 else 0.0,
            "recall": tp / (tp + fn) if tp + fn > 0 else 0.0,
        }
    return stats


class VectorSource:
    """Pooled per-utterance vectors for the configured modalities."""

    def __init__(self, config: ExperimentConfig):
        self.sources = {}
        if "audio" in config.modalities:
            self.sources["audio"] = read_store(config.audio_store, "audio")
        if "text" in config.modalities:
            self.sources["text"] = read_store(config.text_store, "text")
        if "emotion" in config.modalities:
            self.sources["emotion"] = read_emotion_cache(config.emotion_cache)

    def vector(self, modality: str, rid: str) -> np.ndarray:
        src = self.sources[modality]
        if modality == "emotion":
            if rid not in src:
                raise StoreError(f"emotion cache has no entry for id {rid!r}")
            return src[rid]
        if rid not in src:
            raise StoreError(f"{modality} store has no entry for id {rid!r}")
        return src.pooled(rid)

    def matrix(self, modality: str, ids: list[str]) -> np.ndarray:
        return np.vstack([self.vector(modality, rid) for rid in ids])


def resolve_split(config: ExperimentConfig) -> DatasetManifest:
    manifest = load_manifest(config.manifest)
    if config.language is not None:
        manifest = manifest.filter_language(config.language)
    if any(r.split == "unassigned" for r in manifest.records):
        manifest = stratified_split(manifest, config.train_ratio, config.seed)
    return manifest


def run_experiment(config: ExperimentConfig,
                   manifest: DatasetManifest | None = None) -> EvalReport:
    """Fit fusion on train, train the classifier, evaluate on test.

    Passing a pre-split manifest pins the split (used by ablations so every
    row shares identical test ids); otherwise the manifest is loaded from the
    config and split with the config seed.
    """
    config = config.validated()
    started = time.monotonic()
    if manifest is None:
        manifest = resolve_split(config)
    train_records = manifest.by_split("train")
    test_records = manifest.by_split("test")
    if not train_records or not test_records:
        raise ConfigError("run_experiment: both train and test splits must be non-empty")

    source = VectorSource(config)
    train_ids = [r.id for r in train_records]
    test_ids = [r.id for r in test_records]
    y_train = np.array([r.label for r in train_records], dtype=np.int64)
    y_test = np.array([r.label for r in test_records], dtype=np.int64)

    if config.classifier == "tsp":
        X_train = source.matrix("text", train_ids)
        X_test = source.matrix("text", test_ids)
        if X_train.shape[1] != TSP_INPUT_DIM:
            raise ConfigError(
                f"two-stage classifier expects {TSP_INPUT_DIM}-dim text vectors, "
                f"got {X_train.shape[1]}"
            )
        model = train_tsp(X_train, y_train, config.train_config())
        fused_dim = TSP_INPUT_DIM
        per_k = {"text": TSP_INPUT_DIM}
    else:
        train_mats = {m: source.matrix(m, train_ids) for m in config.modalities}
        fusion = fit_fusion(train_mats, use_pca=config.use_pca)
        X_train = fusion.transform_matrix(train_mats)
        X_test = fusion.transform_matrix({m: source.matrix(m, test_ids)
                                          for m in config.modalities})
        fused_dim = fusion.fused_dim
        per_k = fusion.per_modality_k()
        if config.classifier == "ac":
            model = train_ac(X_train, y_train, config.train_config())
        else:
            model = train_stack(X_train, y_train, seed=config.seed)

    predictions = model.predict(X_test)
    accuracy, f1 = metrics(predictions, y_test)
    language = config.language or (manifest.languages()[0] if len(manifest.languages()) == 1
                                   else "all")
    return EvalReport(
        language=language,
        modalities=config.modalities,
        classifier=config.classifier,
        use_pca=config.use_pca,
        seed=config.seed,
        accuracy=accuracy,
        f1=f1,
        per_class=_per_class_stats(predictions, y_test),
        confusion=confusion_counts(predictions, y_test),
        fused_dim=int(fused_dim),
        per_modality_k={k: int(v) for k, v in per_k.items()},
        n_train=len(train_ids),
        n_test=len(test_ids),
        test_ids=test_ids,
        config=config.to_dict(),
        timing_s=time.monotonic() - started,
    )


ABLATION_COLUMNS = ("audio", "emo", "text", "all-AC", "all-SC")


def run_ablation(config: ExperimentConfig) -> dict[str, EvalReport]:
    """Per-modality and all-modality runs over one shared split.

    Columns mirror the ablation grid: audio, emo, text (each with the MLP
    head) plus all modalities under both classifier architectures.
    """
    config = config.validated()
    if config.classifier == "tsp":
        raise ConfigError("ablation covers the ac/sc classifiers only")
    manifest = resolve_split(config)
    setups = {
        "audio": (("audio",), "ac"),
        "emo": (("emotion",), "ac"),
        "text": (("text",), "ac"),
        "all-AC": (("audio", "emotion", "text"), "ac"),
        "all-SC": (("audio", "emotion", "text"), "sc"),
    }
    reports = {}
    for column, (mods, classifier) in setups.items():
        sub = replace(config, modalities=mods, classifier=classifier).validated()
        reports[column] = run_experiment(sub, manifest=manifest)
    return reports


def ablation_grid_csv(reports: dict[str, EvalReport]) -> str:
    """Accuracy grid, one row per language, columns as in ABLATION_COLUMNS."""
    language = reports[ABLATION_COLUMNS[0]].language
    header = "language," + ",".join(ABLATION_COLUMNS)
    row = language + "," + ",".join(f"{reports[c].accuracy:.2f}" for c in ABLATION_COLUMNS)
    return header + "\n" + row + "\n"
