"""Per-modality z-score normalization, PCA at a variance target, concatenation.

Statistics are fitted on the training split only and frozen for transforms;
test vectors never leak into the fit. PCA is applied per modality and the
projected features are concatenated in the fixed order audio, emotion, text.
The component count is the smallest k whose cumulative explained-variance
ratio reaches the target (0.95 by default).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .serialize import decode_array, encode_array

MODALITY_ORDER = ("audio", "emotion", "text")
STD_FLOOR = 1e-8
DEFAULT_VARIANCE_TARGET = 0.95


@dataclass(frozen=True)
class ZScoreParams:
    mean: np.ndarray
    std: np.ndarray  # floored at STD_FLOOR

    def transform(self, x: np.ndarray) -> np.ndarray:
        return (np.asarray(x, dtype=np.float64) - self.mean) / self.std


@dataclass(frozen=True)
class PCAModel:
    components: np.ndarray  # k x dim, orthonormal rows, descending eigenvalue
    explained_variance_ratio: np.ndarray  # retained k ratios
    all_ratios: np.ndarray  # full spectrum, sums to 1
    all_eigenvalues: np.ndarray  # full covariance spectrum, descending
    mean: np.ndarray  # mean of the (already z-scored) fit matrix

    @property
    def k(self) -> int:
        return self.components.shape[0]

    def transform(self, x: np.ndarray) -> np.ndarray:
        return (np.asarray(x, dtype=np.float64) - self.mean) @ self.components.T


def fit_zscore(train: np.ndarray) -> ZScoreParams:
    """Per-dimension mean and population standard deviation (floored)."""
    train = np.asarray(train, dtype=np.float64)
    if train.ndim != 2 or train.shape[0] < 2:
        raise ConfigError("fit_zscore needs an n x dim matrix with n >= 2")
    if not np.all(np.isfinite(train)):
        raise ConfigError("fit_zscore: non-finite training values")
    mean = train.mean(axis=0)
    std = np.maximum(train.std(axis=0), STD_FLOOR)
    return ZScoreParams(mean=mean, std=std)


def fit_pca(train: np.ndarray, variance_target: float = DEFAULT_VARIANCE_TARGET) -> PCAModel:
    """PCA via symmetric eigendecomposition of the covariance (divisor n-1).

    Keeps the smallest k with cumulative ratio >= variance_target, capped at
    min(n-1, dim). Component signs are fixed so each row's largest-magnitude
    entry is positive.
    """
    train = np.asarray(train, dtype=np.float64)
    if train.ndim != 2 or train.shape[0] < 2:
        raise ConfigError("fit_pca needs an n x dim matrix with n >= 2")
    if not np.all(np.isfinite(train)):
        raise ConfigError("fit_pca: non-finite training values")
    if not 0.0 < variance_target <= 1.0:
        raise ConfigError(f"variance target must be in (0, 1], got {variance_target}")
    n, dim = train.shape
    mean = train.mean(axis=0)
    centered = train - mean
    cov = (centered.T @ centered) / (n - 1)
    eigvals, eigvecs = np.linalg.eigh(cov)
    order = np.argsort(eigvals)[::-1]
    eigvals = np.maximum(eigvals[order], 0.0)
    components = eigvecs[:, order].T  # rows are components
    total = eigvals.sum()
    if total <= 0.0:
        raise ConfigError("fit_pca: training matrix has zero variance")
    ratios = eigvals / total
    cumulative = np.cumsum(ratios)
    k = int(np.searchsorted(cumulative, variance_target - 1e-12) + 1)
    k = max(1, min(k, min(n - 1, dim)))
    # Deterministic sign: largest-|entry| of each component is positive.
    flips = np.sign(components[np.arange(dim), np.abs(components).argmax(axis=1)])
    flips[flips == 0] = 1.0
    components = components * flips[:, None]
    return PCAModel(
        components=components[:k],
        explained_variance_ratio=ratios[:k],
        all_ratios=ratios,
        all_eigenvalues=eigvals,
        mean=mean,
    )


@dataclass(frozen=True)
class ModalityFusion:
    name: str
    zscore: ZScoreParams
    pca: PCAModel | None

    @property
    def in_dim(self) -> int:
        return self.zscore.mean.size

    @property
    def out_dim(self) -> int:
        return self.pca.k if self.pca is not None else self.in_dim

    def transform(self, x: np.ndarray) -> np.ndarray:
        z = self.zscore.transform(x)
        return self.pca.transform(z) if self.pca is not None else z


@dataclass(frozen=True)
class FusionModel:
    modalities: tuple[ModalityFusion, ...]  # in MODALITY_ORDER

    @property
    def fused_dim(self) -> int:
        return sum(m.out_dim for m in self.modalities)

    def modality_names(self) -> tuple[str, ...]:
        return tuple(m.name for m in self.modalities)

    def per_modality_k(self) -> dict[str, int]:
        return {m.name: m.out_dim for m in self.modalities}

    def transform(self, vectors: dict[str, np.ndarray]) -> np.ndarray:
        """z-score, project and concatenate one vector per fitted modality."""
        parts = []
        for mod in self.modalities:
            if mod.name not in vectors:
                raise ConfigError(f"fusion transform: modality {mod.name!r} missing")
            vec = np.asarray(vectors[mod.name], dtype=np.float64)
            if vec.shape != (mod.in_dim,):
                raise ConfigError(
                    f"fusion transform: modality {mod.name!r} expects dim "
                    f"{mod.in_dim}, got {vec.shape}"
                )
            parts.append(mod.transform(vec))
        return np.concatenate(parts)

    def transform_matrix(self, matrices: dict[str, np.ndarray]) -> np.ndarray:
        parts = []
        for mod in self.modalities:
            if mod.name not in matrices:
                raise ConfigError(f"fusion transform: modality {mod.name!r} missing")
            mat = np.asarray(matrices[mod.name], dtype=np.float64)
            if mat.ndim != 2 or mat.shape[1] != mod.in_dim:
                raise ConfigError(
                    f"fusion transform: modality {mod.name!r} expects n x {mod.in_dim}"
                )
            parts.append(mod.transform(mat))
        return np.hstack(parts)


def fit_fusion(train: dict[str, np.ndarray], use_pca: bool = True,
               variance_target: float = DEFAULT_VARIANCE_TARGET) -> FusionModel:
    """Fit z-score (+ optional PCA) per modality on training matrices."""
    unknown = set(train) - set(MODALITY_ORDER)
    if unknown:
        raise ConfigError(f"unknown modalities: {sorted(unknown)}")
    if not train:
        raise ConfigError("fit_fusion needs at least one modality")
    fitted = []
    for name in MODALITY_ORDER:
        if name not in train:
            continue
        matrix = np.asarray(train[name], dtype=np.float64)
        zs = fit_zscore(matrix)
        pca = fit_pca(zs.transform(matrix), variance_target) if use_pca else None
        fitted.append(ModalityFusion(name=name, zscore=zs, pca=pca))
    return FusionModel(modalities=tuple(fitted))


def apply_fusion(model: FusionModel, vectors: dict[str, np.ndarray]) -> np.ndarray:
    return model.transform(vectors)


# --- serialization ---------------------------------------------------------

FUSION_FORMAT_VERSION = 1


def fusion_to_json(model: FusionModel) -> str:
    mods = []
    for mod in model.modalities:
        entry = {
            "name": mod.name,
            "zscore": {
                "mean": encode_array(mod.zscore.mean),
                "std": encode_array(mod.zscore.std),
            },
            "pca": None,
        }
        if mod.pca is not None:
            entry["pca"] = {
                "components": encode_array(mod.pca.components),
                "explained_variance_ratio": encode_array(mod.pca.explained_variance_ratio),
                "all_ratios": encode_array(mod.pca.all_ratios),
                "all_eigenvalues": encode_array(mod.pca.all_eigenvalues),
                "mean": encode_array(mod.pca.mean),
            }
        mods.append(entry)
    return json.dumps({"format_version": FUSION_FORMAT_VERSION, "modalities": mods},
                      sort_keys=True)


def fusion_from_json(text: str) -> FusionModel:
    doc = json.loads(text)
    if doc.get("format_version") != FUSION_FORMAT_VERSION:
        raise ConfigError(f"unsupported fusion format version {doc.get('format_version')}")
    mods = []
    for entry in doc["modalities"]:
        zs = ZScoreParams(mean=decode_array(entry["zscore"]["mean"]),
                          std=decode_array(entry["zscore"]["std"]))
        pca = None
        if entry["pca"] is not None:
            pca = PCAModel(
                components=decode_array(entry["pca"]["components"]),
                explained_variance_ratio=decode_array(entry["pca"]["explained_variance_ratio"]),
                all_ratios=decode_array(entry["pca"]["all_ratios"]),
                all_eigenvalues=decode_array(entry["pca"]["all_eigenvalues"]),
                mean=decode_array(entry["pca"]["mean"]),
            )
        mods.append(ModalityFusion(name=entry["name"], zscore=zs, pca=pca))
    return FusionModel(modalities=tuple(mods))


def save_fusion(model: FusionModel, path: str | Path) -> None:
    Path(path).write_text(fusion_to_json(model))


def load_fusion(path: str | Path) -> FusionModel:
    return fusion_from_json(Path(path).read_text())
