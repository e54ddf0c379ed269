"""Synthetic multimodal datasets for end-to-end pipeline checks.

The XOR construction makes fusion provably necessary: the label is the XOR
of two latent bits, one leaked (noisily) into the audio vectors and the
other into the emotion vectors. Either modality alone is statistically
independent of the label, so unimodal classifiers sit near chance while the
fused run can recover the label up to the leak noise.

Like real encoder outputs, the vectors have low intrinsic dimensionality:
each modality is one signal direction (plus optional shared noise factors
and a small iid jitter), so the PCA stage compresses a modality to a
handful of components instead of passing hundreds of independent nuisance
dimensions to the classifier.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .data import DatasetManifest, UtteranceRecord, save_manifest
from .dsp import EMOTION_DIM, write_emotion_cache
from .embeddings import EmbeddingRecord, write_store

AUDIO_DIM = 24
NOISE_SCALE = 0.5
JITTER = 0.01


def _leaked_matrix(rng: np.random.Generator, n: int, dim: int,
                   bits: np.ndarray, noise_rank: int) -> np.ndarray:
    """n x dim matrix carrying `bits` along one latent direction.

    Directions use +-1/sqrt(dim) entries so every ambient dimension carries
    the same energy; per-dimension z-scoring then rescales uniformly instead
    of inflating near-silent dimensions into unit-variance nuisance axes.
    """
    signs = rng.choice([-1.0, 1.0], size=(noise_rank + 1, dim))
    directions = signs / np.sqrt(dim)
    signal_dir = directions[0]
    noise_dirs = directions[1:]
    factors = rng.standard_normal((n, noise_rank)) * NOISE_SCALE
    mat = (2.0 * bits - 1.0)[:, None] * signal_dir[None, :]
    mat += factors @ noise_dirs
    mat += JITTER * rng.standard_normal((n, dim))
    return mat


def make_xor_dataset(directory: str | Path, n: int = 600, flip: float = 0.15,
                     seed: int = 0, noise_rank: int = 0) -> dict:
    """Write manifest + audio store + emotion cache for the XOR task.

    Bit A is leaked into the audio vectors after flipping a `flip` fraction
    of samples (exact count, chosen by the seeded rng); bit B is leaked
    cleanly into the emotion vectors. Label = A xor B, so the best
    achievable accuracy from both modalities is 1 - flip while each single
    modality carries no label information at all. With noise_rank 0 the
    flipped samples are geometrically indistinguishable from clean ones and
    a trained fused classifier lands exactly on that ceiling.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)

    bit_a = rng.integers(0, 2, size=n)
    bit_b = rng.integers(0, 2, size=n)
    labels = bit_a ^ bit_b
    noisy_a = bit_a.copy()
    n_flips = int(round(flip * n))
    flip_idx = rng.choice(n, size=n_flips, replace=False)
    noisy_a[flip_idx] ^= 1

    ids = [f"syn{i:04d}" for i in range(n)]
    audio = _leaked_matrix(rng, n, AUDIO_DIM, noisy_a, noise_rank)
    emotion = _leaked_matrix(rng, n, EMOTION_DIM, bit_b, noise_rank)

    records = tuple(
        UtteranceRecord(id=rid, audio_path=None, label=int(lbl), language="syn")
        for rid, lbl in zip(ids, labels)
    )
    manifest_path = directory / "manifest.csv"
    save_manifest(DatasetManifest(records=records, source=str(manifest_path)),
                  manifest_path)

    audio_dir = directory / "audio_store"
    write_store(
        [EmbeddingRecord(id=rid, modality="audio", data=audio[i].astype(np.float32))
         for i, rid in enumerate(ids)],
        audio_dir,
    )
    emotion_dir = directory / "emotion_cache"
    write_emotion_cache({rid: emotion[i] for i, rid in enumerate(ids)}, emotion_dir)

    return {
        "manifest": str(manifest_path),
        "audio_store": str(audio_dir),
        "emotion_cache": str(emotion_dir),
        "bit_a": bit_a,
        "bit_b": bit_b,
        "noisy_a": noisy_a,
        "labels": labels,
    }


def make_blobs(n: int = 200, dim: int = 2, separation: float = 4.0,
               scale: float = 0.3, seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Two well-separated Gaussian blobs with labels 0/1."""
    rng = np.random.default_rng(seed)
    half = n // 2
    labels = np.array([0] * half + [1] * (n - half), dtype=np.int64)
    centers = np.where(labels[:, None] == 0, -separation / 2.0, separation / 2.0)
    X = rng.normal(0.0, scale, size=(n, dim)) + centers
    return X, labels
