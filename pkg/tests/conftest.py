import json
from pathlib import Path

import numpy as np
import pytest

DATA_DIR = Path(__file__).parent / "data"
FIXTURES_DIR = DATA_DIR / "fixtures"
GOLDENS_DIR = DATA_DIR / "goldens"

FIXTURE_WAVS = {
    "sine440": "sine440_22050.wav",
    "chirp": "chirp.wav",
    "c_major_chord": "c_major_chord.wav",
    "speech_like": "speech_like.wav",
    "silence": "silence.wav",
}


@pytest.fixture(scope="session")
def goldens_manifest() -> dict:
    return json.loads((GOLDENS_DIR / "manifest.json").read_text())


def load_golden(manifest: dict, key: str) -> np.ndarray:
    entry = manifest["fixtures"][key]
    raw = np.frombuffer((GOLDENS_DIR / entry["file"]).read_bytes(),
                        dtype=entry.get("dtype", "<f4"))
    return raw.reshape(entry["shape"]).astype(np.float64)


def fixture_wav_path(name: str) -> Path:
    return FIXTURES_DIR / FIXTURE_WAVS[name]


def build_tiny_dataset(root: Path, n: int = 24, audio_dim: int = 6,
                       text_dim: int = 16, emotion_dim: int = 8,
                       seed: int = 0) -> dict:
    """Separable toy dataset with all three modality sources on disk.

    Every modality carries the label in its first coordinate, so even a few
    training epochs classify it perfectly.
    """
    from abusekit.data import DatasetManifest, UtteranceRecord, save_manifest
    from abusekit.dsp import write_emotion_cache
    from abusekit.embeddings import EmbeddingRecord, write_store

    rng = np.random.default_rng(seed)
    labels = np.array([0, 1] * (n // 2) + [0] * (n % 2))
    ids = [f"t{i:03d}" for i in range(n)]
    signal = 3.0 * (2.0 * labels - 1.0)

    def leaked(dim):
        mat = 0.3 * rng.standard_normal((n, dim))
        mat[:, 0] += signal
        return mat

    root.mkdir(parents=True, exist_ok=True)
    manifest_path = root / "manifest.csv"
    records = tuple(UtteranceRecord(id=rid, audio_path=None, label=int(y),
                                    language="toy")
                    for rid, y in zip(ids, labels))
    save_manifest(DatasetManifest(records=records), manifest_path)

    audio = leaked(audio_dim)
    text = leaked(text_dim)
    emotion = leaked(emotion_dim)
    write_store([EmbeddingRecord(id=rid, modality="audio",
                                 data=audio[i].astype(np.float32))
                 for i, rid in enumerate(ids)], root / "audio_store")
    write_store([EmbeddingRecord(id=rid, modality="text",
                                 data=text[i].astype(np.float32))
                 for i, rid in enumerate(ids)], root / "text_store")
    write_emotion_cache({rid: emotion[i] for i, rid in enumerate(ids)},
                        root / "emotion_cache")
    return {
        "manifest": str(manifest_path),
        "audio_store": str(root / "audio_store"),
        "text_store": str(root / "text_store"),
        "emotion_cache": str(root / "emotion_cache"),
        "labels": labels,
        "ids": ids,
    }
