"""Manifest-driven dataset ingestion: CSV manifests, WAV decoding, resampling.

Audio handling is deliberately narrow: RIFF/WAVE files carrying 16-bit PCM or
32-bit IEEE float, mono or stereo. Stereo is mixed down by an unweighted
channel mean and 16-bit samples are scaled by 1/32768. Everything downstream
runs at a fixed analysis rate (22050 Hz mono by default).
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from scipy.io import wavfile

from .errors import AudioFormatError, ManifestError

ANALYSIS_SAMPLE_RATE = 22050

VALID_SPLITS = ("train", "test", "unassigned")

MANIFEST_COLUMNS = ("id", "audio_path", "label", "language", "split")


@dataclass(frozen=True)
class Waveform:
    """Mono PCM audio: float64 samples in [-1, 1] at a known sample rate."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1 or samples.size < 1:
            raise AudioFormatError("waveform must be a non-empty 1-D array")
        if not np.all(np.isfinite(samples)):
            raise AudioFormatError("waveform contains non-finite samples")
        if int(self.sample_rate) <= 0:
            raise AudioFormatError("sample rate must be positive")
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "sample_rate", int(self.sample_rate))

    def __len__(self) -> int:
        return self.samples.size

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate


@dataclass(frozen=True)
class UtteranceRecord:
    id: str
    audio_path: str | None
    label: int
    language: str
    split: str = "unassigned"


@dataclass(frozen=True)
class DatasetManifest:
    records: tuple[UtteranceRecord, ...]
    source: str = ""

    def __post_init__(self):
        if not self.records:
            raise ManifestError("manifest has no records")

    def __len__(self) -> int:
        return len(self.records)

    def ids(self) -> list[str]:
        return [r.id for r in self.records]

    def by_split(self, split: str) -> list[UtteranceRecord]:
        return [r for r in self.records if r.split == split]

    def languages(self) -> list[str]:
        seen: dict[str, None] = {}
        for r in self.records:
            seen.setdefault(r.language, None)
        return list(seen)

    def filter_language(self, language: str) -> "DatasetManifest":
        kept = tuple(r for r in self.records if r.language == language)
        if not kept:
            raise ManifestError(f"no records for language {language!r}")
        return DatasetManifest(records=kept, source=self.source)

    def with_records(self, records) -> "DatasetManifest":
        return replace(self, records=tuple(records))


def load_manifest(path: str | Path) -> DatasetManifest:
    """Parse a manifest CSV (`id,audio_path,label,language,split`).

    Row order is preserved. Errors name the offending 1-based line number.
    """
    path = Path(path)
    if not path.is_file():
        raise ManifestError(f"manifest not found: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ManifestError(f"{path}: empty manifest") from None
        if tuple(h.strip() for h in header) != MANIFEST_COLUMNS:
            raise ManifestError(
                f"{path}: header must be {','.join(MANIFEST_COLUMNS)}, got {','.join(header)}"
            )
        records: list[UtteranceRecord] = []
        seen: set[str] = set()
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != len(MANIFEST_COLUMNS):
                raise ManifestError(
                    f"{path}: malformed row at line {lineno}: expected "
                    f"{len(MANIFEST_COLUMNS)} fields, got {len(row)}"
                )
            rid, audio_path, label, language, split = (c.strip() for c in row)
            if not rid:
                raise ManifestError(f"{path}: empty id at line {lineno}")
            if "/" in rid or "\\" in rid:
                raise ManifestError(f"{path}: id {rid!r} at line {lineno} contains a path separator")
            if rid in seen:
                raise ManifestError(f"{path}: duplicate id {rid!r} at line {lineno}")
            seen.add(rid)
            if label not in ("0", "1"):
                raise ManifestError(
                    f"{path}: label must be 0 or 1 at line {lineno}, got {label!r}"
                )
            split = split or "unassigned"
            if split not in VALID_SPLITS:
                raise ManifestError(
                    f"{path}: split must be train, test or empty at line {lineno}, got {split!r}"
                )
            records.append(
                UtteranceRecord(
                    id=rid,
                    audio_path=audio_path or None,
                    label=int(label),
                    language=language,
                    split=split,
                )
            )
    if not records:
        raise ManifestError(f"{path}: manifest has no data rows")
    return DatasetManifest(records=tuple(records), source=str(path))


def save_manifest(manifest: DatasetManifest, path: str | Path) -> None:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(MANIFEST_COLUMNS)
        for r in manifest.records:
            split = "" if r.split == "unassigned" else r.split
            writer.writerow([r.id, r.audio_path or "", r.label, r.language, split])


def load_wav(path: str | Path) -> Waveform:
    """Decode a WAV file to a mono waveform in [-1, 1].

    Accepts 16-bit PCM (scaled by 1/32768) and 32-bit IEEE float, 1-2
    channels. Anything else is an error rather than a silent approximation.
    """
    path = Path(path)
    if not path.is_file():
        raise AudioFormatError(f"audio file not found: {path}")
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            rate, data = wavfile.read(str(path))
        for w in caught:
            # scipy reports a short data chunk as a warning, not an error.
            if "EOF" in str(w.message) or "truncat" in str(w.message).lower():
                raise AudioFormatError(f"{path}: truncated WAV file ({w.message})")
    except ValueError as exc:
        raise AudioFormatError(f"{path}: truncated or corrupt WAV file ({exc})") from exc
    if data.dtype == np.int16:
        samples = data.astype(np.float64) / 32768.0
    elif data.dtype == np.float32:
        samples = data.astype(np.float64)
    else:
        raise AudioFormatError(
            f"{path}: unsupported WAV encoding {data.dtype}; expected int16 PCM or float32"
        )
    if samples.ndim == 2:
        if samples.shape[1] > 2:
            raise AudioFormatError(f"{path}: {samples.shape[1]} channels; expected 1 or 2")
        samples = samples.mean(axis=1)
    if samples.size < 1:
        raise AudioFormatError(f"{path}: WAV file contains no samples")
    return Waveform(samples=samples, sample_rate=int(rate))


def write_wav(w: Waveform, path: str | Path) -> None:
    """Write a waveform as 32-bit float WAV (lossless round-trip for f32 data)."""
    wavfile.write(str(path), w.sample_rate, w.samples.astype(np.float32))


def _kaiser_window(x: np.ndarray, beta: float) -> np.ndarray:
    # Continuous Kaiser taper evaluated at fractional offsets, x in [-1, 1].
    inside = np.abs(x) <= 1.0
    out = np.zeros_like(x)
    out[inside] = np.i0(beta * np.sqrt(1.0 - x[inside] ** 2)) / np.i0(beta)
    return out


def resample(w: Waveform, target_rate: int, *, beta: float = 8.6, zeros: int = 16) -> Waveform:
    """Windowed-sinc resampling to `target_rate`.

    Kaiser-windowed sinc kernel, cutoff at 0.9x the Nyquist of the lower of
    the two rates. Kernel weights are renormalized per output sample, which
    makes DC exactly preserved (including at the edges). Identity when the
    rates already match.
    """
    target_rate = int(target_rate)
    if target_rate <= 0:
        raise AudioFormatError("target sample rate must be positive")
    if target_rate == w.sample_rate:
        return Waveform(samples=w.samples.copy(), sample_rate=target_rate)

    x = w.samples
    n_in = x.size
    ratio = target_rate / w.sample_rate
    n_out = max(1, round(n_in * ratio))
    # Cutoff in cycles per *input* sample; 0.45 = 0.9 * Nyquist.
    cutoff = 0.45 * min(1.0, ratio)
    half_width = zeros / (2.0 * cutoff)
    offsets = np.arange(-int(np.ceil(half_width)), int(np.ceil(half_width)) + 1)

    out = np.empty(n_out, dtype=np.float64)
    positions = np.arange(n_out) / ratio
    for start in range(0, n_out, 16384):
        pos = positions[start : start + 16384]
        center = np.floor(pos).astype(np.int64)
        idx = center[:, None] + offsets[None, :]
        u = pos[:, None] - idx
        taps = 2.0 * cutoff * np.sinc(2.0 * cutoff * u) * _kaiser_window(u / half_width, beta)
        valid = (idx >= 0) & (idx < n_in)
        taps *= valid
        idx = np.clip(idx, 0, n_in - 1)
        norm = taps.sum(axis=1)
        norm[norm == 0.0] = 1.0
        out[start : start + pos.size] = (x[idx] * taps).sum(axis=1) / norm
    return Waveform(samples=out, sample_rate=target_rate)
