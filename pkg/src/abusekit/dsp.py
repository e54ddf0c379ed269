"""Acoustic emotion features: STFT and the five-feature stack.

The emotion representation of an utterance is the concatenation of five
temporally mean-pooled feature matrices computed from a shared STFT:

    mfcc (40) | chroma (12) | mel (128) | spectral contrast (7) | tonnetz (6)

for 193 values total. Parameter choices (n_fft 2048, hop 512, periodic Hann,
Slaney mel filterbank, 0.02 contrast quantile, 200 Hz contrast floor) are the
conventional analysis defaults at 22050 Hz and are fixed so that committed
golden vectors stay comparable across environments.

Chroma uses nearest-pitch-class bin assignment (A440 tuning, octave folded)
and tonnetz projects L1-normalized chroma onto the three interval circles
(fifths, minor thirds, major thirds); both are defined here in closed form
rather than borrowed from a feature library.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np

from .data import Waveform
from .errors import StoreError

N_MFCC = 40
N_CHROMA = 12
N_MELS = 128
N_CONTRAST = 7
N_TONNETZ = 6
EMOTION_DIM = N_MFCC + N_CHROMA + N_MELS + N_CONTRAST + N_TONNETZ  # 193

_LOG_FLOOR = 1e-10
_DB_WINDOW = 80.0
_CONTRAST_QUANTILE = 0.02
_CONTRAST_SPLIT_HZ = 200.0
_CHROMA_MIN_HZ = 27.5


@dataclass(frozen=True)
class Spectrogram:
    """Magnitude spectrogram, frames x bins, with its analysis metadata."""

    magnitudes: np.ndarray
    n_fft: int
    hop: int
    sample_rate: int

    def __post_init__(self):
        mags = np.asarray(self.magnitudes, dtype=np.float64)
        if mags.ndim != 2 or mags.shape[1] != self.n_fft // 2 + 1:
            raise ValueError("spectrogram must be frames x (n_fft/2 + 1)")
        if not np.all(np.isfinite(mags)) or np.any(mags < 0):
            raise ValueError("spectrogram entries must be finite and non-negative")
        object.__setattr__(self, "magnitudes", mags)

    @property
    def n_frames(self) -> int:
        return self.magnitudes.shape[0]

    def bin_frequencies(self) -> np.ndarray:
        return np.arange(self.n_fft // 2 + 1) * (self.sample_rate / self.n_fft)


@dataclass(frozen=True)
class FeatureMatrix:
    """One of the five features, coefficients x frames."""

    values: np.ndarray
    kind: str

    _ROWS = {"mfcc": N_MFCC, "chroma": N_CHROMA, "mel": N_MELS,
             "contrast": N_CONTRAST, "tonnetz": N_TONNETZ}

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        expected = self._ROWS.get(self.kind)
        if expected is None:
            raise ValueError(f"unknown feature kind {self.kind!r}")
        if values.ndim != 2 or values.shape[0] != expected:
            raise ValueError(f"{self.kind} matrix must have {expected} rows")
        object.__setattr__(self, "values", values)

    @property
    def n_frames(self) -> int:
        return self.values.shape[1]

    def mean_over_frames(self) -> np.ndarray:
        return self.values.mean(axis=1)


def _hann_periodic(n: int) -> np.ndarray:
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n)


def stft(w: Waveform, n_fft: int = 2048, hop: int = 512) -> Spectrogram:
    """Magnitude STFT with centered frames and reflect padding.

    Frame count is 1 + floor(len/hop); bins are n_fft/2 + 1.
    """
    if n_fft <= 0 or (n_fft & (n_fft - 1)) != 0:
        raise ValueError(f"n_fft must be a power of two, got {n_fft}")
    if hop <= 0:
        raise ValueError("hop must be positive")
    x = w.samples
    n_frames = 1 + x.size // hop
    padded = np.pad(x, n_fft // 2, mode="reflect")
    frames = np.lib.stride_tricks.sliding_window_view(padded, n_fft)[::hop][:n_frames]
    window = _hann_periodic(n_fft)
    mags = np.abs(np.fft.rfft(frames * window, axis=1))
    return Spectrogram(magnitudes=mags, n_fft=n_fft, hop=hop, sample_rate=w.sample_rate)


def _hz_to_mel(freqs: np.ndarray) -> np.ndarray:
    # Slaney mel: linear below 1 kHz, logarithmic above.
    freqs = np.asarray(freqs, dtype=np.float64)
    f_sp = 200.0 / 3
    mels = freqs / f_sp
    min_log_hz = 1000.0
    min_log_mel = min_log_hz / f_sp
    logstep = np.log(6.4) / 27.0
    log_region = freqs >= min_log_hz
    mels = np.where(log_region, min_log_mel + np.log(np.maximum(freqs, min_log_hz) / min_log_hz) / logstep, mels)
    return mels


def _mel_to_hz(mels: np.ndarray) -> np.ndarray:
    mels = np.asarray(mels, dtype=np.float64)
    f_sp = 200.0 / 3
    freqs = mels * f_sp
    min_log_hz = 1000.0
    min_log_mel = min_log_hz / f_sp
    logstep = np.log(6.4) / 27.0
    log_region = mels >= min_log_mel
    freqs = np.where(log_region, min_log_hz * np.exp(logstep * (mels - min_log_mel)), freqs)
    return freqs


@lru_cache(maxsize=8)
def mel_filterbank(sample_rate: int, n_fft: int, n_mels: int = N_MELS) -> np.ndarray:
    """Slaney-normalized triangular mel filterbank, n_mels x bins.

    fmin = 0, fmax = sr/2; each triangle is scaled by 2 / (band width in Hz)
    so filters integrate to roughly constant area.
    """
    if n_mels > n_fft // 2 + 1:
        raise ValueError(f"n_mels={n_mels} exceeds available bins {n_fft // 2 + 1}")
    fft_freqs = np.arange(n_fft // 2 + 1) * (sample_rate / n_fft)
    mel_edges = _mel_to_hz(np.linspace(_hz_to_mel(np.array(0.0)),
                                       _hz_to_mel(np.array(sample_rate / 2.0)),
                                       n_mels + 2))
    fdiff = np.diff(mel_edges)
    ramps = mel_edges[:, None] - fft_freqs[None, :]
    lower = -ramps[:-2] / fdiff[:-1, None]
    upper = ramps[2:] / fdiff[1:, None]
    weights = np.maximum(0.0, np.minimum(lower, upper))
    enorm = 2.0 / (mel_edges[2 : n_mels + 2] - mel_edges[:n_mels])
    weights = weights * enorm[:, None]
    weights.setflags(write=False)
    return weights


def mel_spectrogram(s: Spectrogram, n_mels: int = N_MELS) -> FeatureMatrix:
    """Mel-scaled power spectrogram: filterbank applied to magnitude^2."""
    fb = mel_filterbank(s.sample_rate, s.n_fft, n_mels)
    power = s.magnitudes.T ** 2  # bins x frames
    return FeatureMatrix(values=fb @ power, kind="mel")


def _dct_ortho_matrix(n_out: int, n_in: int) -> np.ndarray:
    # Orthonormal DCT-II basis, n_out x n_in.
    n = np.arange(n_in)
    k = np.arange(n_out)[:, None]
    basis = np.cos(np.pi * k * (2 * n[None, :] + 1) / (2 * n_in)) * np.sqrt(2.0 / n_in)
    basis[0] /= np.sqrt(2.0)
    return basis


def power_to_db(values: np.ndarray) -> np.ndarray:
    """10*log10 with a 1e-10 floor, clipped below global max minus 80 dB."""
    db = 10.0 * np.log10(np.maximum(values, _LOG_FLOOR))
    return np.maximum(db, db.max() - _DB_WINDOW)


def mfcc(mel: FeatureMatrix, n_mfcc: int = N_MFCC) -> FeatureMatrix:
    """MFCCs: orthonormal DCT-II of the dB mel spectrogram, first 40 rows."""
    if mel.kind != "mel":
        raise ValueError("mfcc expects a mel feature matrix")
    db = power_to_db(mel.values)
    basis = _dct_ortho_matrix(n_mfcc, mel.values.shape[0])
    return FeatureMatrix(values=basis @ db, kind="mfcc")


@lru_cache(maxsize=8)
def _chroma_assignment(sample_rate: int, n_fft: int) -> np.ndarray:
    # 12 x bins 0/1 matrix sending each bin to its nearest pitch class
    # (A440 tuning, C = 0). Bins below 27.5 Hz carry no pitch and are dropped.
    freqs = np.arange(n_fft // 2 + 1) * (sample_rate / n_fft)
    matrix = np.zeros((N_CHROMA, freqs.size))
    audible = freqs >= _CHROMA_MIN_HZ
    midi = np.full(freqs.size, -1, dtype=np.int64)
    midi[audible] = np.round(69.0 + 12.0 * np.log2(freqs[audible] / 440.0)).astype(np.int64)
    for pc in range(N_CHROMA):
        matrix[pc, audible & (midi % 12 == pc)] = 1.0
    matrix.setflags(write=False)
    return matrix


def chroma(s: Spectrogram) -> FeatureMatrix:
    """Octave-folded pitch-class energy, max-normalized per frame.

    All-zero frames stay all-zero instead of dividing by zero.
    """
    assign = _chroma_assignment(s.sample_rate, s.n_fft)
    raw = assign @ (s.magnitudes.T ** 2)  # 12 x frames
    peaks = raw.max(axis=0)
    scale = np.where(peaks > 0.0, peaks, 1.0)
    return FeatureMatrix(values=raw / scale, kind="chroma")


def _contrast_bands(freqs: np.ndarray) -> list[np.ndarray]:
    # Sub-band [0, 200) plus six octave bands from 200 Hz; the top band is
    # open-ended so every bin lands in exactly one band.
    edges = _CONTRAST_SPLIT_HZ * (2.0 ** np.arange(N_CONTRAST - 1))  # 200 .. 6400
    bands = [np.flatnonzero(freqs < edges[0])]
    for low, high in zip(edges[:-1], edges[1:]):
        bands.append(np.flatnonzero((freqs >= low) & (freqs < high)))
    bands.append(np.flatnonzero(freqs >= edges[-1]))
    return bands


def spectral_contrast(s: Spectrogram) -> FeatureMatrix:
    """Per-band dB gap between spectral peaks and valleys.

    For each band and frame the linear power values are sorted; the peak is
    the mean of the top ceil(0.02*K) bins and the valley the mean of the
    bottom ceil(0.02*K), giving 10*log10((peak+1e-10)/(valley+1e-10)).
    """
    power = s.magnitudes.T ** 2  # bins x frames
    freqs = s.bin_frequencies()
    out = np.empty((N_CONTRAST, s.n_frames))
    for row, band in enumerate(_contrast_bands(freqs)):
        sub = np.sort(power[band], axis=0)
        count = int(np.ceil(_CONTRAST_QUANTILE * band.size))
        valley = sub[:count].mean(axis=0)
        peak = sub[-count:].mean(axis=0)
        out[row] = 10.0 * np.log10((peak + _LOG_FLOOR) / (valley + _LOG_FLOOR))
    return FeatureMatrix(values=out, kind="contrast")


def _tonnetz_basis() -> np.ndarray:
    # Six tonal-centroid rows: (sin, cos) pairs on the circle of fifths
    # (radius 1), minor thirds (radius 1) and major thirds (radius 0.5).
    pc = np.arange(N_CHROMA, dtype=np.float64)
    angles = [(7.0 * np.pi / 6.0, 1.0), (3.0 * np.pi / 2.0, 1.0), (2.0 * np.pi / 3.0, 0.5)]
    rows = []
    for angle, radius in angles:
        rows.append(radius * np.sin(pc * angle))
        rows.append(radius * np.cos(pc * angle))
    return np.vstack(rows)


_TONNETZ_BASIS = _tonnetz_basis()


def tonnetz(c: FeatureMatrix) -> FeatureMatrix:
    """Tonal centroids of L1-normalized chroma frames (zero frames stay zero)."""
    if c.kind != "chroma":
        raise ValueError("tonnetz expects a chroma feature matrix")
    mass = c.values.sum(axis=0)
    scale = np.where(mass > 0.0, mass, 1.0)
    return FeatureMatrix(values=_TONNETZ_BASIS @ (c.values / scale), kind="tonnetz")


def emotion_features(w: Waveform, n_fft: int = 2048, hop: int = 512) -> dict[str, FeatureMatrix]:
    """All five feature matrices from one shared STFT."""
    s = stft(w, n_fft=n_fft, hop=hop)
    mel = mel_spectrogram(s)
    chrom = chroma(s)
    return {
        "mfcc": mfcc(mel),
        "chroma": chrom,
        "mel": mel,
        "contrast": spectral_contrast(s),
        "tonnetz": tonnetz(chrom),
    }


def emotion_vector(w: Waveform, n_fft: int = 2048, hop: int = 512) -> np.ndarray:
    """Mean-pool the five feature matrices over frames and concatenate (193)."""
    feats = emotion_features(w, n_fft=n_fft, hop=hop)
    vec = np.concatenate([feats[k].mean_over_frames()
                          for k in ("mfcc", "chroma", "mel", "contrast", "tonnetz")])
    assert vec.size == EMOTION_DIM
    return vec


# --- on-disk emotion feature cache ---------------------------------------
#
# Layout: one raw little-endian float32 file per utterance (<id>.emo.f32)
# plus an index.json mapping id -> {"file": ..., "dim": ...}.

CACHE_INDEX = "index.json"
CACHE_SUFFIX = ".emo.f32"


def write_emotion_cache(vectors: dict[str, np.ndarray], directory: str | Path) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    index: dict[str, dict] = {}
    for rid, vec in vectors.items():
        vec = np.asarray(vec, dtype=np.float32)
        if vec.ndim != 1:
            raise StoreError(f"emotion vector for {rid!r} must be 1-D")
        fname = f"{rid}{CACHE_SUFFIX}"
        tmp = directory / (fname + ".tmp")
        tmp.write_bytes(vec.astype("<f4").tobytes())
        tmp.replace(directory / fname)
        index[rid] = {"file": fname, "dim": int(vec.size)}
    tmp_index = directory / (CACHE_INDEX + ".tmp")
    tmp_index.write_text(json.dumps(index, indent=2, sort_keys=True))
    tmp_index.replace(directory / CACHE_INDEX)


def read_emotion_cache(directory: str | Path) -> dict[str, np.ndarray]:
    directory = Path(directory)
    index_path = directory / CACHE_INDEX
    if not index_path.is_file():
        raise StoreError(f"emotion cache index not found: {index_path}")
    index = json.loads(index_path.read_text())
    vectors: dict[str, np.ndarray] = {}
    for rid, entry in index.items():
        fpath = directory / entry["file"]
        if not fpath.is_file():
            raise StoreError(f"emotion cache entry {rid!r} references missing file {fpath}")
        raw = np.frombuffer(fpath.read_bytes(), dtype="<f4")
        if raw.size != int(entry["dim"]):
            raise StoreError(
                f"emotion cache entry {rid!r}: expected {entry['dim']} values, found {raw.size}"
            )
        if not np.all(np.isfinite(raw)):
            raise StoreError(f"emotion cache entry {rid!r} contains non-finite values")
        vectors[rid] = raw.astype(np.float64)
    return vectors
