"""Reference implementations of the feature formulas, written for clarity
and independence rather than speed.

Every transform here follows the published formula as directly as possible:
the DFT is an explicit cosine/sine basis (no FFT), the mel triangles are
built one filter at a time, contrast bands are scanned with plain Python
loops, and the PCA eigenvalue fixture uses a cyclic Jacobi eigensolver.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.fft import dct

N_FFT = 2048
HOP = 512
N_MELS = 128
N_MFCC = 40
LOG_FLOOR = 1e-10
DB_WINDOW = 80.0
CONTRAST_QUANTILE = 0.02
CONTRAST_SPLIT_HZ = 200.0
CHROMA_MIN_HZ = 27.5


def reflect_index(i: int, n: int) -> int:
    # Mirror indexing without edge duplication; handles pads wider than n.
    if n == 1:
        return 0
    while i < 0 or i >= n:
        if i < 0:
            i = -i
        else:
            i = 2 * (n - 1) - i
    return i


def frame_signal(x: np.ndarray, n_fft: int = N_FFT, hop: int = HOP) -> np.ndarray:
    pad = n_fft // 2
    n = x.size
    padded = np.array([x[reflect_index(i, n)] for i in range(-pad, n + pad)])
    n_frames = 1 + n // hop
    return np.stack([padded[t * hop : t * hop + n_fft] for t in range(n_frames)])


def stft_magnitudes(x: np.ndarray, sample_rate: int,
                    n_fft: int = N_FFT, hop: int = HOP) -> np.ndarray:
    """|DFT| of Hann-windowed centered frames via an explicit basis."""
    frames = frame_signal(x, n_fft, hop)
    window = 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n_fft) / n_fft)
    windowed = frames * window
    bins = n_fft // 2 + 1
    k = np.arange(bins)[:, None]
    n = np.arange(n_fft)[None, :]
    angle = 2.0 * np.pi * k * n / n_fft
    cos_basis = np.cos(angle)
    sin_basis = np.sin(angle)
    real = windowed @ cos_basis.T
    imag = -(windowed @ sin_basis.T)
    return np.sqrt(real**2 + imag**2)


def bin_frequencies(sample_rate: int, n_fft: int = N_FFT) -> np.ndarray:
    return np.arange(n_fft // 2 + 1) * (sample_rate / n_fft)


def hz_to_mel(f: float) -> float:
    # Slaney: linear below 1 kHz, logarithmic above.
    f_sp = 200.0 / 3
    if f < 1000.0:
        return f / f_sp
    return 1000.0 / f_sp + math.log(f / 1000.0) / (math.log(6.4) / 27.0)


def mel_to_hz(m: float) -> float:
    f_sp = 200.0 / 3
    min_log_mel = 1000.0 / f_sp
    if m < min_log_mel:
        return m * f_sp
    return 1000.0 * math.exp((math.log(6.4) / 27.0) * (m - min_log_mel))


def mel_filterbank(sample_rate: int, n_fft: int = N_FFT, n_mels: int = N_MELS) -> np.ndarray:
    freqs = bin_frequencies(sample_rate, n_fft)
    mel_points = np.linspace(hz_to_mel(0.0), hz_to_mel(sample_rate / 2.0), n_mels + 2)
    hz_points = np.array([mel_to_hz(m) for m in mel_points])
    weights = np.zeros((n_mels, freqs.size))
    for m in range(n_mels):
        f_low, f_center, f_high = hz_points[m], hz_points[m + 1], hz_points[m + 2]
        for k, f in enumerate(freqs):
            rising = (f - f_low) / (f_center - f_low)
            falling = (f_high - f) / (f_high - f_center)
            weights[m, k] = max(0.0, min(rising, falling))
        weights[m] *= 2.0 / (f_high - f_low)  # Slaney area normalization
    return weights


def mel_spectrogram(mags: np.ndarray, sample_rate: int, n_mels: int = N_MELS) -> np.ndarray:
    fb = mel_filterbank(sample_rate, (mags.shape[1] - 1) * 2, n_mels)
    return fb @ (mags.T ** 2)


def power_to_db(values: np.ndarray) -> np.ndarray:
    db = 10.0 * np.log10(np.maximum(values, LOG_FLOOR))
    return np.maximum(db, db.max() - DB_WINDOW)


def mfcc(mel: np.ndarray, n_mfcc: int = N_MFCC) -> np.ndarray:
    return dct(power_to_db(mel), type=2, axis=0, norm="ortho")[:n_mfcc]


def chroma(mags: np.ndarray, sample_rate: int) -> np.ndarray:
    freqs = bin_frequencies(sample_rate, (mags.shape[1] - 1) * 2)
    power = mags.T ** 2
    out = np.zeros((12, power.shape[1]))
    for k, f in enumerate(freqs):
        if f < CHROMA_MIN_HZ:
            continue
        pitch_class = round(69.0 + 12.0 * math.log2(f / 440.0)) % 12
        out[pitch_class] += power[k]
    for t in range(out.shape[1]):
        peak = out[:, t].max()
        if peak > 0.0:
            out[:, t] /= peak
    return out


def spectral_contrast(mags: np.ndarray, sample_rate: int) -> np.ndarray:
    freqs = bin_frequencies(sample_rate, (mags.shape[1] - 1) * 2)
    power = mags.T ** 2
    edges = [CONTRAST_SPLIT_HZ * 2.0**i for i in range(6)]  # 200 .. 6400
    bands = [[k for k, f in enumerate(freqs) if f < edges[0]]]
    for low, high in zip(edges[:-1], edges[1:]):
        bands.append([k for k, f in enumerate(freqs) if low <= f < high])
    bands.append([k for k, f in enumerate(freqs) if f >= edges[-1]])
    n_frames = power.shape[1]
    out = np.zeros((7, n_frames))
    for row, band in enumerate(bands):
        count = math.ceil(CONTRAST_QUANTILE * len(band))
        for t in range(n_frames):
            values = sorted(power[k, t] for k in band)
            valley = sum(values[:count]) / count
            peak = sum(values[-count:]) / count
            out[row, t] = 10.0 * math.log10((peak + LOG_FLOOR) / (valley + LOG_FLOOR))
    return out


def tonnetz(chroma_matrix: np.ndarray) -> np.ndarray:
    circles = [(7.0 * math.pi / 6.0, 1.0), (3.0 * math.pi / 2.0, 1.0),
               (2.0 * math.pi / 3.0, 0.5)]
    n_frames = chroma_matrix.shape[1]
    out = np.zeros((6, n_frames))
    for t in range(n_frames):
        mass = chroma_matrix[:, t].sum()
        if mass <= 0.0:
            continue
        normalized = chroma_matrix[:, t] / mass
        row = 0
        for angle, radius in circles:
            out[row, t] = radius * sum(normalized[l] * math.sin(l * angle) for l in range(12))
            out[row + 1, t] = radius * sum(normalized[l] * math.cos(l * angle) for l in range(12))
            row += 2
    return out


def all_features(x: np.ndarray, sample_rate: int) -> dict[str, np.ndarray]:
    mags = stft_magnitudes(x, sample_rate)
    mel = mel_spectrogram(mags, sample_rate)
    chrom = chroma(mags, sample_rate)
    feats = {
        "stft": mags,
        "mel": mel,
        "mfcc": mfcc(mel),
        "chroma": chrom,
        "contrast": spectral_contrast(mags, sample_rate),
        "tonnetz": tonnetz(chrom),
    }
    pooled = [feats[k].mean(axis=1) for k in ("mfcc", "chroma", "mel", "contrast", "tonnetz")]
    feats["emotion"] = np.concatenate(pooled)
    return feats


def jacobi_eigenvalues(matrix: np.ndarray, max_sweeps: int = 100,
                       tol: float = 1e-14) -> np.ndarray:
    """Eigenvalues of a symmetric matrix via cyclic Jacobi rotations."""
    A = np.array(matrix, dtype=np.float64)
    n = A.shape[0]
    for _ in range(max_sweeps):
        off = math.sqrt(sum(A[p, q] ** 2 for p in range(n) for q in range(n) if p != q))
        if off < tol:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                if abs(A[p, q]) < tol / (n * n):
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * A[p, q])
                t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta**2 + 1.0))
                c = 1.0 / math.sqrt(t**2 + 1.0)
                s = t * c
                rot = np.eye(n)
                rot[p, p] = rot[q, q] = c
                rot[p, q] = s
                rot[q, p] = -s
                A = rot.T @ A @ rot
    return np.sort(np.diag(A))[::-1].copy()


def covariance_eigenvalues(matrix: np.ndarray) -> np.ndarray:
    """Descending eigenvalues of the sample covariance (divisor n-1)."""
    X = np.asarray(matrix, dtype=np.float64)
    centered = X - X.mean(axis=0)
    cov = centered.T @ centered / (X.shape[0] - 1)
    return jacobi_eigenvalues(cov)
