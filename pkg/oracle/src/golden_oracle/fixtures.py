"""Deterministic fixture audio and a self-contained float32 WAV writer.

The RIFF container is assembled by hand so the fixtures do not depend on any
audio library the consuming code might also use.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

SAMPLE_RATE = 22050
NOISE_SEED = 20260810

# MIDI 60/64/67 at A440 equal temperament.
C4 = 440.0 * 2.0 ** ((60 - 69) / 12)
E4 = 440.0 * 2.0 ** ((64 - 69) / 12)
G4 = 440.0 * 2.0 ** ((67 - 69) / 12)


def sine440() -> np.ndarray:
    t = np.arange(SAMPLE_RATE) / SAMPLE_RATE
    return 0.8 * np.sin(2.0 * np.pi * 440.0 * t)


def chirp() -> np.ndarray:
    duration = 1.5
    n = int(SAMPLE_RATE * duration)
    t = np.arange(n) / SAMPLE_RATE
    f0, f1 = 200.0, 4000.0
    phase = 2.0 * np.pi * (f0 * t + (f1 - f0) / (2.0 * duration) * t**2)
    return 0.6 * np.sin(phase)


def c_major_chord() -> np.ndarray:
    t = np.arange(SAMPLE_RATE) / SAMPLE_RATE
    chord = sum(np.sin(2.0 * np.pi * f * t) for f in (C4, E4, G4))
    return 0.3 * chord


def speech_like() -> np.ndarray:
    # Amplitude-modulated broadband noise: syllable-rate energy envelope,
    # spectrum busy enough that every mel band stays well above the log floor.
    n = int(SAMPLE_RATE * 1.2)
    rng = np.random.default_rng(NOISE_SEED)
    noise = rng.standard_normal(n)
    t = np.arange(n) / SAMPLE_RATE
    envelope = 0.25 + 0.75 * np.abs(np.sin(2.0 * np.pi * 3.0 * t))
    signal = 0.25 * noise * envelope
    return np.clip(signal, -1.0, 1.0)


def silence() -> np.ndarray:
    return np.zeros(SAMPLE_RATE // 2)


FIXTURES = {
    "sine440": (sine440, "sine440_22050.wav"),
    "chirp": (chirp, "chirp.wav"),
    "c_major_chord": (c_major_chord, "c_major_chord.wav"),
    "speech_like": (speech_like, "speech_like.wav"),
    "silence": (silence, "silence.wav"),
}


def write_wav_f32(samples: np.ndarray, sample_rate: int, path: Path) -> None:
    """Write mono IEEE float32 WAV (format tag 3) from scratch."""
    payload = np.asarray(samples, dtype="<f4").tobytes()
    n_channels = 1
    bits = 32
    byte_rate = sample_rate * n_channels * bits // 8
    block_align = n_channels * bits // 8
    fmt = struct.pack("<HHIIHH", 3, n_channels, sample_rate, byte_rate, block_align, bits)
    # fact chunk is required for non-PCM formats.
    fact = struct.pack("<I", len(samples))
    chunks = (
        b"fmt " + struct.pack("<I", len(fmt)) + fmt
        + b"fact" + struct.pack("<I", len(fact)) + fact
        + b"data" + struct.pack("<I", len(payload)) + payload
    )
    riff = b"RIFF" + struct.pack("<I", 4 + len(chunks)) + b"WAVE" + chunks
    path.write_bytes(riff)


def read_wav_f32(path: Path) -> tuple[np.ndarray, int]:
    """Minimal reader for the files write_wav_f32 produces."""
    blob = path.read_bytes()
    if blob[:4] != b"RIFF" or blob[8:12] != b"WAVE":
        raise ValueError(f"{path}: not a RIFF/WAVE file")
    pos = 12
    sample_rate = None
    samples = None
    while pos + 8 <= len(blob):
        tag = blob[pos : pos + 4]
        size = struct.unpack("<I", blob[pos + 4 : pos + 8])[0]
        body = blob[pos + 8 : pos + 8 + size]
        if tag == b"fmt ":
            fmt_tag, channels, sample_rate, _, _, bits = struct.unpack("<HHIIHH", body[:16])
            if fmt_tag != 3 or channels != 1 or bits != 32:
                raise ValueError(f"{path}: expected mono float32")
        elif tag == b"data":
            samples = np.frombuffer(body, dtype="<f4").astype(np.float64)
        pos += 8 + size + (size & 1)
    if sample_rate is None or samples is None:
        raise ValueError(f"{path}: missing fmt or data chunk")
    return samples, sample_rate


def write_fixtures(out_dir: Path) -> dict[str, Path]:
    out_dir.mkdir(parents=True, exist_ok=True)
    written = {}
    for name, (synth, filename) in FIXTURES.items():
        path = out_dir / filename
        write_wav_f32(synth(), SAMPLE_RATE, path)
        written[name] = path
    return written
