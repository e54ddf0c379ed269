"""Base64 float64 blob helpers shared by model serializers."""

from __future__ import annotations

import base64

import numpy as np


def encode_array(arr: np.ndarray) -> dict:
    arr = np.ascontiguousarray(arr, dtype=np.float64)
    return {
        "shape": list(arr.shape),
        "data_b64": base64.b64encode(arr.astype("<f8").tobytes()).decode("ascii"),
    }


def decode_array(blob: dict) -> np.ndarray:
    raw = np.frombuffer(base64.b64decode(blob["data_b64"]), dtype="<f8")
    return raw.reshape(blob["shape"]).copy()
