"""Golden equivalence against the committed reference arrays.

The goldens were produced by the standalone generator in oracle/ from
independent, formula-direct implementations (explicit-basis DFT, loop-built
mel triangles, scalar band scans, Jacobi eigensolver); these tests pin the
production implementations to them. Linear-scale features compare
relatively, dB-scale features absolutely, per the stated tolerances.
"""

import numpy as np
import pytest

from abusekit import dsp
from abusekit.data import load_wav
from abusekit.fusion import fit_pca

from conftest import load_golden, fixture_wav_path

FIXTURE_NAMES = ("sine440", "chirp", "c_major_chord", "speech_like", "silence")

# (feature, comparison, tolerance)
FEATURE_TOLERANCES = (
    ("stft", "linear", 1e-3),
    ("mel", "linear", 1e-3),
    ("mfcc", "absolute", 1e-3),
    ("contrast", "absolute", 1e-3),
    ("chroma", "absolute", 1e-6),
    ("tonnetz", "absolute", 1e-6),
)


def computed_features(name: str) -> dict:
    w = load_wav(fixture_wav_path(name))
    feats = dsp.emotion_features(w)
    return {
        "stft": dsp.stft(w).magnitudes,
        "mel": feats["mel"].values,
        "mfcc": feats["mfcc"].values,
        "chroma": feats["chroma"].values,
        "contrast": feats["contrast"].values,
        "tonnetz": feats["tonnetz"].values,
        "emotion": dsp.emotion_vector(w),
    }


@pytest.fixture(scope="module")
def features_by_fixture():
    return {name: computed_features(name) for name in FIXTURE_NAMES}


@pytest.mark.parametrize("name", FIXTURE_NAMES)
@pytest.mark.parametrize("feature,mode,tol", FEATURE_TOLERANCES)
def test_feature_matches_golden(name, feature, mode, tol, goldens_manifest,
                                features_by_fixture):
    golden = load_golden(goldens_manifest, f"{name}/{feature}")
    got = features_by_fixture[name][feature]
    assert got.shape == golden.shape
    if mode == "linear":
        # Relative with a small absolute floor for (near-)zero bins; the
        # floor also covers the float32 quantization of the stored golden.
        np.testing.assert_allclose(got, golden, rtol=tol, atol=1e-4)
    else:
        assert np.max(np.abs(got - golden)) < tol


@pytest.mark.parametrize("name", FIXTURE_NAMES)
def test_emotion_vector_matches_golden(name, goldens_manifest, features_by_fixture):
    golden = load_golden(goldens_manifest, f"{name}/emotion")
    got = features_by_fixture[name]["emotion"]
    np.testing.assert_allclose(got, golden, rtol=1e-3, atol=1e-3)


def test_pca_eigenvalues_match_jacobi_fixture(goldens_manifest):
    matrix = load_golden(goldens_manifest, "pca/matrix")
    expected = load_golden(goldens_manifest, "pca/eigenvalues")
    model = fit_pca(matrix, variance_target=0.95)
    np.testing.assert_allclose(model.all_eigenvalues, expected, atol=1e-8)


def test_every_committed_golden_is_loadable(goldens_manifest):
    for key in goldens_manifest["fixtures"]:
        arr = load_golden(goldens_manifest, key)
        assert np.all(np.isfinite(arr))
