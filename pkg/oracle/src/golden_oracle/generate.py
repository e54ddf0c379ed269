"""Golden-set generation and verification.

Layout written under the output directory:

    <fixtures_dir>/<name>.wav              deterministic fixture audio
    <goldens_dir>/<fixture>/<feature>.f32  raw little-endian float32 arrays
    <goldens_dir>/pca/matrix.f64           10x6 PCA input fixture
    <goldens_dir>/pca/eigenvalues.f64      its covariance spectrum (Jacobi)
    <goldens_dir>/manifest.json            shapes + dtype + sha256 per entry

Generation refuses to run when the interpreter or numeric library versions
differ from pins.json; regenerated bytes must reproduce exactly.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import platform
import sys
from pathlib import Path

import numpy as np
import scipy

from . import __version__, fixtures, reference

FEATURES = ("stft", "mel", "mfcc", "chroma", "contrast", "tonnetz", "emotion")
PCA_FIXTURE_SEED = 1234
PCA_FIXTURE_SHAPE = (10, 6)

PINS_FILE = Path(__file__).resolve().parents[2] / "pins.json"


def current_versions() -> dict:
    return {
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
    }


def check_pins(allow_repin: bool) -> None:
    versions = current_versions()
    if not PINS_FILE.is_file():
        PINS_FILE.write_text(json.dumps(versions, indent=2, sort_keys=True) + "\n")
        return
    pinned = json.loads(PINS_FILE.read_text())
    if pinned != versions:
        if allow_repin:
            PINS_FILE.write_text(json.dumps(versions, indent=2, sort_keys=True) + "\n")
            return
        raise SystemExit(
            f"refusing to write goldens: environment {versions} does not match "
            f"pinned {pinned} (use --allow-repin to update)"
        )


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _write_array(arr: np.ndarray, path: Path, dtype: str = "<f4") -> dict:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(np.ascontiguousarray(arr, dtype=dtype).tobytes())
    return {"shape": list(arr.shape), "dtype": dtype, "sha256": _sha256(path)}


def pca_fixture_matrix() -> np.ndarray:
    rng = np.random.default_rng(PCA_FIXTURE_SEED)
    base = rng.standard_normal(PCA_FIXTURE_SHAPE)
    scale = np.array([4.0, 2.5, 1.5, 0.8, 0.3, 0.1])
    return base * scale


def generate(fixtures_dir: Path, goldens_dir: Path) -> dict:
    wavs = fixtures.write_fixtures(fixtures_dir)
    manifest: dict = {"generator_version": __version__, "fixtures": {}}
    for name, wav_path in wavs.items():
        samples, sr = fixtures.read_wav_f32(wav_path)
        feats = reference.all_features(samples, sr)
        for feature in FEATURES:
            rel = f"{name}/{feature}.f32"
            entry = _write_array(feats[feature], goldens_dir / rel)
            manifest["fixtures"][f"{name}/{feature}"] = {"file": rel, **entry}

    # The eigenvalue comparison runs at 1e-8, which float32 storage cannot
    # carry at this scale; the two PCA fixtures are therefore float64.
    matrix = pca_fixture_matrix()
    eigenvalues = reference.covariance_eigenvalues(matrix)
    for key, arr in (("pca/matrix", matrix), ("pca/eigenvalues", eigenvalues)):
        rel = f"{key}.f64"
        entry = _write_array(arr, goldens_dir / rel, dtype="<f8")
        manifest["fixtures"][key] = {"file": rel, **entry}

    (goldens_dir / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n"
    )
    return manifest


def verify(goldens_dir: Path) -> list[str]:
    """Recompute checksums of the committed files; return mismatches."""
    manifest = json.loads((goldens_dir / "manifest.json").read_text())
    problems = []
    for key, entry in manifest["fixtures"].items():
        path = goldens_dir / entry["file"]
        if not path.is_file():
            problems.append(f"{key}: missing file {entry['file']}")
        elif _sha256(path) != entry["sha256"]:
            problems.append(f"{key}: checksum mismatch")
    return problems


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="golden-oracle")
    sub = parser.add_subparsers(dest="command", required=True)
    gen = sub.add_parser("generate", help="write fixture WAVs and golden arrays")
    gen.add_argument("--fixtures-dir", required=True, type=Path)
    gen.add_argument("--goldens-dir", required=True, type=Path)
    gen.add_argument("--allow-repin", action="store_true",
                     help="update pins.json instead of refusing on version drift")
    chk = sub.add_parser("verify", help="recompute checksums of committed goldens")
    chk.add_argument("--goldens-dir", required=True, type=Path)
    args = parser.parse_args(argv)

    if args.command == "generate":
        check_pins(args.allow_repin)
        manifest = generate(args.fixtures_dir, args.goldens_dir)
        print(f"wrote {len(manifest['fixtures'])} golden arrays to {args.goldens_dir}")
        return 0
    problems = verify(args.goldens_dir)
    for p in problems:
        print(p, file=sys.stderr)
    print("verify: OK" if not problems else f"verify: {len(problems)} problem(s)")
    return 0 if not problems else 1


if __name__ == "__main__":
    sys.exit(main())
