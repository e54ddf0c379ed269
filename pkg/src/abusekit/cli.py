"""Command-line surface wiring ingestion, features, fusion, training and
evaluation together.

Subcommands: extract-emotion, import-embeddings, fit-fusion, train, evaluate,
run, ablate, tsne, fetch-embeddings. Configuration lives in a single JSON
document; flags override config fields. Exit codes: 0 success, 1 domain
error, 2 usage error. Output files are written to a temporary name in the
target directory and renamed, so failures never leave partial artifacts.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import data, dsp, embeddings, experiments, fusion, mlp, stack, tsne
from .errors import AbusekitError, ConfigError

log = logging.getLogger("abusekit")


def _write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _load_config(args: argparse.Namespace) -> experiments.ExperimentConfig:
    doc: dict = {}
    if getattr(args, "config", None):
        path = Path(args.config)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        doc = json.loads(path.read_text())
        if not isinstance(doc, dict):
            raise ConfigError(f"{path}: config must be a JSON object")
    overrides = {
        "manifest": getattr(args, "manifest", None),
        "audio_store": getattr(args, "audio_store", None),
        "text_store": getattr(args, "text_store", None),
        "emotion_cache": getattr(args, "emotion_cache", None),
        "classifier": getattr(args, "classifier", None),
        "language": getattr(args, "language", None),
        "seed": getattr(args, "seed", None),
    }
    for key, value in overrides.items():
        if value is not None:
            doc[key] = value
    if getattr(args, "modalities", None):
        doc["modalities"] = [m.strip() for m in args.modalities.split(",") if m.strip()]
    if getattr(args, "no_pca", False):
        doc["use_pca"] = False
    return experiments.ExperimentConfig.from_dict(doc)


def _extract_one(task: tuple[str, str, int]) -> tuple[str, np.ndarray]:
    rid, audio_path, sample_rate = task
    w = data.load_wav(audio_path)
    w = data.resample(w, sample_rate)
    return rid, dsp.emotion_vector(w)


def cmd_extract_emotion(args) -> int:
    manifest = data.load_manifest(args.manifest)
    tasks = [(r.id, r.audio_path, args.sample_rate)
             for r in manifest.records if r.audio_path]
    if not tasks:
        raise ConfigError("manifest has no records with audio paths")
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            vectors = dict(pool.map(_extract_one, tasks))
    else:
        vectors = dict(_extract_one(t) for t in tasks)
    dsp.write_emotion_cache(vectors, args.out)
    log.info("extracted %d emotion vectors to %s", len(vectors), args.out)
    return 0


def cmd_import_embeddings(args) -> int:
    src = Path(args.src)
    files = sorted(src.glob("*.npy"))
    if not files:
        raise ConfigError(f"no .npy files found in {src}")
    records = []
    for f in files:
        arr = np.load(f)
        records.append(embeddings.EmbeddingRecord(
            id=f.stem, modality=args.modality, data=np.asarray(arr, dtype=np.float32)))
    embeddings.write_store(records, args.out)
    log.info("imported %d %s records to %s", len(records), args.modality, args.out)
    return 0


def cmd_fetch_embeddings(args) -> int:
    manifest = data.load_manifest(args.manifest)
    records = [embeddings.fetch_remote(args.base_url, r.id, args.modality,
                                       timeout=args.timeout)
               for r in manifest.records]
    embeddings.write_store(records, args.out)
    log.info("fetched %d %s records from %s", len(records), args.modality, args.base_url)
    return 0


def _fit_fusion_for(config: experiments.ExperimentConfig) -> fusion.FusionModel:
    manifest = experiments.resolve_split(config)
    source = experiments.VectorSource(config)
    train_ids = [r.id for r in manifest.by_split("train")]
    if not train_ids:
        raise ConfigError("no training records after split")
    mats = {m: source.matrix(m, train_ids) for m in config.modalities}
    return fusion.fit_fusion(mats, use_pca=config.use_pca)


def cmd_fit_fusion(args) -> int:
    config = _load_config(args)
    model = _fit_fusion_for(config)
    _write_atomic(Path(args.out), fusion.fusion_to_json(model))
    log.info("fusion model (fused_dim=%d) written to %s", model.fused_dim, args.out)
    return 0


def cmd_train(args) -> int:
    config = _load_config(args)
    manifest = experiments.resolve_split(config)
    source = experiments.VectorSource(config)
    train_records = manifest.by_split("train")
    train_ids = [r.id for r in train_records]
    y = np.array([r.label for r in train_records], dtype=np.int64)
    if config.classifier == "tsp":
        X = source.matrix("text", train_ids)
        model = mlp.train_tsp(X, y, config.train_config())
        envelope = mlp.mlp_to_envelope(model, "tsp", {"seed": config.seed})
    else:
        mats = {m: source.matrix(m, train_ids) for m in config.modalities}
        fmodel = fusion.fit_fusion(mats, use_pca=config.use_pca)
        if args.fusion_out:
            _write_atomic(Path(args.fusion_out), fusion.fusion_to_json(fmodel))
        X = fmodel.transform_matrix(mats)
        if config.classifier == "ac":
            model = mlp.train_ac(X, y, config.train_config())
            envelope = mlp.mlp_to_envelope(model, "ac", {"seed": config.seed})
        else:
            model = stack.train_stack(X, y, seed=config.seed)
            envelope = stack.stack_to_envelope(model, {"seed": config.seed})
    _write_atomic(Path(args.out), json.dumps(envelope, sort_keys=True))
    log.info("%s model written to %s", config.classifier, args.out)
    return 0


def cmd_evaluate(args) -> int:
    config = _load_config(args)
    manifest = experiments.resolve_split(config)
    source = experiments.VectorSource(config)
    test_records = manifest.by_split("test")
    if not test_records:
        raise ConfigError("no test records after split")
    test_ids = [r.id for r in test_records]
    y = np.array([r.label for r in test_records], dtype=np.int64)
    envelope = mlp.load_envelope(args.model)
    kind = envelope.get("kind")
    if kind != config.classifier:
        raise ConfigError(f"model kind {kind!r} does not match config classifier "
                          f"{config.classifier!r}")
    if kind == "tsp":
        X = source.matrix("text", test_ids)
        model = mlp.mlp_from_envelope(envelope)
    else:
        if not args.fusion:
            raise ConfigError("--fusion is required for ac/sc evaluation")
        fmodel = fusion.load_fusion(args.fusion)
        X = fmodel.transform_matrix({m: source.matrix(m, test_ids)
                                     for m in config.modalities})
        model = (mlp.mlp_from_envelope(envelope) if kind == "ac"
                 else stack.stack_from_envelope(envelope))
    predictions = model.predict(X)
    accuracy, f1 = experiments.metrics(predictions, y)
    doc = {
        "accuracy": accuracy,
        "f1": f1,
        "confusion": experiments.confusion_counts(predictions, y),
        "n_test": len(test_ids),
    }
    text = json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n"
    if args.out:
        _write_atomic(Path(args.out), text)
    else:
        sys.stdout.write(text)
    log.info("accuracy %.2f%%, macro F1 %.2f%%", accuracy, f1)
    return 0


def cmd_run(args) -> int:
    config = _load_config(args)
    report = experiments.run_experiment(config)
    _write_atomic(Path(args.out), report.to_json())
    if args.csv:
        _append_csv(Path(args.csv), [report])
    log.info("run complete: accuracy %.2f%%, macro F1 %.2f%% (%.1fs)",
             report.accuracy, report.f1, report.timing_s)
    return 0


def _append_csv(path: Path, reports) -> None:
    lines = [] if path.exists() else [experiments.CSV_HEADER]
    lines += [r.csv_row() for r in reports]
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("a") as fh:
        fh.write("\n".join(lines) + "\n")


def cmd_ablate(args) -> int:
    config = _load_config(args)
    reports = experiments.run_ablation(config)
    _write_atomic(Path(args.out), experiments.ablation_grid_csv(reports))
    if args.json_dir:
        outdir = Path(args.json_dir)
        for column, report in reports.items():
            _write_atomic(outdir / f"{column}.json", report.to_json())
    best = max(reports.values(), key=lambda r: r.accuracy)
    log.info("ablation grid written to %s; best column %.2f%%", args.out, best.accuracy)
    return 0


def cmd_tsne(args) -> int:
    manifest = data.load_manifest(args.manifest)
    cache = dsp.read_emotion_cache(args.emotion_cache)
    ids, rows, labels = [], [], []
    for record in manifest.records:
        if record.id not in cache:
            raise ConfigError(f"emotion cache has no entry for id {record.id!r}")
        ids.append(record.id)
        rows.append(cache[record.id])
        labels.append(record.label)
    result = tsne.tsne(np.vstack(rows), perplexity=args.perplexity,
                       iters=args.iters, lr=args.lr, seed=args.seed)
    lines = ["id,x,y,label"]
    for rid, (x, y), label in zip(ids, result.embedding, labels):
        lines.append(f"{rid},{float(x)!r},{float(y)!r},{label}")
    _write_atomic(Path(args.out), "\n".join(lines) + "\n")
    log.info("t-SNE layout for %d points written to %s (final KL %.4f)",
             len(ids), args.out, result.final_kl)
    return 0


def _add_config_flags(p: argparse.ArgumentParser, with_classifier: bool = True) -> None:
    p.add_argument("--config", help="JSON config file; flags override its fields")
    p.add_argument("--manifest")
    p.add_argument("--audio-store", dest="audio_store")
    p.add_argument("--text-store", dest="text_store")
    p.add_argument("--emotion-cache", dest="emotion_cache")
    p.add_argument("--modalities", help="comma list drawn from audio,emotion,text")
    p.add_argument("--language")
    p.add_argument("--no-pca", dest="no_pca", action="store_true")
    p.add_argument("--seed", type=int)
    if with_classifier:
        p.add_argument("--classifier", choices=list(experiments.CLASSIFIERS))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="abusekit",
                                     description="multimodal abusive-speech toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract-emotion", help="compute emotion feature vectors")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--sample-rate", dest="sample_rate", type=int,
                   default=data.ANALYSIS_SAMPLE_RATE)
    p.set_defaults(func=cmd_extract_emotion)

    p = sub.add_parser("import-embeddings", help="build a store from .npy files")
    p.add_argument("--src", required=True)
    p.add_argument("--modality", required=True, choices=list(embeddings.MODALITIES))
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_import_embeddings)

    p = sub.add_parser("fetch-embeddings", help="pull a store from an embedding service")
    p.add_argument("--base-url", dest="base_url", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--modality", required=True, choices=list(embeddings.MODALITIES))
    p.add_argument("--out", required=True)
    p.add_argument("--timeout", type=float, default=30.0)
    p.set_defaults(func=cmd_fetch_embeddings)

    p = sub.add_parser("fit-fusion", help="fit z-score + PCA on the training split")
    _add_config_flags(p, with_classifier=False)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fit_fusion)

    p = sub.add_parser("train", help="train a classifier on the training split")
    _add_config_flags(p)
    p.add_argument("--out", required=True)
    p.add_argument("--fusion-out", dest="fusion_out")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="evaluate a saved model on the test split")
    _add_config_flags(p)
    p.add_argument("--model", required=True)
    p.add_argument("--fusion")
    p.add_argument("--out")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("run", help="fit fusion, train and evaluate in one step")
    _add_config_flags(p)
    p.add_argument("--out", required=True)
    p.add_argument("--csv", help="append a summary row to this aggregate CSV")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("ablate", help="per-modality and all-modality grid")
    _add_config_flags(p, with_classifier=False)
    p.add_argument("--out", required=True)
    p.add_argument("--json-dir", dest="json_dir")
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("tsne", help="2-D embedding of cached emotion vectors")
    p.add_argument("--manifest", required=True)
    p.add_argument("--emotion-cache", dest="emotion_cache", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--perplexity", type=float, default=30.0)
    p.add_argument("--iters", type=int, default=1000)
    p.add_argument("--lr", type=float, default=200.0)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_tsne)

    return parser


def dispatch(argv: list[str]) -> int:
    """Parse argv and run the subcommand; returns the process exit code."""
    level = os.environ.get("ABUSEKIT_LOG", "INFO").upper()
    logging.basicConfig(level=getattr(logging, level, logging.INFO),
                        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except AbusekitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
