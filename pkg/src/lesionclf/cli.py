"""Command-line front end: extract features, train, evaluate, predict.

Exit codes: 0 success, 1 runtime/data error, 2 usage error. Standard
output lines are machine-parseable ``key=value`` pairs.
"""

from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np
from PIL import Image

from . import dataset, embedding, evaluate, preprocess, train
from .config import PipelineConfig, load_config, resolve_seed
from .errors import BackendMismatch, EmptyDataset, LabelMissing, LesionError
from .mlp import forward
from .preprocess import IMAGE_SIDE, TransformKind

# CLI task names use a hyphen; internal names use an underscore.
_CLI_TASKS = {"malignancy": "malignancy", "cell-origin": "cell_origin"}


def _load_pipeline_config(path: str | None) -> PipelineConfig:
    return load_config(path) if path else PipelineConfig()


def _make_backend(parser: argparse.ArgumentParser, args, config: PipelineConfig):
    if args.backend == "pretrained":
        if not args.model:
            parser.error("--backend pretrained requires --model")
        return embedding.pretrained_backend(args.model, config.normalization)
    seed = resolve_seed(args.seed, config)
    return embedding.stub_backend(seed)


def _embed_file(backend, image_id: str, path: Path) -> tuple[str, np.ndarray, np.ndarray]:
    try:
        resized = preprocess.resize_bilinear(preprocess.load_image(path), IMAGE_SIDE, IMAGE_SIDE)
        return image_id, resized, embedding.embed(backend, resized)
    except LesionError as exc:
        raise type(exc)(f"image {image_id!r}: {exc}") from exc


def _save_png(tensor: np.ndarray, path: Path) -> None:
    pixels = np.clip(np.rint(tensor * 255.0), 0, 255).astype(np.uint8)
    Image.fromarray(pixels, mode="RGB").save(path)


def cmd_extract(parser: argparse.ArgumentParser, args) -> int:
    if args.dump_augmented and not args.augmented_out:
        parser.error("--dump-augmented requires --augmented-out")
    config = _load_pipeline_config(args.config)
    backend = _make_backend(parser, args, config)
    images = dataset.discover_images(args.images)
    if not images:
        raise EmptyDataset(f"no images found in {args.images}")
    seed = resolve_seed(args.seed, config)

    selected: list[str] = []
    if args.augmented_out:
        selected = preprocess.select_augmentation_subset(
            [image_id for image_id, _ in images], config.augment_fraction, seed
        )
    selected_set = set(selected)

    workers = args.workers or os.cpu_count() or 1
    keep: dict[str, np.ndarray] = {}
    entries = []
    with ThreadPoolExecutor(max_workers=workers) as pool:
        results = pool.map(lambda item: _embed_file(backend, *item), images)
        for image_id, resized, vector in results:
            entries.append((image_id, vector))
            if image_id in selected_set:
                keep[image_id] = resized
    embedding.write_feature_cache(args.out, entries, backend.backend_id)
    print(f"features={args.out} count={len(entries)}")

    if args.augmented_out:
        dump_dir = Path(args.dump_augmented) if args.dump_augmented else None
        if dump_dir:
            dump_dir.mkdir(parents=True, exist_ok=True)
        augmented_entries = []
        for source_id in selected:
            for kind in TransformKind:
                tensor = preprocess.apply_transform(
                    keep[source_id],
                    kind,
                    preprocess.image_seed(seed, source_id),
                    crop_fraction=config.crop_fraction,
                    scale_min=config.scale_min,
                    scale_max=config.scale_max,
                    brightness_factor=config.brightness_factor,
                )
                augmented_id = preprocess.augmented_image_id(source_id, kind)
                if dump_dir:
                    _save_png(tensor, dump_dir / f"{augmented_id.replace('#', '_')}.png")
                augmented_entries.append((augmented_id, embedding.embed(backend, tensor)))
        embedding.write_feature_cache(args.augmented_out, augmented_entries, backend.backend_id)
        print(f"augmented_features={args.augmented_out} count={len(augmented_entries)}")
    return 0


def _read_labels(path: str, accept_isic: bool) -> list[dataset.GroundTruthRecord]:
    return dataset.parse_ground_truth(Path(path).read_text(encoding="utf-8"), accept_isic)


def _labelled_features(
    caches: list[tuple[str, list[tuple[str, np.ndarray]]]],
    records: list[dataset.GroundTruthRecord],
    task: str,
) -> tuple[list[tuple[str, np.ndarray]], dict[str, int]]:
    """Select cached vectors for the labelled ids; augmented entries
    (``<src>#<kind>``) inherit the labels of their source image."""
    by_record = {r.image_id: r for r in records}
    features = []
    labels = {}
    seen_sources = set()
    for _, entries in caches:
        for image_id, vector in entries:
            source_id = image_id.split("#", 1)[0]
            record = by_record.get(source_id)
            if record is None:
                continue
            seen_sources.add(source_id)
            features.append((image_id, vector))
            labels[image_id] = record.label_for(task)
    missing = [r.image_id for r in records if r.image_id not in seen_sources]
    if missing:
        raise LabelMissing(
            f"{len(missing)} labelled id(s) missing from the feature cache(s): " + ", ".join(missing[:20])
        )
    return features, labels


def cmd_train(parser: argparse.ArgumentParser, args) -> int:
    config = _load_pipeline_config(args.config)
    task = _CLI_TASKS[args.task]

    backend_id, entries = embedding.read_feature_cache(args.features)
    caches = [(backend_id, entries)]
    if args.augmented_features:
        aug_backend_id, aug_entries = embedding.read_feature_cache(args.augmented_features)
        if aug_backend_id != backend_id:
            raise BackendMismatch(
                f"feature caches come from different backends: {backend_id!r} vs {aug_backend_id!r}"
            )
        caches.append((aug_backend_id, aug_entries))

    records = _read_labels(args.labels, args.isic_labels)
    features, labels = _labelled_features(caches, records, task)

    train_config = train.TrainConfig(
        task=task,
        iterations=config.iterations,
        batch_size=config.batch_size,
        hyper=config.adam_hyper(),
        seed=resolve_seed(None, config),
        log_every=config.log_every,
        hidden_activation=config.hidden_activation,
    )
    params, log = train.train_task(features, labels, train_config)
    train.save_checkpoint(params, args.out)
    train.write_training_log(log, args.log)
    final = log.final()
    print(
        f"task={args.task} final_iteration={final.iteration} "
        f"final_loss={final.loss:.6g} final_train_accuracy={final.train_accuracy:.6g}"
    )
    return 0


def cmd_eval(parser: argparse.ArgumentParser, args) -> int:
    config = _load_pipeline_config(args.config)
    backend_id, entries = embedding.read_feature_cache(args.features)
    records = _read_labels(args.labels, args.isic_labels)

    cached = dict(entries)
    missing = [r.image_id for r in records if r.image_id not in cached]
    if missing:
        raise LabelMissing(
            f"{len(missing)} labelled id(s) missing from the feature cache: " + ", ".join(missing[:20])
        )
    ids = [r.image_id for r in records]
    x = np.stack([cached[image_id] for image_id in ids])

    scores = []
    for model_path in (args.model_task1, args.model_task2):
        params = train.load_checkpoint(model_path)
        scores.append(evaluate.predict_probs(params, x, config.hidden_activation)[:, 1])
    y1 = np.array([r.malignant for r in records], dtype=np.intp)
    y2 = np.array([r.nonmelanocytic for r in records], dtype=np.intp)

    report = evaluate.evaluation_report((scores[0], y1), (scores[1], y2), ids, ids)
    evaluate.write_report(report, args.report)
    if args.roc_dir:
        roc_dir = Path(args.roc_dir)
        roc_dir.mkdir(parents=True, exist_ok=True)
        for task_eval in report.tasks:
            if task_eval.roc is not None:
                evaluate.write_roc_csv(task_eval.roc, roc_dir / f"roc_{task_eval.task}.csv")

    failed = [t for t in report.tasks if t.error is not None]
    if failed:
        for task_eval in failed:
            print(f"error: task {task_eval.task}: {task_eval.error}", file=sys.stderr)
        return 1
    print(f"mean_auc={report.mean_auc:.6g}")
    return 0


def cmd_predict(parser: argparse.ArgumentParser, args) -> int:
    config = _load_pipeline_config(args.config)
    backend = _make_backend(parser, args, config)
    _, _, vector = _embed_file(backend, Path(args.image).stem, Path(args.image))

    models = [("malignancy", args.model_task1), ("cell-origin", args.model_task2)]
    for display_name, model_path in models:
        params = train.load_checkpoint(model_path)
        probs = forward(params, vector, config.hidden_activation).probs
        positive = float(probs[1])
        label = 1 if positive > 0.5 else 0
        print(f"{display_name} p(positive)={positive:.6g} label={label}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lesionclf",
        description="Dermoscopic skin-lesion classification from frozen CNN embeddings.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    extract = sub.add_parser("extract", help="embed images into a feature cache")
    extract.add_argument("--images", required=True, help="directory of JPEG/PNG images")
    extract.add_argument("--backend", required=True, choices=("pretrained", "stub"))
    extract.add_argument("--model", help="ONNX model file (pretrained backend)")
    extract.add_argument("--seed", type=int, help="stub backend / augmentation seed")
    extract.add_argument("--out", required=True, help="feature cache CSV to write")
    extract.add_argument("--augmented-out", help="also write a cache of augmented variants")
    extract.add_argument("--dump-augmented", metavar="DIR", help="write augmented images as PNG")
    extract.add_argument("--config", help="pipeline config file")
    extract.add_argument("--workers", type=int, help="embedding worker threads")
    extract.set_defaults(handler=cmd_extract, parser_=extract)

    train_cmd = sub.add_parser("train", help="train one task's classifier")
    train_cmd.add_argument("--features", required=True, help="feature cache CSV")
    train_cmd.add_argument("--labels", required=True, help="ground-truth CSV")
    train_cmd.add_argument("--task", required=True, choices=tuple(_CLI_TASKS))
    train_cmd.add_argument("--config", help="pipeline config file")
    train_cmd.add_argument("--out", required=True, help="checkpoint file to write")
    train_cmd.add_argument("--log", required=True, help="training-curve CSV to write")
    train_cmd.add_argument("--augmented-features", help="optional augmented feature cache")
    train_cmd.add_argument("--isic-labels", action="store_true", help="accept the ISIC 2017 header")
    train_cmd.set_defaults(handler=cmd_train, parser_=train_cmd)

    eval_cmd = sub.add_parser("eval", help="evaluate both tasks and write a report")
    eval_cmd.add_argument("--features", required=True)
    eval_cmd.add_argument("--labels", required=True)
    eval_cmd.add_argument("--model-task1", required=True, help="malignancy checkpoint")
    eval_cmd.add_argument("--model-task2", required=True, help="cell-origin checkpoint")
    eval_cmd.add_argument("--report", required=True, help="JSON report to write")
    eval_cmd.add_argument("--roc-dir", help="directory for per-task ROC CSVs")
    eval_cmd.add_argument("--config", help="pipeline config file")
    eval_cmd.add_argument("--isic-labels", action="store_true", help="accept the ISIC 2017 header")
    eval_cmd.set_defaults(handler=cmd_eval, parser_=eval_cmd)

    predict = sub.add_parser("predict", help="classify one image with both models")
    predict.add_argument("--image", required=True)
    predict.add_argument("--backend", required=True, choices=("pretrained", "stub"))
    predict.add_argument("--model", help="ONNX model file (pretrained backend)")
    predict.add_argument("--seed", type=int, help="stub backend seed")
    predict.add_argument("--model-task1", required=True, help="malignancy checkpoint")
    predict.add_argument("--model-task2", required=True, help="cell-origin checkpoint")
    predict.add_argument("--config", help="pipeline config file")
    predict.set_defaults(handler=cmd_predict, parser_=predict)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args.parser_, args)
    except (LesionError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
