"""Command-line interface: train, eval, categorize, diagnose.

Exit codes: 0 success, 1 runtime failure, 2 usage error.  Every train
run prints its fully resolved configuration and persists it next to the
checkpoints, so a run can be reproduced from its artifacts alone.
"""

from __future__ import annotations

import argparse
import dataclasses
import difflib
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import checkpoint as ckpt_mod
from .checkpoint import Checkpoint, dataset_fingerprint, load_checkpoint, save_checkpoint
from .dataset import categorize_relations, complex_triple_fraction, load_dataset
from .diagnostics import (
    export_entity_embeddings,
    export_relation_histograms,
    relation_diagnostics,
)
from .errors import CheckpointError, DatasetError
from .evaluation import evaluate
from .model import init_model, model_from_preset
from .scoring import PRESETS, compound_spec
from .training import TrainConfig, train
from .transforms import chain_from_string

USAGE_ERROR = 2

ORDER_TOKENS_HINT = "order strings use the letters T, R, S, each at most once"


@dataclasses.dataclass
class RunConfig:
    """Fully resolved description of one training run."""

    data: str
    variant: str = "full"
    head_order: str = "SRT"
    tail_order: str = "SRT"
    preset: str | None = None
    dim: int = 200
    norm: str = "l1"
    shared_rotation: bool = True
    learning_rate: float = 1e-3
    batch_size: int = 256
    neg_size: int = 64
    alpha: float = 1.0
    margin: float = 6.0
    steps: int = 10000
    seed: int = 0
    valid_interval: int = 1000
    valid_limit: int | None = None
    save: str | None = None
    deterministic: bool = False

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        return cls(**json.loads(text))


def _build_model(config: RunConfig, n_entities: int, n_relations: int):
    rng = np.random.default_rng(config.seed)
    if config.preset is not None:
        preset = PRESETS[config.preset](config.dim, _norm(config.norm))
        return model_from_preset(preset, n_entities, n_relations, rng)
    spec = compound_spec(
        config.variant, config.head_order, config.tail_order, config.dim, config.norm
    )
    return init_model(
        spec, n_entities, n_relations, rng, shared_rotation=config.shared_rotation
    )


def _norm(name: str):
    from .scoring import Norm

    return Norm(name.lower())


def _train_config(config: RunConfig) -> TrainConfig:
    return TrainConfig(
        learning_rate=config.learning_rate,
        batch_size=config.batch_size,
        negative_size=config.neg_size,
        adversarial_temperature=config.alpha,
        margin=config.margin,
        max_steps=config.steps,
        seed=config.seed,
        valid_interval=config.valid_interval,
        valid_limit=config.valid_limit,
    )


def cmd_train(args) -> int:
    if args.config:
        # replay a persisted run_config.json exactly; --save may redirect
        config = RunConfig.from_json(Path(args.config).read_text())
        if args.save:
            config.save = args.save
    else:
        if not args.data:
            print("error: --data is required (or pass --config)", file=sys.stderr)
            return USAGE_ERROR
        if args.preset and (args.head_order or args.tail_order):
            print(
                "error: --preset conflicts with explicit --head-order/--tail-order",
                file=sys.stderr,
            )
            return USAGE_ERROR
        for flag, value in (
            ("--head-order", args.head_order),
            ("--tail-order", args.tail_order),
        ):
            if value:
                try:
                    chain_from_string(value)
                except ValueError as exc:
                    print(f"error: {flag}: {exc} ({ORDER_TOKENS_HINT})", file=sys.stderr)
                    return USAGE_ERROR
        config = RunConfig(
            data=args.data,
            variant=args.variant,
            head_order=args.head_order or "SRT",
            tail_order=args.tail_order or "SRT",
            preset=args.preset,
            dim=args.dim,
            norm=args.norm,
            shared_rotation=not args.no_shared_rotation,
            learning_rate=args.lr,
            batch_size=args.batch_size,
            neg_size=args.neg_size,
            alpha=args.alpha,
            margin=args.margin,
            steps=args.steps,
            seed=args.seed,
            valid_interval=args.valid_interval,
            valid_limit=args.valid_limit,
            save=args.save,
            deterministic=args.deterministic,
        )
    print(config.to_json())

    if config.deterministic:
        os.environ["COMPOUND_KGE_THREADS"] = "1"

    store = load_dataset(config.data)
    print(
        f"dataset: {store.n_entities} entities, {store.n_relations} relations, "
        f"{len(store.train)}/{len(store.valid)}/{len(store.test)} triples"
    )
    model = _build_model(config, store.n_entities, store.n_relations)
    fingerprint = dataset_fingerprint(store.entity_names, store.relation_names)

    save_dir = Path(config.save) if config.save else None
    log_path = None
    if save_dir:
        save_dir.mkdir(parents=True, exist_ok=True)
        (save_dir / "run_config.json").write_text(config.to_json() + "\n")
        log_path = save_dir / "training_log.csv"

    result = train(store, model, _train_config(config), log_path=log_path)

    if save_dir:
        for name, m, state in (
            ("last", result.model, result.final_rng_state),
            ("best", result.best_model, result.best_rng_state),
        ):
            save_checkpoint(
                save_dir / f"{name}.ckpt",
                Checkpoint(
                    model=m,
                    entity_names=store.entity_names,
                    relation_names=store.relation_names,
                    dataset_hash=fingerprint,
                    rng_state=state,
                ),
            )
        print(f"checkpoints written to {save_dir}")

    if len(store.valid):
        categories = categorize_relations(store)
        report = evaluate(result.best_model, store, "valid", categories)
        print("final validation metrics (best checkpoint):")
        print(report.to_text())
    else:
        print("validation split empty; skipping final metrics")
    return 0


def cmd_eval(args) -> int:
    ckpt = load_checkpoint(args.checkpoint)
    store = load_dataset(args.data)
    fingerprint = dataset_fingerprint(store.entity_names, store.relation_names)
    if ckpt.dataset_hash and ckpt.dataset_hash != fingerprint:
        print(
            "error: checkpoint/dataset mismatch:\n"
            f"  checkpoint dictionaries hash: {ckpt.dataset_hash}\n"
            f"  dataset dictionaries hash:    {fingerprint}",
            file=sys.stderr,
        )
        return 1
    categories = categorize_relations(store, eta=args.eta)
    report = evaluate(ckpt.model, store, args.split, categories)
    print(report.to_text())
    if args.out:
        Path(args.out).write_text(report.to_json(indent=2) + "\n")
        print(f"report written to {args.out}")
    return 0


def cmd_categorize(args) -> int:
    store = load_dataset(args.data)
    categories = categorize_relations(store, eta=args.eta)
    print(f"{'relation':<40} {'hpt':>8} {'tph':>8}  category")
    for cat in categories:
        name = store.relation_names[cat.relation]
        flag = "" if cat.in_training else "  (not in training split)"
        print(
            f"{name:<40} {cat.hpt:>8.3f} {cat.tph:>8.3f}  {cat.category.value}{flag}"
        )
    fraction = complex_triple_fraction(store, categories)
    print(f"fraction of training triples with non-1-to-1 relations: {fraction:.4f}")
    return 0


def cmd_diagnose(args) -> int:
    ckpt = load_checkpoint(args.checkpoint)
    model = ckpt.model
    names = ckpt.relation_names

    if args.all:
        rids = list(range(model.n_relations))
    else:
        if args.relation not in names:
            close = difflib.get_close_matches(args.relation, names, n=3)
            hint = f"; closest names: {close}" if close else ""
            print(f"error: unknown relation {args.relation!r}{hint}", file=sys.stderr)
            return 1
        rids = [names.index(args.relation)]

    print(
        f"{'relation':<40} {'sing_frac':>10} {'det_min':>12} "
        f"{'sym_residual':>13} {'sing_blocks':>12}"
    )
    for rid in rids:
        d = relation_diagnostics(model, rid)
        residual = "n/a" if math.isnan(d.symmetry_residual) else f"{d.symmetry_residual:.6f}"
        print(
            f"{names[rid]:<40} {d.singularity_fraction:>10.4f} "
            f"{d.block_det_min:>12.4e} {residual:>13} {d.singular_blocks:>12d}"
        )

    if args.export_histograms:
        out_dir = Path(args.export_histograms)
        out_dir.mkdir(parents=True, exist_ok=True)
        for rid in rids:
            safe = names[rid].replace("/", "_").replace(" ", "_") or f"relation_{rid}"
            export_relation_histograms(
                model, rid, bins=args.bins, out_path=out_dir / f"{safe}.csv"
            )
        print(f"histograms written to {out_dir}")
    if args.export_embeddings:
        n = export_entity_embeddings(
            model, ckpt.entity_names, args.export_embeddings, args.labels
        )
        print(f"{n} entity embeddings written to {args.export_embeddings}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="compound-kge",
        description="Knowledge-graph embedding with compound geometric operators.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train a model on a triple directory")
    p_train.add_argument("--data", default=None, help="dataset directory")
    p_train.add_argument(
        "--config", default=None, help="replay a persisted run_config.json"
    )
    p_train.add_argument("--variant", choices=["head", "tail", "full"], default="full")
    p_train.add_argument(
        "--head-order", default=None, help="head operator product, e.g. SRT"
    )
    p_train.add_argument(
        "--tail-order", default=None, help="tail operator product, e.g. SRT"
    )
    p_train.add_argument("--preset", choices=sorted(PRESETS), default=None)
    p_train.add_argument("--dim", type=int, default=200)
    p_train.add_argument("--lr", type=float, default=1e-3)
    p_train.add_argument("--batch-size", type=int, default=256)
    p_train.add_argument("--neg-size", type=int, default=64)
    p_train.add_argument("--alpha", type=float, default=1.0)
    p_train.add_argument("--margin", type=float, default=6.0)
    p_train.add_argument("--steps", type=int, default=10000)
    p_train.add_argument("--seed", type=int, default=0)
    p_train.add_argument("--norm", choices=["l1", "l2"], default="l1")
    p_train.add_argument("--valid-interval", type=int, default=1000)
    p_train.add_argument(
        "--valid-limit", type=int, default=None, help="cap validation triples"
    )
    p_train.add_argument(
        "--no-shared-rotation",
        action="store_true",
        help="give head and tail chains independent rotation angles",
    )
    p_train.add_argument("--save", default=None, help="directory for checkpoints")
    p_train.add_argument("--deterministic", action="store_true")
    p_train.set_defaults(func=cmd_train)

    p_eval = sub.add_parser("eval", help="evaluate a checkpoint")
    p_eval.add_argument("--checkpoint", required=True)
    p_eval.add_argument("--data", required=True)
    p_eval.add_argument("--split", choices=["valid", "test"], default="test")
    p_eval.add_argument("--eta", type=float, default=1.5)
    p_eval.add_argument("--out", default=None, help="write the JSON report here")
    p_eval.set_defaults(func=cmd_eval)

    p_cat = sub.add_parser("categorize", help="relation cardinality categories")
    p_cat.add_argument("--data", required=True)
    p_cat.add_argument("--eta", type=float, default=1.5)
    p_cat.set_defaults(func=cmd_categorize)

    p_diag = sub.add_parser("diagnose", help="operator diagnostics of a checkpoint")
    p_diag.add_argument("--checkpoint", required=True)
    group = p_diag.add_mutually_exclusive_group(required=True)
    group.add_argument("--relation", help="relation name")
    group.add_argument("--all", action="store_true")
    p_diag.add_argument("--export-histograms", default=None, help="output directory")
    p_diag.add_argument("--export-embeddings", default=None, help="output CSV path")
    p_diag.add_argument("--labels", default=None, help="entity label file (TSV)")
    p_diag.add_argument("--bins", type=int, default=50)
    p_diag.set_defaults(func=cmd_diagnose)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (DatasetError, CheckpointError, OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
