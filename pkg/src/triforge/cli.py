"""Command-line entry points.

Verbs: ``synth`` writes a synthetic dataset, ``triplets`` materializes the
triplet table for a manifest, ``train`` runs the optimization loop,
``eval`` scores a manifest against a checkpoint, and ``tsne`` exports a 2-D
projection of the embeddings.  Exit codes: 0 on success, 1 on a validation
failure (bad flags, data, config, or checkpoint), 2 on a runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

from . import config as cfgmod
from . import metrics
from .exceptions import (
    CheckpointError,
    ConfigError,
    EvaluationError,
    ManifestError,
    ModelError,
    TriforgeError,
    TripletFormationError,
)
from .records import build_triplet_set, load_manifest
from .synth import make_synthetic_dataset
from .training import load_checkpoint, train

TRIPLET_FIELDS = ("anchor_ref", "positive_ref", "negative_ref", "l_a", "l_p", "l_n")

# Bad inputs or configuration exit 1; failures while doing the work exit 2.
_VALIDATION_ERRORS = (ConfigError, ManifestError, TripletFormationError, ModelError,
                      CheckpointError, EvaluationError)


class _Parser(argparse.ArgumentParser):
    """Argument errors are validation failures, so they exit 1, not 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="YAML run config")
    common.add_argument("--seed", type=int, metavar="N", help="override the run seed")
    common.add_argument("--out", metavar="DIR", help="output directory (beats TRIFORGE_OUT_DIR)")
    common.add_argument("--dry-run", action="store_true",
                        help="validate inputs and print the plan without writing anything")

    parser = _Parser(
        prog="triforge",
        description="Train and evaluate a face-forgery detector with triplet and "
                    "adversarial objectives.",
    )
    sub = parser.add_subparsers(dest="verb", required=True, metavar="VERB")

    p_synth = sub.add_parser("synth", parents=[common],
                             help="generate a synthetic forgery dataset")
    p_synth.add_argument("--identities", type=int, metavar="N")
    p_synth.add_argument("--frames", type=int, metavar="N")
    p_synth.add_argument("--image-size", type=int, metavar="PX")
    p_synth.add_argument("--families", metavar="A,B,...",
                         help="comma-separated forgery family names")
    p_synth.add_argument("--name", metavar="NAME", help="dataset name for the manifest")

    p_trip = sub.add_parser("triplets", parents=[common],
                            help="write the triplet table for a manifest")
    p_trip.add_argument("--manifest", metavar="PATH")

    p_train = sub.add_parser("train", parents=[common], help="train a detector")
    p_train.add_argument("--manifest", metavar="PATH")
    p_train.add_argument("--mode", choices=("full", "bitfit"), help="fine-tuning mode")
    p_train.add_argument("--preset", choices=sorted(cfgmod.PRESETS),
                         help="ablation wiring preset")
    p_train.add_argument("--epochs", type=int, metavar="N")
    p_train.add_argument("--resume", metavar="CKPT", help="continue from a checkpoint")
    p_train.add_argument("--no-grl", action="store_true",
                         help="disable gradient reversal (sets its scale to zero)")
    p_train.add_argument("--no-triplet", action="store_true",
                         help="disable the triplet term (sets its weight to zero)")
    p_train.add_argument("--no-detach", action="store_true",
                         help="let detection gradients reach the backbone")

    p_eval = sub.add_parser("eval", parents=[common],
                            help="evaluate a checkpoint on a manifest")
    p_eval.add_argument("--manifest", metavar="PATH")
    p_eval.add_argument("--checkpoint", metavar="CKPT")
    p_eval.add_argument("--granularity", choices=metrics.GRANULARITIES)

    p_tsne = sub.add_parser("tsne", parents=[common],
                            help="export a 2-D embedding projection")
    p_tsne.add_argument("--manifest", metavar="PATH")
    p_tsne.add_argument("--checkpoint", metavar="CKPT")
    p_tsne.add_argument("--plot", nargs="?", const="__default__", metavar="PNG",
                        help="also write a scatter plot (optional path)")
    return parser


def _load_config(args) -> cfgmod.RunConfig:
    if args.config:
        return cfgmod.load_run_config(args.config)
    return cfgmod.RunConfig()


def _require(value, flag: str, config_path: str):
    if value is None:
        raise ConfigError(f"missing {flag}; pass it or set {config_path} in the config")
    return value


def _manifest_for(args, cfg):
    path = args.manifest or cfg.data.get("manifest")
    return load_manifest(_require(path, "--manifest", "data.manifest"))


def cmd_synth(args) -> int:
    cfg = _load_config(args)
    seed = cfgmod.resolve_seed(cfg, args.seed)
    out_dir = cfgmod.resolve_out_dir(cfg, args.out)
    overrides = {
        "identities": args.identities,
        "frames": args.frames,
        "image_size": args.image_size,
        "families": tuple(args.families.split(",")) if args.families else None,
        "dataset_name": args.name,
    }
    gen = cfgmod.build_generator_config(cfg, seed, overrides)
    dataset_dir = out_dir / "dataset"
    n_images = gen.identities * gen.frames * (1 + len(gen.families))
    if args.dry_run:
        print(f"dry run: would write {n_images} images "
              f"({gen.identities} identities x {gen.frames} frames x "
              f"{1 + len(gen.families)} categories) to {dataset_dir}")
        return 0
    manifest = make_synthetic_dataset(gen, dataset_dir)
    print(f"wrote dataset: {dataset_dir / 'manifest.jsonl'} ({len(manifest)} records)")
    return 0


def cmd_triplets(args) -> int:
    cfg = _load_config(args)
    out_dir = cfgmod.resolve_out_dir(cfg, args.out)
    manifest = _manifest_for(args, cfg)
    included = tuple(cfg.data.get("included_categories") or
                     (c for c in manifest.categories() if c != "real"))
    if not included:
        raise ManifestError("manifest yields no triplets: it contains no fake samples")
    triplets = build_triplet_set(manifest, included)
    if args.dry_run:
        print(f"dry run: would write {len(triplets)} triplets to {out_dir / 'triplets.csv'}")
        return 0
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "triplets.csv"
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRIPLET_FIELDS)
        for t in triplets:
            writer.writerow([t.anchor.payload_ref, t.positive.payload_ref,
                             t.negative.payload_ref, *t.element_labels])
    print(f"wrote triplets: {path} ({len(triplets)} triplets)")
    return 0


def cmd_train(args) -> int:
    cfg = _load_config(args)
    seed = cfgmod.resolve_seed(cfg, args.seed)
    out_dir = cfgmod.resolve_out_dir(cfg, args.out)
    manifest = _manifest_for(args, cfg)
    if args.mode:
        cfg.train["mode"] = args.mode
    flag_overrides = {"epochs": args.epochs}
    if args.no_grl:
        flag_overrides["grl_lambda"] = 0.0
    if args.no_triplet:
        flag_overrides["alpha"] = 0.0
    if args.no_detach:
        flag_overrides["detach_head"] = False
    tcfg = cfgmod.build_train_config(cfg, seed, preset=args.preset,
                                     flag_overrides=flag_overrides)
    included = tcfg.included_categories or tuple(
        c for c in manifest.categories() if c != "real")
    if not included:
        raise ManifestError("manifest yields no triplets: it contains no fake samples")
    n = len(build_triplet_set(manifest, included))
    if n == 0:
        raise ManifestError("manifest yields no triplets under the included categories")
    if args.dry_run:
        batches = -(-n // tcfg.batch_size)
        print(f"dry run: {n} triplets, {batches} batches/epoch x {tcfg.epochs} epochs "
              f"(mode={tcfg.finetune_mode}, alpha={tcfg.alpha}, beta={tcfg.beta}, "
              f"grl_lambda={tcfg.grl_lambda}, detach_head={tcfg.detach_head}); "
              f"outputs would go to {out_dir}")
        return 0
    result = train(manifest, tcfg, out_dir, resume_from=args.resume)
    final = result.log[-1][2] if result.log else None
    if final is not None:
        print(f"final losses: bce={final.bce:.4f} triplet={final.triplet:.4f} "
              f"forgery={final.forgery:.4f} total={final.total:.4f}")
    print(f"wrote checkpoint: {result.checkpoint_path} "
          f"({result.triplet_count} triplets, {result.state.step} steps)")
    return 0


def cmd_eval(args) -> int:
    cfg = _load_config(args)
    out_dir = cfgmod.resolve_out_dir(cfg, args.out)
    if args.manifest:
        manifest_paths = [args.manifest]
    else:
        manifest_paths = cfg.eval.get("manifests") or [cfg.data.get("manifest")]
        if manifest_paths == [None]:
            raise ConfigError("missing --manifest; pass it or set eval.manifests "
                              "or data.manifest in the config")
    manifests = [load_manifest(p) for p in manifest_paths]
    ckpt = _require(args.checkpoint or cfg.eval.get("checkpoint"),
                    "--checkpoint", "eval.checkpoint")
    granularity = args.granularity or cfg.eval.get("granularity") or "frame"
    state = load_checkpoint(ckpt)
    if args.dry_run:
        for manifest in manifests:
            print(f"dry run: would score {len(manifest)} records from "
                  f"{manifest.dataset_name!r} at {granularity} granularity against {ckpt}")
        return 0
    reports = [metrics.evaluate(state, manifest, granularity) for manifest in manifests]
    path = metrics.write_report(reports, out_dir / "report.csv")
    for report in reports:
        for row in report.rows:
            print(f"{row.dataset} {row.granularity}: auc={row.auc:.4f} "
                  f"logloss={row.logloss:.4f} n_real={row.n_real} n_fake={row.n_fake}")
        for category, auc in sorted(report.per_category.items()):
            print(f"  {category}: auc={auc:.4f}")
    print(f"wrote report: {path}")
    return 0


def cmd_tsne(args) -> int:
    cfg = _load_config(args)
    seed = cfgmod.resolve_seed(cfg, args.seed)
    out_dir = cfgmod.resolve_out_dir(cfg, args.out)
    manifest = _manifest_for(args, cfg)
    ckpt = _require(args.checkpoint or cfg.tsne.get("checkpoint"),
                    "--checkpoint", "tsne.checkpoint")
    plot = args.plot if args.plot is not None else cfg.tsne.get("plot")
    plot_path = None
    if plot is not None:
        plot_path = out_dir / "tsne.png" if plot == "__default__" else Path(plot)
    state = load_checkpoint(ckpt)
    if args.dry_run:
        print(f"dry run: would project {len(manifest)} embeddings to "
              f"{out_dir / 'tsne.csv'}" + (f" and plot to {plot_path}" if plot_path else ""))
        return 0
    path = metrics.tsne_export(state, manifest, out_dir / "tsne.csv",
                               seed=seed, plot_path=plot_path)
    print(f"wrote projection: {path} ({len(manifest)} rows)")
    if plot_path is not None:
        print(f"wrote plot: {plot_path}")
    return 0


_COMMANDS = {
    "synth": cmd_synth,
    "triplets": cmd_triplets,
    "train": cmd_train,
    "eval": cmd_eval,
    "tsne": cmd_tsne,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.verb](args)
    except _VALIDATION_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (TriforgeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
