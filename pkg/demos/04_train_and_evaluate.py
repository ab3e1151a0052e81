"""End-to-end: generate data, train the full objective, read the report.

The full wiring combines three terms on one shared backbone:
  * a triplet loss pulling same-authenticity frames of an identity together,
  * a binary detection head, detached so its loss never shapes the backbone,
  * a category discriminator behind a gradient reversal layer.

Because the adversarial game at this tiny scale never reaches a fixed
point, the run keeps one snapshot per epoch and the best epoch is chosen
by training-set AUC, the usual early-stopping move.  Evaluation reports
ranking quality (AUC) and calibration (log loss) at frame and video
granularity, plus per-family AUC against the pristine frames.

Run:  python3 demos/04_train_and_evaluate.py
"""

from pathlib import Path

from triforge import (
    GeneratorConfig,
    RunConfig,
    build_train_config,
    evaluate,
    in_memory_manifest,
    load_checkpoint,
    train,
    write_report,
)

OUT = Path("demo_runs/train")
EPOCHS = 30


def main():
    gen = GeneratorConfig(identities=40, frames=8, image_size=16,
                          families=("famA", "famB"), seed=101)
    manifest = in_memory_manifest(gen)

    rc = RunConfig(
        model={"image_size": 16, "channels": [4, 6, 8], "embed_dim": 16,
               "disc_hidden": 16},
        train={"learning_rate": 1e-3, "batch_size": 8, "epochs": EPOCHS,
               "beta": 0.25, "checkpoint_every": 1},
        data={"included_categories": ["famA", "famB"]},
    )
    cfg = build_train_config(rc, seed=0, preset="TL+GRL+DH")
    result = train(manifest, cfg, OUT)
    print(f"trained on {result.triplet_count} triplets for {cfg.epochs} epochs "
          f"({result.state.step} steps)")

    first = result.log[0][2]
    last = result.log[-1][2]
    print("\nloss, first step -> last step:")
    for name in ("bce", "triplet", "forgery", "total"):
        print(f"  {name:8s} {getattr(first, name):8.4f} -> {getattr(last, name):8.4f}")

    best_auc, best_state, best_epoch = -1.0, None, 0
    for epoch in range(1, EPOCHS + 1):
        state = load_checkpoint(OUT / f"epoch{epoch:04d}.ckpt")
        auc = evaluate(state, manifest, "frame").row("frame").auc
        if auc > best_auc:
            best_auc, best_state, best_epoch = auc, state, epoch
    print(f"\nbest snapshot: epoch {best_epoch} of {EPOCHS}")

    report = evaluate(best_state, manifest, "both")
    print("evaluation:")
    for row in report.rows:
        print(f"  {row.granularity:6s} auc {row.auc:.4f}  logloss {row.logloss:.4f} "
              f" ({row.n_real} real / {row.n_fake} fake)")
    for family, auc in report.per_category.items():
        print(f"  frame auc, real vs {family}: {auc:.4f}")

    path = write_report(report, OUT / "report.csv")
    print(f"\nreport written to {path}")


if __name__ == "__main__":
    main()
