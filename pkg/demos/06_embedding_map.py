"""Project the learned embedding to 2-D and see the clusters.

After training, every frame has a unit-norm embedding.  A t-SNE projection
of those vectors makes the learned structure visible: pristine frames and
each forgery family should form their own regions when the triplet and
adversarial terms have done their job.

Run:  python3 demos/06_embedding_map.py
"""

from pathlib import Path

from triforge import (
    GeneratorConfig,
    RunConfig,
    build_train_config,
    in_memory_manifest,
    train,
    tsne_export,
)

OUT = Path("demo_runs/embedding")


def main():
    gen = GeneratorConfig(identities=10, frames=8, image_size=16,
                          families=("famA", "famB"), seed=33)
    manifest = in_memory_manifest(gen)

    rc = RunConfig(
        model={"image_size": 16, "channels": [4, 6, 8], "embed_dim": 16,
               "disc_hidden": 16},
        train={"learning_rate": 1e-3, "batch_size": 8, "epochs": 10,
               "beta": 0.25, "checkpoint_every": 0},
        data={"included_categories": ["famA", "famB"]},
    )
    cfg = build_train_config(rc, seed=2, preset="TL+GRL")
    result = train(manifest, cfg, OUT)
    print(f"trained {cfg.epochs} epochs on {result.triplet_count} triplets")

    csv_path = tsne_export(result.state, manifest, OUT / "tsne.csv",
                           seed=2, plot_path=OUT / "tsne.png")
    print(f"2-D coordinates: {csv_path}")
    print(f"scatter plot:    {OUT / 'tsne.png'}")
    print("each point is one frame, columns: x, y, authenticity, category")


if __name__ == "__main__":
    main()
