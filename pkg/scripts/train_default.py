#!/usr/bin/env python3
"""Generate the synthetic benchmark, train the default classifier, and print
the held-out evaluation report."""

import argparse

from rubble_probe import metrics, nn, synth
from rubble_probe.pipeline import save_pipeline, train_pipeline


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--per-class", type=int, default=120, help="clips per class")
    ap.add_argument("--epochs", type=int, default=60)
    ap.add_argument("--seed", type=int, default=42)
    ap.add_argument("--out", default=None, help="optional weights file to save")
    args = ap.parse_args()

    manifest = synth.generate_dataset(args.per_class, None, seed=args.seed, write_files=False)
    train_clips, train_labels = synth.synth_split(manifest, "train")
    test_clips, test_labels = synth.synth_split(manifest, "test")
    print(f"dataset: {len(train_clips)} train / {len(test_clips)} test clips, seed {args.seed}")

    cfg = nn.TrainConfig(epochs=args.epochs, rng_seed=args.seed)
    pipe, history = train_pipeline(train_clips, train_labels, cfg=cfg)
    print(f"trained {pipe.spec.param_count()} params for {args.epochs} epochs, "
          f"final loss {history['loss'][-1]:.4f}, val accuracy {history['val_accuracy'][-1]:.3f}")

    decisions = [pipe.predict_clip(c).decision for c in test_clips]
    matrix = metrics.confusion(decisions, test_labels)
    report = metrics.metrics_from_confusion(matrix)
    print(metrics.report_csv(matrix, report))

    if args.out:
        save_pipeline(pipe, args.out)
        print(f"weights -> {args.out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
