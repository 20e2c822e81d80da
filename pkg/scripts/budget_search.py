#!/usr/bin/env python3
"""Sweep frontend/width candidates under the device budget and print the
leaderboard."""

import argparse

from rubble_probe import synth, tuner


def ints(text: str) -> tuple:
    return tuple(int(v) for v in text.split(","))


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--per-class", type=int, default=40, help="training clips per class")
    ap.add_argument("--frontends", default="mfe,mfcc")
    ap.add_argument("--filters", type=ints, default=(16, 32, 40))
    ap.add_argument("--conv-widths", type=ints, default=(4, 8))
    ap.add_argument("--dense-widths", type=ints, default=(0,))
    ap.add_argument("--epochs", type=int, default=12)
    ap.add_argument("--seed", type=int, default=42)
    ap.add_argument("--sram-kib", type=int, default=256)
    ap.add_argument("--flash-kib", type=int, default=1024)
    args = ap.parse_args()

    manifest = synth.generate_dataset(args.per_class, None, seed=args.seed, write_files=False)
    clips, labels = synth.synth_split(manifest, "train")

    space = tuner.SearchSpace(
        frontend_kinds=tuple(args.frontends.split(",")),
        mel_filters=args.filters,
        conv_widths=args.conv_widths,
        dense_widths=args.dense_widths,
    )
    enum = tuner.enumerate_candidates(space)
    for desc, reason in enum.dropped:
        print(f"dropped {desc}: {reason}")

    budget = tuner.DeviceBudget(sram_bytes=args.sram_kib * 1024, flash_bytes=args.flash_kib * 1024)
    result = tuner.tune(enum.candidates, clips, labels, budget, epochs=args.epochs, seed=args.seed)
    print(tuner.leaderboard_csv(result.leaderboard))
    best = result.best
    print(f"winner: {best.candidate_id}  accuracy {best.accuracy:.3f}  "
          f"ram {best.cost.ram_bytes} B  rom {best.cost.rom_bytes} B  "
          f"latency {best.cost.latency_ms:.1f} ms")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
