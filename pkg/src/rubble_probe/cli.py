"""Command line front door: data generation, training, evaluation, candidate
tuning, single-clip inference, simulation, the gateway server, and the
calibration report."""

from __future__ import annotations

import argparse
import asyncio
import json
import os
import sys
import time

import numpy as np

from . import gateway as gw
from . import metrics, nn, sim, synth, tuner
from .dsp import AudioClip, SAMPLE_RATE_HZ
from .labels import LABELS
from .pipeline import load_pipeline, save_pipeline, train_pipeline
from .telemetry import (
    PredictionBlock,
    bundled_calibration_tables,
    calibration_report,
    emit_prediction_block,
    load_calibration_csv,
    survivability,
)
from .wavio import read_wav

DEFAULT_SEED = 42


def _seed_default() -> int:
    env = os.environ.get("RUBBLE_SEED")
    return int(env) if env else DEFAULT_SEED


def _load_dataset_split(data_dir: str, split: str):
    manifest = synth.load_manifest(os.path.join(data_dir, "manifest.json"))
    first = manifest.entries[0]
    if os.path.exists(os.path.join(data_dir, first.path)):
        return synth.load_split(manifest, data_dir, split)
    return synth.synth_split(manifest, split)


def _load_map(spec: str) -> sim.RubbleMap:
    if spec == "demo":
        return sim.demo_map()
    return sim.load_map(spec)


def _print_json(obj) -> None:
    print(json.dumps(obj, indent=2, sort_keys=True, default=_json_scalar))


def _json_scalar(value):
    # numpy integers/floats leak out of metrics arrays
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    raise TypeError(f"not JSON serializable: {type(value).__name__}")


def cmd_gen_data(args) -> int:
    manifest = synth.generate_dataset(
        args.per_class, args.out, seed=args.seed, train_fraction=args.train_fraction
    )
    counts = manifest.counts()
    if args.json:
        _print_json({"out": args.out, "seed": args.seed, "counts": counts})
    else:
        print(f"wrote {len(manifest.entries)} clips under {args.out}")
        for split in ("train", "test"):
            total = sum(v[split] for v in counts.values())
            print(f"  {split}: {total}  " + "  ".join(f"{k}={v[split]}" for k, v in sorted(counts.items())))
    return 0


def cmd_train(args) -> int:
    clips, labels = _load_dataset_split(args.data, "train")
    cfg = nn.TrainConfig(epochs=args.epochs, rng_seed=args.seed)
    pipe, history = train_pipeline(clips, labels, cfg=cfg)
    save_pipeline(pipe, args.out, quantized=args.quantized)
    final = {k: (v[-1] if v else None) for k, v in history.items()}
    if args.json:
        _print_json({"weights": args.out, "epochs": args.epochs, "final": final,
                     "params": pipe.spec.param_count()})
    else:
        print(f"trained {pipe.spec.param_count()} params for {args.epochs} epochs on {len(clips)} clips")
        print(f"  final loss {final['loss']:.4f}  val accuracy {final['val_accuracy']:.3f}")
        print(f"  weights -> {args.out}")
    return 0


def cmd_eval(args) -> int:
    pipe = load_pipeline(args.weights)
    clips, truths = _load_dataset_split(args.data, args.split)
    decisions = [pipe.predict_clip(c).decision for c in clips]
    matrix = metrics.confusion(decisions, truths)
    report = metrics.metrics_from_confusion(matrix)
    if args.json:
        _print_json({"confusion": [list(row) for row in matrix.counts],
                     "uncertain": list(matrix.uncertain), **report.as_dict()})
    else:
        print(metrics.render_confusion(matrix))
        for lbl, f1 in zip(report.labels, report.f1):
            print(f"  F1 {lbl}: {f1:.2f}")
        print(f"  accuracy: {report.accuracy * 100:.1f}%")
    return 0


def cmd_tune(args) -> int:
    clips, labels = _load_dataset_split(args.data, "train")
    space = tuner.SearchSpace(
        frontend_kinds=tuple(args.frontends.split(",")),
        mel_filters=tuple(int(v) for v in args.filters.split(",")),
        conv_widths=tuple(int(v) for v in args.conv_widths.split(",")),
        dense_widths=tuple(int(v) for v in args.dense_widths.split(",")),
    )
    enum = tuner.enumerate_candidates(space)
    for desc, reason in enum.dropped:
        print(f"dropped {desc}: {reason}", file=sys.stderr)
    result = tuner.tune(enum.candidates, clips, labels, epochs=args.epochs, seed=args.seed)
    csv_text = tuner.leaderboard_csv(result.leaderboard)
    if args.csv:
        with open(args.csv, "w") as fh:
            fh.write(csv_text)
    if args.json:
        _print_json({
            "best": result.best.candidate_id,
            "accuracy": result.best.accuracy,
            "ram_bytes": result.best.cost.ram_bytes,
            "rom_bytes": result.best.cost.rom_bytes,
            "latency_ms": result.best.cost.latency_ms,
        })
    else:
        print(csv_text, end="")
        print(f"best: {result.best.candidate_id} (val accuracy {result.best.accuracy:.3f})")
    return 0


def cmd_infer(args) -> int:
    pipe = load_pipeline(args.weights)
    clip = read_wav(args.wav, strict_rate=SAMPLE_RATE_HZ)
    if len(clip) < SAMPLE_RATE_HZ:
        raise ValueError(f"{args.wav}: need at least 1 s of audio, got {len(clip)} samples")
    if len(clip) > SAMPLE_RATE_HZ:
        clip = AudioClip(clip.samples[:SAMPLE_RATE_HZ], clip.sample_rate_hz, clip.label)
    t0 = time.perf_counter()
    feats = pipe.features_for(clip)
    t1 = time.perf_counter()
    result = nn.predict(pipe.spec, pipe.weights, feats, pipe.threshold)
    t2 = time.perf_counter()
    block = PredictionBlock(
        int(round((t1 - t0) * 1000)), int(round((t2 - t1) * 1000)), 0,
        tuple(float(p) for p in result.probabilities),
    )
    if args.json:
        _print_json({
            "decision": result.decision,
            "probabilities": {lbl: float(p) for lbl, p in zip(LABELS, result.probabilities)},
            "dsp_ms": block.dsp_ms,
            "classification_ms": block.classification_ms,
        })
    else:
        print(emit_prediction_block(block), end="")
    return 0


def cmd_simulate(args) -> int:
    rubble_map = _load_map(args.map)
    pipe = load_pipeline(args.weights) if args.weights else None
    simulator = sim.Simulator(rubble_map, pipe, seed=args.seed)
    for _ in range(args.ticks):
        result = simulator.step()
        frame = result.frame
        rating = survivability(frame)
        if args.json:
            record = {
                "tick": result.state.tick_index - 1,
                "pose": gw.pose_data(result.state),
                "telemetry": gw.telemetry_data(frame),
                "survivability": gw.survivability_data(rating),
            }
            if result.prediction is not None:
                record["prediction"] = gw.prediction_data(result.prediction, result.decision)
            print(json.dumps(record, sort_keys=True))
        else:
            s = result.state
            line = (
                f"t={frame.timestamp_ms / 1000:6.1f}s pose=({s.x_m:.2f},{s.y_m:.2f},{s.heading_rad:+.2f}) "
                f"gas={frame.gas_raw:4d} temp={frame.temp_c:5.2f}C rh={frame.humidity_pct:5.2f}% "
                f"air={rating.air} thermal={rating.thermal} overall={rating.overall}"
            )
            if result.decision is not None:
                line += f" heard={result.decision}"
            print(line)
    return 0


def cmd_serve(args) -> int:
    if args.serial:
        async def run_serial():
            loop = asyncio.get_running_loop()
            reader = asyncio.StreamReader()
            protocol = asyncio.StreamReaderProtocol(reader)
            fh = sys.stdin if args.serial == "-" else open(args.serial)
            await loop.connect_read_pipe(lambda: protocol, fh)
            source = gw.SerialSource(reader)
            g = gw.Gateway(source, log_path=args.log)
            await g.run(args.host, args.port)

        asyncio.run(run_serial())
        return 0
    rubble_map = _load_map(args.map)
    pipe = load_pipeline(args.weights) if args.weights else None
    simulator = sim.Simulator(rubble_map, pipe, seed=args.seed)
    source = gw.SimSource(simulator, n_ticks=args.ticks, tick_interval_s=args.tick_interval)
    g = gw.Gateway(source, log_path=args.log)
    print(f"serving on {args.host}:{args.port} (map {args.map}, seed {args.seed})", file=sys.stderr)
    try:
        asyncio.run(g.run(args.host, args.port))
    except KeyboardInterrupt:
        pass
    return 0


def cmd_calibrate(args) -> int:
    if args.csv:
        tables = [load_calibration_csv(p) for p in args.csv]
    else:
        tables = bundled_calibration_tables()
    report = calibration_report(tables)
    if args.json:
        _print_json({
            "sensors": [
                {
                    "sensor": s.sensor,
                    "computed_pcts": list(s.computed_pcts),
                    "average_pct": s.average_pct,
                    "accuracy_pct": s.accuracy_pct,
                    "flags": list(s.flags),
                }
                for s in report.sensors
            ],
            "collective_accuracy_pct": report.collective_accuracy_pct,
        })
    else:
        print(report.render_text(), end="")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rubble", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, fn, help_text):
        p = sub.add_parser(name, help=help_text)
        p.set_defaults(func=fn)
        p.add_argument("--seed", type=int, default=_seed_default(), help="RNG seed (env RUBBLE_SEED)")
        p.add_argument("--json", action="store_true", help="machine-readable output")
        return p

    p = add("gen-data", cmd_gen_data, "synthesize a labeled clip dataset")
    p.add_argument("--per-class", type=int, default=synth.DESK_CLIPS_PER_CLASS)
    p.add_argument("--out", required=True)
    p.add_argument("--train-fraction", type=float, default=synth.DEFAULT_TRAIN_FRACTION)

    p = add("train", cmd_train, "train the classifier on a dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--out", default="model.rsnn")
    p.add_argument("--epochs", type=int, default=100)
    p.add_argument("--quantized", action="store_true", help="store int8 weights")

    p = add("eval", cmd_eval, "confusion matrix and per-class F1 on a split")
    p.add_argument("--data", required=True)
    p.add_argument("--weights", required=True)
    p.add_argument("--split", default="test", choices=("train", "test"))

    p = add("tune", cmd_tune, "grid-search candidates against the device budget")
    p.add_argument("--data", required=True)
    p.add_argument("--epochs", type=int, default=20)
    p.add_argument("--frontends", default="mfe")
    p.add_argument("--filters", default="40")
    p.add_argument("--conv-widths", default="4,8")
    p.add_argument("--dense-widths", default="0")
    p.add_argument("--csv", help="write the leaderboard CSV here")

    p = add("infer", cmd_infer, "classify one 16 kHz wav clip")
    p.add_argument("wav")
    p.add_argument("--weights", required=True)

    p = add("simulate", cmd_simulate, "run the probe simulator headless")
    p.add_argument("map", help="map JSON path, or 'demo'")
    p.add_argument("--ticks", type=int, default=10)
    p.add_argument("--weights")

    p = add("serve", cmd_serve, "bridge a probe source to stream clients")
    p.add_argument("--map", default="demo")
    p.add_argument("--weights")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8765)
    p.add_argument("--log", help="session log JSONL path")
    p.add_argument("--ticks", type=int, default=None, help="stop after N ticks")
    p.add_argument("--tick-interval", type=float, default=None, help="seconds between ticks")
    p.add_argument("--serial", help="serial text capture to bridge instead of the simulator ('-' = stdin)")

    p = add("calibrate", cmd_calibrate, "sensor calibration accuracy report")
    p.add_argument("csv", nargs="*", help="calibration CSV files (default: bundled)")

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (OSError, ValueError, RuntimeError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
