#!/usr/bin/env python3
"""Run an offline simulated session with scripted drive commands, then replay
the log and verify the byte-identical reproduction property."""

import argparse
import asyncio

from rubble_probe.gateway import Gateway, SimSource, replay_session
from rubble_probe.pipeline import load_pipeline
from rubble_probe.sim import DriveCommand, Simulator, demo_map


async def record(pipeline, seed: int, n_ticks: int, log_path) -> list[str]:
    simulator = Simulator(demo_map(), pipeline, seed=seed)
    gateway = Gateway(SimSource(simulator, n_ticks=n_ticks, tick_interval_s=0.0), log_path=log_path)

    async def driver():
        await asyncio.sleep(0)
        gateway.ingest_drive(DriveCommand("forward", 1.0))
        await asyncio.sleep(0)
        gateway.ingest_drive(DriveCommand("left", 0.5))
        await asyncio.sleep(0)
        gateway.ingest_drive(DriveCommand("stop"))

    await asyncio.gather(gateway.run(port=None), driver())
    return gateway.session_lines


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--weights", default=None, help="pipeline weights; omit to skip audio")
    ap.add_argument("--seed", type=int, default=42)
    ap.add_argument("--ticks", type=int, default=20)
    ap.add_argument("--log", default="session.ndjson")
    args = ap.parse_args()

    pipeline = load_pipeline(args.weights) if args.weights else None
    original = asyncio.run(record(pipeline, args.seed, args.ticks, args.log))
    replayed = replay_session(original, demo_map(), pipeline, args.seed)

    print(f"session: {len(original)} lines -> {args.log}")
    if replayed == original:
        print("replay: byte-identical")
        return 0
    diverge = next(
        (i for i, (a, b) in enumerate(zip(replayed, original)) if a != b),
        min(len(replayed), len(original)),
    )
    print(f"replay: DIVERGES at line {diverge}")
    return 1


if __name__ == "__main__":
    raise SystemExit(main())
