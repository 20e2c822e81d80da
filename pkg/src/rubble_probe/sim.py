"""Deterministic probe simulator: skid-steer kinematics on a rubble grid.

Every cell of the map carries an ambient sound class and ambient sensor
fields. On each 2 s tick the probe synthesizes a 1 s clip of its cell's
ambient class, classifies it, and reads the cell's sensors through Gaussian
noise. The whole run is a pure function of (map, initial state, command log,
seed), which is what makes session replay byte-identical.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import synth
from .dsp import AudioClip
from .labels import LABELS
from .pipeline import Pipeline
from .telemetry import PredictionBlock, SensorFrame
from .tuner import CandidateConfig, estimate_cost

SILENT = "silent"
CELL_CLASSES = LABELS + (SILENT,)

FORWARD_SPEED_MPS = 0.5
TURN_RATE_RADPS = 1.0
TICK_SECONDS = 2.0

NOISE_SIGMA = {"temp_c": 0.1, "humidity_pct": 0.2, "pressure_kpa": 0.001, "gas_raw": 5.0}

TRANSLATIONS = ("forward", "reverse", "stop")
ROTATIONS = ("left", "right")
DIRECTIONS = TRANSLATIONS + ROTATIONS


class MapFormatError(ValueError):
    pass


@dataclass(frozen=True)
class Cell:
    ambient: str = SILENT
    temp_c: float = 20.0
    humidity_pct: float = 50.0
    pressure_kpa: float = 101.3
    gas_raw: int = 150

    def __post_init__(self):
        if self.ambient not in CELL_CLASSES:
            raise MapFormatError(f"unknown ambient class {self.ambient!r}")
        if not 0 <= self.gas_raw <= 1024:
            raise MapFormatError(f"gas_raw {self.gas_raw} outside [0, 1024]")
        if not 0.0 <= self.humidity_pct <= 100.0:
            raise MapFormatError(f"humidity {self.humidity_pct} outside [0, 100]")


@dataclass(frozen=True)
class RubbleMap:
    width: int
    height: int
    cells: tuple  # row-major, cells[y][x]
    cell_size_m: float = 1.0

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise MapFormatError("map must be at least 1x1")
        if len(self.cells) != self.height or any(len(row) != self.width for row in self.cells):
            raise MapFormatError("cell grid does not match declared dimensions")
        object.__setattr__(self, "cells", tuple(tuple(row) for row in self.cells))

    @property
    def width_m(self) -> float:
        return self.width * self.cell_size_m

    @property
    def height_m(self) -> float:
        return self.height * self.cell_size_m

    def cell_at(self, x_m: float, y_m: float) -> Cell:
        cx = min(self.width - 1, max(0, int(x_m / self.cell_size_m)))
        cy = min(self.height - 1, max(0, int(y_m / self.cell_size_m)))
        return self.cells[cy][cx]

    def to_dict(self) -> dict:
        return {
            "width": self.width,
            "height": self.height,
            "cell_size_m": self.cell_size_m,
            "cells": [[dict(cell.__dict__) for cell in row] for row in self.cells],
        }


_CELL_FIELDS = {"ambient": str, "temp_c": float, "humidity_pct": float, "pressure_kpa": float, "gas_raw": int}


def _parse_cell(obj, where: str) -> Cell:
    if not isinstance(obj, dict):
        raise MapFormatError(f"{where}: cell must be an object")
    kwargs = {}
    for name, cast in _CELL_FIELDS.items():
        if name not in obj:
            raise MapFormatError(f"{where}: missing field {name!r}")
        try:
            kwargs[name] = cast(obj[name])
        except (TypeError, ValueError):
            raise MapFormatError(f"{where}: bad value for {name!r}: {obj[name]!r}") from None
    try:
        return Cell(**kwargs)
    except MapFormatError as err:
        raise MapFormatError(f"{where}: {err}") from None


def load_map(path) -> RubbleMap:
    """Parse and validate a JSON grid file."""
    try:
        obj = json.loads(Path(path).read_text())
    except json.JSONDecodeError as err:
        raise MapFormatError(f"not valid JSON: {err}") from None
    for key in ("width", "height", "cells"):
        if key not in obj:
            raise MapFormatError(f"missing top-level field {key!r}")
    rows = obj["cells"]
    cells = tuple(
        tuple(_parse_cell(c, f"cell ({x},{y})") for x, c in enumerate(row)) for y, row in enumerate(rows)
    )
    return RubbleMap(int(obj["width"]), int(obj["height"]), cells, float(obj.get("cell_size_m", 1.0)))


def save_map(rubble_map: RubbleMap, path) -> None:
    Path(path).write_text(json.dumps(rubble_map.to_dict(), indent=2, sort_keys=True) + "\n")


def demo_map() -> RubbleMap:
    """3x3 demo grid with one voice cell, one hazard cell, quiet elsewhere."""
    quiet = Cell()
    voice = Cell(ambient="hello_help", temp_c=32.67, humidity_pct=52.81, pressure_kpa=101.3, gas_raw=168)
    hazard = Cell(ambient="noise", temp_c=42.0, humidity_pct=8.0, pressure_kpa=101.1, gas_raw=820)
    breathing = Cell(ambient="breathes", temp_c=28.0, humidity_pct=65.0, pressure_kpa=101.2, gas_raw=350)
    rows = (
        (quiet, Cell(ambient="muffled_words", gas_raw=420), voice),
        (quiet, breathing, quiet),
        (Cell(ambient="cough", gas_raw=240), quiet, hazard),
    )
    return RubbleMap(3, 3, rows)


@dataclass(frozen=True)
class ProbeState:
    x_m: float = 0.5
    y_m: float = 0.5
    heading_rad: float = 0.0
    speed_mps: float = 0.0
    tick_index: int = 0


@dataclass(frozen=True)
class DriveCommand:
    direction: str
    magnitude: float = 1.0

    def __post_init__(self):
        if self.direction not in DIRECTIONS:
            raise ValueError(f"unknown direction {self.direction!r}")
        if not 0.0 <= self.magnitude <= 1.0:
            raise ValueError(f"magnitude {self.magnitude} outside [0, 1]")


def apply_drive(state: ProbeState, cmd: DriveCommand, dt_s: float, rubble_map: RubbleMap) -> ProbeState:
    """Integrate one command over dt_s; position clamps at the map walls."""
    if dt_s <= 0:
        raise ValueError(f"dt_s must be positive, got {dt_s}")
    if cmd.direction == "stop":
        return replace(state, speed_mps=0.0)
    if cmd.direction in ROTATIONS:
        sign = 1.0 if cmd.direction == "left" else -1.0
        return replace(state, heading_rad=state.heading_rad + sign * cmd.magnitude * TURN_RATE_RADPS * dt_s,
                       speed_mps=0.0)
    sign = 1.0 if cmd.direction == "forward" else -1.0
    speed = sign * cmd.magnitude * FORWARD_SPEED_MPS
    x = state.x_m + math.cos(state.heading_rad) * speed * dt_s
    y = state.y_m + math.sin(state.heading_rad) * speed * dt_s
    x = min(rubble_map.width_m, max(0.0, x))
    y = min(rubble_map.height_m, max(0.0, y))
    return replace(state, x_m=x, y_m=y, speed_mps=speed)


@dataclass(frozen=True)
class TickResult:
    state: ProbeState
    frame: SensorFrame
    clip: AudioClip | None = field(repr=False, default=None)
    prediction: PredictionBlock | None = None
    decision: str | None = None


def _noisy_frame(cell: Cell, rng, timestamp_ms: int) -> SensorFrame:
    gas = int(round(cell.gas_raw + rng.normal(0.0, NOISE_SIGMA["gas_raw"])))
    temp = cell.temp_c + rng.normal(0.0, NOISE_SIGMA["temp_c"])
    hum = cell.humidity_pct + rng.normal(0.0, NOISE_SIGMA["humidity_pct"])
    pres = cell.pressure_kpa + rng.normal(0.0, NOISE_SIGMA["pressure_kpa"])
    return SensorFrame(
        min(1024, max(0, gas)),
        float(temp),
        float(min(100.0, max(0.0, hum))),
        float(pres),
        timestamp_ms,
    )


def tick(
    state: ProbeState,
    rubble_map: RubbleMap,
    pipeline: Pipeline | None,
    seed: int,
) -> TickResult:
    """One 2 s sensing cycle at the probe's current cell.

    Deterministic: all randomness comes from (seed, state.tick_index), and
    the prediction timing fields are cost-model estimates rather than
    measured wall time so a replay reproduces the stream byte for byte.
    """
    cell = rubble_map.cell_at(state.x_m, state.y_m)
    rng = np.random.default_rng(np.random.SeedSequence([seed & 0xFFFFFFFF, 0x71C, state.tick_index]))
    timestamp_ms = state.tick_index * int(TICK_SECONDS * 1000)
    frame = _noisy_frame(cell, rng, timestamp_ms)
    clip = prediction = decision = None
    if cell.ambient != SILENT and pipeline is not None:
        clip_seed = int(rng.integers(0, 2**31 - 1))
        clip = synth.generate_clip(cell.ambient, clip_seed)
        result = pipeline.predict_clip(clip)
        cost = estimate_cost(CandidateConfig(pipeline.frontend, pipeline.spec))
        prediction = PredictionBlock(
            int(round(cost.dsp_ms)),
            int(round(cost.classify_ms)),
            0,  # no anomaly scorer in the pipeline
            tuple(float(p) for p in result.probabilities),
        )
        decision = result.decision
    return TickResult(replace(state, tick_index=state.tick_index + 1), frame, clip, prediction, decision)


class Simulator:
    """Tick loop with a command queue drained once per tick.

    Within one drain the newest command per axis wins: the translation axis
    keeps the latest of forward/reverse/stop, the rotation axis the latest
    of left/right. Rotation integrates before translation, so a held
    turn-plus-forward pair arcs rather than strafing.
    """

    def __init__(
        self,
        rubble_map: RubbleMap,
        pipeline: Pipeline | None = None,
        seed: int = 0,
        start: ProbeState | None = None,
        tick_seconds: float = TICK_SECONDS,
    ):
        self.map = rubble_map
        self.pipeline = pipeline
        self.seed = seed
        self.state = start if start is not None else ProbeState(rubble_map.width_m / 2, rubble_map.height_m / 2)
        self.tick_seconds = tick_seconds
        self._queue: list[DriveCommand] = []

    def queue_command(self, cmd: DriveCommand) -> None:
        self._queue.append(cmd)

    def _drain(self) -> tuple[DriveCommand | None, DriveCommand | None]:
        translation = rotation = None
        for cmd in self._queue:
            if cmd.direction in TRANSLATIONS:
                translation = cmd
                if cmd.direction == "stop":
                    rotation = None
            else:
                rotation = cmd
        self._queue.clear()
        return translation, rotation

    def step(self) -> TickResult:
        translation, rotation = self._drain()
        state = self.state
        if rotation is not None:
            state = apply_drive(state, rotation, self.tick_seconds, self.map)
        if translation is not None:
            state = apply_drive(state, translation, self.tick_seconds, self.map)
        result = tick(state, self.map, self.pipeline, self.seed)
        self.state = result.state
        return result


def replay(
    rubble_map: RubbleMap,
    pipeline: Pipeline | None,
    seed: int,
    drive_log,
    n_ticks: int,
    start: ProbeState | None = None,
) -> list[TickResult]:
    """Re-run a session from its command log: (tick_index, DriveCommand) pairs."""
    sim = Simulator(rubble_map, pipeline, seed, start)
    by_tick: dict[int, list[DriveCommand]] = {}
    for tick_index, cmd in drive_log:
        by_tick.setdefault(int(tick_index), []).append(cmd)
    results = []
    for i in range(n_ticks):
        for cmd in by_tick.get(i, []):
            sim.queue_command(cmd)
        results.append(sim.step())
    return results
