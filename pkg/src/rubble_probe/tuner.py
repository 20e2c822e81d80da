"""Candidate search over (frontend, model) pairs against a device budget.

Costs come from a simple documented model: 2 cycles per multiply-accumulate,
a fixed 50 KiB code allowance in flash, and an FFT factor of 30 cycles per
butterfly stage point. These are order-of-magnitude estimators for ranking
candidates, not a cycle-accurate emulation of any particular core.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field

from . import nn
from .dsp import SAMPLE_RATE_HZ, FrontendConfig
from .labels import LABELS
from .pipeline import Pipeline, train_pipeline

BYTES_PER_VALUE = 4  # float32 activations and weights on device
CODE_ALLOWANCE_BYTES = 51200
CYCLES_PER_MAC = 2
FFT_CYCLES_FACTOR = 30


class NoFeasibleCandidate(RuntimeError):
    pass


@dataclass(frozen=True)
class DeviceBudget:
    sram_bytes: int = 262144
    flash_bytes: int = 1048576
    clock_hz: int = 64_000_000
    # one sensing cycle is 2 s; a pipeline slower than that can never keep up
    max_latency_ms: float = 2000.0

    def __post_init__(self):
        for name in ("sram_bytes", "flash_bytes", "clock_hz", "max_latency_ms"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


@dataclass(frozen=True)
class CandidateConfig:
    frontend: FrontendConfig
    model: nn.ModelSpec | None  # None = frontend only, nothing to classify with

    def __post_init__(self):
        if self.model is not None and self.frontend.output_shape(SAMPLE_RATE_HZ) != self.model.input_shape:
            raise ValueError(
                f"frontend produces {self.frontend.output_shape(SAMPLE_RATE_HZ)}, "
                f"model expects {self.model.input_shape}"
            )

    @property
    def candidate_id(self) -> str:
        return f"{self.frontend.key()}-{_model_tag(self.model)}"


def _model_tag(spec: nn.ModelSpec | None) -> str:
    if spec is None:
        return "none"
    parts = []
    for layer in spec.layers:
        if isinstance(layer, nn.Conv1D):
            parts.append(f"c{layer.filters}k{layer.kernel}")
        elif isinstance(layer, nn.MaxPool1D):
            parts.append(f"p{layer.size}")
        elif isinstance(layer, nn.Dense):
            parts.append(f"d{layer.units}")
    return "-".join(parts)


@dataclass(frozen=True)
class CostEstimate:
    ram_bytes: int
    rom_bytes: int
    dsp_ms: float
    classify_ms: float

    @property
    def latency_ms(self) -> float:
        return self.dsp_ms + self.classify_ms

    def within(self, budget: DeviceBudget) -> bool:
        return (
            self.ram_bytes <= budget.sram_bytes
            and self.rom_bytes <= budget.flash_bytes
            and self.latency_ms <= budget.max_latency_ms
        )


def estimate_cost(candidate: CandidateConfig, budget: DeviceBudget = DeviceBudget()) -> CostEstimate:
    """RAM high-water mark, flash footprint, and per-clip latency estimate."""
    n_frames, n_cols = candidate.frontend.output_shape(SAMPLE_RATE_HZ)
    feature_bytes = n_frames * n_cols * BYTES_PER_VALUE
    if candidate.model is not None:
        acts = candidate.model.activation_counts()
        params = candidate.model.param_count()
        macs = candidate.model.mac_count()
    else:
        acts, params, macs = [n_frames * n_cols], 0, 0
    # inference needs, at the peak, one layer's input and output buffers live
    if len(acts) > 1:
        arena = max(a + b for a, b in zip(acts, acts[1:]))
    else:
        arena = acts[0]
    ram = feature_bytes + arena * BYTES_PER_VALUE
    rom = CODE_ALLOWANCE_BYTES + params * BYTES_PER_VALUE
    fft_size = candidate.frontend.frame.fft_size
    dsp_cycles = FFT_CYCLES_FACTOR * n_frames * fft_size * math.log2(fft_size)
    nn_cycles = CYCLES_PER_MAC * macs
    to_ms = 1000.0 / budget.clock_hz
    return CostEstimate(ram, rom, dsp_cycles * to_ms, nn_cycles * to_ms)


@dataclass(frozen=True)
class SearchSpace:
    """Axes of the candidate grid; the product is enumerated exhaustively."""

    frontend_kinds: tuple = ("mfe",)
    mel_filters: tuple = (40,)
    conv_widths: tuple = (8,)  # first conv block width; the second doubles it
    dense_widths: tuple = (0,)  # 0 = no hidden dense layer
    n_classes: int = len(LABELS)


def build_candidate(kind: str, mel_filters: int, conv_width: int, dense_width: int, n_classes: int = len(LABELS)) -> CandidateConfig:
    frontend = FrontendConfig(kind=kind, num_filters=mel_filters, drop_coeff0=(kind == "mfcc"))
    layers = [
        nn.Conv1D(conv_width, 3),
        nn.MaxPool1D(2),
        nn.Conv1D(2 * conv_width, 3),
        nn.MaxPool1D(2),
        nn.Flatten(),
        nn.Dropout(0.25),
    ]
    if dense_width > 0:
        layers.append(nn.Dense(dense_width, "relu"))
    layers += [nn.Dense(n_classes), nn.Softmax()]
    spec = nn.ModelSpec(frontend.output_shape(SAMPLE_RATE_HZ), layers)
    return CandidateConfig(frontend, spec)


@dataclass(frozen=True)
class EnumerationResult:
    candidates: tuple
    dropped: tuple  # (combo description, reason) pairs


def enumerate_candidates(space: SearchSpace) -> EnumerationResult:
    """Cartesian product of the space axes, invalid combinations reported."""
    candidates, dropped = [], []
    for kind in space.frontend_kinds:
        for filters in space.mel_filters:
            for width in space.conv_widths:
                for dense in space.dense_widths:
                    desc = f"{kind}/{filters}mel/conv{width}/dense{dense}"
                    try:
                        candidates.append(build_candidate(kind, filters, width, dense, space.n_classes))
                    except (ValueError, nn.InvalidSpec) as err:
                        dropped.append((desc, str(err)))
    return EnumerationResult(tuple(candidates), tuple(dropped))


@dataclass(frozen=True)
class LeaderboardRow:
    candidate: CandidateConfig
    accuracy: float  # held-out validation accuracy from the tuning schedule
    cost: CostEstimate
    feasible: bool

    @property
    def candidate_id(self) -> str:
        return self.candidate.candidate_id


def _rank_key(row: LeaderboardRow):
    return (-row.accuracy, row.cost.latency_ms, row.cost.ram_bytes, row.candidate_id)


def evaluate_candidate(
    candidate: CandidateConfig,
    clips,
    labels,
    budget: DeviceBudget = DeviceBudget(),
    epochs: int = 20,
    seed: int = 42,
) -> tuple[LeaderboardRow, Pipeline]:
    """Short seeded training run plus a cost estimate for one candidate."""
    if candidate.model is None:
        raise ValueError("candidate has no model to train")
    cost = estimate_cost(candidate, budget)
    cfg = nn.TrainConfig(epochs=epochs, rng_seed=seed)
    pipe, history = train_pipeline(clips, labels, candidate.frontend, candidate.model, cfg)
    accuracy = float(history["val_accuracy"][-1])
    return LeaderboardRow(candidate, accuracy, cost, cost.within(budget)), pipe


@dataclass(frozen=True)
class TuneResult:
    best: LeaderboardRow
    best_pipeline: Pipeline = field(repr=False, compare=False, default=None)
    leaderboard: tuple = ()


def tune(
    candidates,
    clips,
    labels,
    budget: DeviceBudget = DeviceBudget(),
    epochs: int = 20,
    seed: int = 42,
) -> TuneResult:
    """Train every candidate, rank feasible ones, return the winner.

    Ranking: highest validation accuracy, ties broken by lower latency, then
    lower RAM, then candidate id (total order, deterministic under one seed).
    """
    candidates = list(candidates)
    if not candidates:
        raise ValueError("need at least one candidate")
    rows, pipes = [], {}
    for cand in candidates:
        row, pipe = evaluate_candidate(cand, clips, labels, budget, epochs, seed)
        rows.append(row)
        pipes[row.candidate_id] = pipe
    leaderboard = tuple(sorted(rows, key=lambda r: (not r.feasible,) + _rank_key(r)))
    feasible = [r for r in leaderboard if r.feasible]
    if not feasible:
        raise NoFeasibleCandidate(f"all {len(rows)} candidates exceed the device budget")
    best = feasible[0]
    return TuneResult(best, pipes[best.candidate_id], leaderboard)


def leaderboard_csv(rows) -> str:
    out = io.StringIO()
    out.write("candidate_id,val_accuracy,ram_bytes,rom_bytes,latency_ms,feasible\n")
    for r in rows:
        out.write(
            f"{r.candidate_id},{r.accuracy:.4f},{r.cost.ram_bytes},{r.cost.rom_bytes},"
            f"{r.cost.latency_ms:.3f},{'true' if r.feasible else 'false'}\n"
        )
    return out.getvalue()
