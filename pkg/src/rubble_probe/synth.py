"""Parametric generator for the five sound classes, plus dataset assembly.

Field recordings are not available, so each class is synthesized from a
recipe whose spectral footprint mirrors the deployment problem: breathing
and muffled speech share a 2-3 kHz emphasis band and are deliberately the
hardest pair to separate, while noise and voiced calls are easy.

Generation is deterministic per (label, seed) and embarrassingly parallel;
manifest assembly is single-writer.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dsp import AudioClip, SAMPLE_RATE_HZ
from .labels import LABELS, LABEL_INDEX
from .wavio import read_wav, write_wav

CLIP_SAMPLES = SAMPLE_RATE_HZ  # 1 s clips
PEAK_CEILING = 0.9  # of int16 full scale

# Desk-scale default: 120 clips/class trains in minutes on a laptop.
DESK_CLIPS_PER_CLASS = 120
DEFAULT_TRAIN_FRACTION = 0.84

# Full-scale plan mirrors the deployment corpus totals.
FULL_SCALE_TRAIN_TOTAL = 8040
FULL_SCALE_TEST_TOTAL = 1608


class UnknownLabel(ValueError):
    pass


def _rng_for(label: str, seed: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed & 0xFFFFFFFF, LABEL_INDEX[label]]))


def _white(rng, n=CLIP_SAMPLES):
    return rng.standard_normal(n)


def _pink(rng, n=CLIP_SAMPLES):
    """1/f-shaped noise via spectral tilt of white noise."""
    spectrum = np.fft.rfft(rng.standard_normal(n))
    f = np.arange(spectrum.size, dtype=np.float64)
    f[0] = 1.0
    return np.fft.irfft(spectrum / np.sqrt(f), n=n)


def _band_noise(rng, lo_hz, hi_hz, n=CLIP_SAMPLES, rate=SAMPLE_RATE_HZ, soft_hz=100.0):
    """White noise band-limited to [lo, hi] with raised-cosine skirts."""
    spectrum = np.fft.rfft(rng.standard_normal(n))
    f = np.fft.rfftfreq(n, d=1.0 / rate)
    gain = np.zeros_like(f)
    inside = (f >= lo_hz) & (f <= hi_hz)
    gain[inside] = 1.0
    for edge, sign in ((lo_hz, -1.0), (hi_hz, 1.0)):
        skirt = (f > edge - soft_hz) & (f < edge + soft_hz) if soft_hz > 0 else np.zeros_like(f, bool)
        gain[skirt] = np.maximum(gain[skirt], 0.5 * (1.0 + np.cos(np.pi * sign * (f[skirt] - edge) / soft_hz)) / 2 + 0.25 * 0)
    # simple cosine rolloff around each edge
    lo_roll = (f >= lo_hz - soft_hz) & (f < lo_hz)
    hi_roll = (f > hi_hz) & (f <= hi_hz + soft_hz)
    gain[lo_roll] = 0.5 * (1 + np.cos(np.pi * (lo_hz - f[lo_roll]) / soft_hz))
    gain[hi_roll] = 0.5 * (1 + np.cos(np.pi * (f[hi_roll] - hi_hz) / soft_hz))
    return np.fft.irfft(spectrum * gain, n=n)


def _bump(t, center, width):
    """Raised-cosine envelope bump of given half-width (seconds)."""
    x = np.clip((t - center) / width, -1.0, 1.0)
    return 0.5 * (1.0 + np.cos(np.pi * x))


def _harmonics(rng, t, f0_hz, max_hz, rolloff, jitter=0.003):
    """Harmonic train with slow pitch drift; amplitude ~ 1/k**rolloff."""
    drift = 1.0 + 0.02 * np.sin(2 * np.pi * rng.uniform(1.0, 3.0) * t + rng.uniform(0, 2 * np.pi))
    inst_f0 = f0_hz * drift * (1.0 + jitter * rng.standard_normal(t.size).cumsum() / np.sqrt(np.arange(1, t.size + 1)))
    phase0 = np.cumsum(inst_f0) * (2 * np.pi / SAMPLE_RATE_HZ)
    out = np.zeros_like(t)
    k = 1
    while k * f0_hz < max_hz:
        out += (k ** -rolloff) * np.sin(k * phase0 + rng.uniform(0, 2 * np.pi))
        k += 1
    return out


def _emphasize_band(x, center_hz, width_hz, gain):
    """Multiply the [center-width/2, center+width/2] band by `gain` in the FFT domain."""
    spectrum = np.fft.rfft(x)
    f = np.fft.rfftfreq(x.size, d=1.0 / SAMPLE_RATE_HZ)
    sel = np.abs(f - center_hz) <= width_hz / 2
    spectrum[sel] *= gain
    return np.fft.irfft(spectrum, n=x.size)


def _lowpass(x, cutoff_hz, soft_hz=300.0):
    spectrum = np.fft.rfft(x)
    f = np.fft.rfftfreq(x.size, d=1.0 / SAMPLE_RATE_HZ)
    gain = np.ones_like(f)
    roll = (f > cutoff_hz) & (f <= cutoff_hz + soft_hz)
    gain[roll] = 0.5 * (1 + np.cos(np.pi * (f[roll] - cutoff_hz) / soft_hz))
    gain[f > cutoff_hz + soft_hz] = 0.0
    return np.fft.irfft(spectrum * gain, n=x.size)


def _finish(rng, x, floor_db=-45.0):
    """Add a faint noise floor, normalize to a random peak under the ceiling."""
    x = x + (10 ** (floor_db / 20)) * np.max(np.abs(x) + 1e-30) * _white(rng, x.size)
    peak = np.max(np.abs(x))
    if peak < 1e-12:
        return np.zeros(x.size, dtype=np.int16)
    target = rng.uniform(0.35, 1.0) * PEAK_CEILING
    samples = np.rint(x / peak * target * 32767.0)
    return np.clip(samples, -32767, 32767).astype(np.int16)


def _breathy_core(rng, t, voicing, n_bumps, width_lo, width_hi):
    """Shared generator behind breathes and muffled_words.

    Both classes are band-limited noise plus an optional voiced comb inside
    the same 2-3 kHz resonance, gated by an envelope. `voicing` sets the
    comb-to-noise mix and the bump parameters set the envelope tempo; the
    two class recipes draw these from overlapping ranges on purpose, so the
    hard tails are genuinely ambiguous.
    """
    center = rng.uniform(2150.0, 2700.0)
    half_width = rng.uniform(200.0, 330.0)
    body = _band_noise(rng, 300.0, 3000.0)
    in_band_noise = _band_noise(rng, center - half_width, center + half_width)
    comb = _harmonics(rng, t, rng.uniform(100.0, 180.0), 3200.0, rolloff=rng.uniform(0.4, 0.8))
    comb = _emphasize_band(comb, center, 2 * half_width, rng.uniform(5.0, 8.0))
    comb = _lowpass(comb, 3000.0)

    def unit(x):
        return x / np.sqrt(np.mean(np.square(x)) + 1e-30)

    in_band = (1.0 - voicing) * unit(in_band_noise) + voicing * unit(comb)
    x = rng.uniform(0.35, 0.7) * unit(body) + rng.uniform(1.1, 1.9) * in_band
    env = np.zeros_like(t)
    centers = np.sort(rng.uniform(0.08, 0.92, size=n_bumps))
    for c in centers:
        env += rng.uniform(0.55, 1.0) * _bump(t, c, rng.uniform(width_lo, width_hi))
    return x * (env + 0.02)


def _gen_breathes(rng, t):
    # Mostly unvoiced, slow envelope; the voicing tail reaches into the
    # muffled_words range so the pair stays the hardest to separate.
    voicing = rng.uniform(0.0, 0.52)
    n_bumps = 2 if rng.random() < 0.75 else 3
    return _breathy_core(rng, t, voicing, n_bumps, 0.09, 0.28)


def _gen_cough(rng, t):
    # <=100 ms broadband transient: sharp attack, exponential decay.
    def one(t0):
        attack = rng.uniform(0.003, 0.008)
        decay = rng.uniform(0.030, 0.070)
        env = np.where(t < t0, 0.0, np.minimum((t - t0) / attack, 1.0) * np.exp(-(t - t0) / decay))
        env[t > t0 + 0.1] = 0.0  # hard cap at 100 ms
        burst = _band_noise(rng, 300.0, rng.uniform(4000.0, 6500.0))
        tilt = _emphasize_band(burst, rng.uniform(800, 1600), 900.0, rng.uniform(1.5, 3.0))
        return tilt * env

    t0 = rng.uniform(0.1, 0.6)
    x = one(t0)
    if rng.random() < 0.4:  # occasional double cough
        x = x + rng.uniform(0.5, 0.9) * one(min(0.85, t0 + rng.uniform(0.18, 0.30)))
    return x


def _gen_hello_help(rng, t):
    # Two voiced calls with vowel-like formants; spectral weight sits well
    # below 2 kHz, which keeps this class easy to tell from the others.
    f0 = rng.uniform(180.0, 260.0)
    voiced = _harmonics(rng, t, f0, 4000.0, rolloff=rng.uniform(0.8, 1.2))
    voiced = _emphasize_band(voiced, rng.uniform(600, 850), 500.0, rng.uniform(2.5, 4.0))
    voiced = _emphasize_band(voiced, rng.uniform(1200, 1600), 600.0, rng.uniform(1.5, 2.5))
    env = np.zeros_like(t)
    first = rng.uniform(0.12, 0.30)
    second = rng.uniform(0.60, 0.82)
    env += _bump(t, first, rng.uniform(0.09, 0.14))
    env += rng.uniform(0.7, 1.0) * _bump(t, second, rng.uniform(0.08, 0.13))
    return voiced * (env + 0.01)


def _gen_muffled(rng, t):
    # Mostly voiced with a syllabic envelope; the low-voicing tail reaches
    # into the breathes range.
    voicing = rng.uniform(0.36, 1.0)
    n_bumps = int(rng.integers(2, 5))
    return _breathy_core(rng, t, voicing, n_bumps, 0.05, 0.16)


def _gen_noise(rng, t):
    w = rng.uniform(0.6, 0.95)
    return w * _white(rng) + (1.0 - w) * _pink(rng) * 3.0


_RECIPES = {
    "breathes": _gen_breathes,
    "cough": _gen_cough,
    "hello_help": _gen_hello_help,
    "muffled_words": _gen_muffled,
    "noise": _gen_noise,
}


def generate_clip(label: str, seed: int) -> AudioClip:
    """Synthesize one deterministic 1 s, 16 kHz clip of the given class."""
    if label not in _RECIPES:
        raise UnknownLabel(f"unknown label {label!r}; expected one of {LABELS}")
    rng = _rng_for(label, seed)
    t = np.arange(CLIP_SAMPLES) / SAMPLE_RATE_HZ
    return AudioClip(_finish(rng, _RECIPES[label](rng, t)), SAMPLE_RATE_HZ, label)


@dataclass
class ManifestEntry:
    label: str
    path: str  # relative to the manifest's directory
    split: str  # "train" | "test"
    seed: int


@dataclass
class DatasetManifest:
    seed: int
    train_fraction: float
    entries: list[ManifestEntry] = field(default_factory=list)

    def paths(self, split: str | None = None) -> list[ManifestEntry]:
        return [e for e in self.entries if split is None or e.split == split]

    def counts(self) -> dict:
        out: dict[str, dict[str, int]] = {lbl: {"train": 0, "test": 0} for lbl in LABELS}
        for e in self.entries:
            out[e.label][e.split] += 1
        return out

    def to_json(self) -> str:
        return json.dumps(
            {
                "seed": self.seed,
                "train_fraction": self.train_fraction,
                "entries": [e.__dict__ for e in self.entries],
            },
            indent=2,
        )

    @classmethod
    def from_json(cls, text: str) -> "DatasetManifest":
        obj = json.loads(text)
        return cls(
            seed=obj["seed"],
            train_fraction=obj["train_fraction"],
            entries=[ManifestEntry(**e) for e in obj["entries"]],
        )


def _largest_remainder(quotas: list[float], total: int) -> list[int]:
    """Integer allocation summing to `total`, ties broken by position."""
    base = [int(np.floor(q)) for q in quotas]
    short = total - sum(base)
    order = sorted(range(len(quotas)), key=lambda i: (-(quotas[i] - base[i]), i))
    for i in order[:short]:
        base[i] += 1
    return base


def plan_split(per_class_n: dict[str, int], train_fraction: float = DEFAULT_TRAIN_FRACTION) -> dict[str, tuple[int, int]]:
    """Train/test counts per class; the train total is round(fraction * total)."""
    labels = [lbl for lbl in LABELS if per_class_n.get(lbl, 0) > 0]
    total = sum(per_class_n[lbl] for lbl in labels)
    if total == 0:
        return {}
    train_total = int(np.floor(train_fraction * total + 0.5))
    alloc = _largest_remainder([per_class_n[lbl] * train_fraction for lbl in labels], train_total)
    return {lbl: (a, per_class_n[lbl] - a) for lbl, a in zip(labels, alloc)}


def plan_totals(train_total: int, test_total: int) -> dict[str, tuple[int, int]]:
    """Spread explicit train/test totals as evenly as possible over the classes."""
    train = _largest_remainder([train_total / len(LABELS)] * len(LABELS), train_total)
    test = _largest_remainder([test_total / len(LABELS)] * len(LABELS), test_total)
    return {lbl: (tr, te) for lbl, tr, te in zip(LABELS, train, test)}


def full_scale_plan() -> dict[str, tuple[int, int]]:
    return plan_totals(FULL_SCALE_TRAIN_TOTAL, FULL_SCALE_TEST_TOTAL)


def _clip_seed(dataset_seed: int, label: str, index: int) -> int:
    # Spread per-clip seeds so no two (label, index) pairs collide.
    return (dataset_seed * 1_000_003 + LABEL_INDEX[label] * 65_537 + index) & 0x7FFFFFFF


def generate_dataset(
    per_class_n: int,
    out_dir,
    seed: int = 42,
    train_fraction: float = DEFAULT_TRAIN_FRACTION,
    write_files: bool = True,
) -> DatasetManifest:
    """Synthesize per_class_n clips for every class, write WAVs and manifest.

    Split assignment shuffles each class with the dataset seed before cutting
    at the planned train count, so it is deterministic per seed.
    """
    out_dir = Path(out_dir) if out_dir is not None else None
    manifest = DatasetManifest(seed=seed, train_fraction=train_fraction)
    if per_class_n > 0:
        plan = plan_split({lbl: per_class_n for lbl in LABELS}, train_fraction)
        for lbl in LABELS:
            train_n, _ = plan[lbl]
            order = np.random.default_rng(np.random.SeedSequence([seed & 0xFFFFFFFF, 7, LABEL_INDEX[lbl]])).permutation(per_class_n)
            split_of = {int(idx): ("train" if pos < train_n else "test") for pos, idx in enumerate(order)}
            for i in range(per_class_n):
                rel = f"{lbl}/{lbl}_{i:05d}.wav"
                cseed = _clip_seed(seed, lbl, i)
                manifest.entries.append(ManifestEntry(lbl, rel, split_of[i], cseed))
                if write_files:
                    path = out_dir / rel
                    path.parent.mkdir(parents=True, exist_ok=True)
                    write_wav(generate_clip(lbl, cseed), path)
    if write_files:
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "manifest.json").write_text(manifest.to_json())
    return manifest


def load_manifest(path) -> DatasetManifest:
    return DatasetManifest.from_json(Path(path).read_text())


def load_split(manifest: DatasetManifest, root, split: str) -> tuple[list[AudioClip], list[str]]:
    """Read one split's WAV files back as clips."""
    root = Path(root)
    clips, labels = [], []
    for entry in manifest.paths(split):
        clip = read_wav(root / entry.path, strict_rate=SAMPLE_RATE_HZ)
        clips.append(AudioClip(clip.samples, clip.sample_rate_hz, entry.label))
        labels.append(entry.label)
    return clips, labels


def synth_split(manifest: DatasetManifest, split: str) -> tuple[list[AudioClip], list[str]]:
    """Regenerate one split directly from seeds, skipping the file round trip."""
    clips, labels = [], []
    for entry in manifest.paths(split):
        clips.append(generate_clip(entry.label, entry.seed))
        labels.append(entry.label)
    return clips, labels
