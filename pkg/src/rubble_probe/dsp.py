"""Deterministic audio feature extraction: framing, windowed power spectra,
mel filterbank energies (MFE) and MFCC.

Everything here is a pure function of its inputs; filterbanks are immutable
after construction, so all of it is safe to share across threads.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

SAMPLE_RATE_HZ = 16000
CLIP_SECONDS = 1.0

# Floor applied inside log10 so silence maps to -12 instead of -inf.
LOG_ENERGY_FLOOR = 1e-12

INT16_MIN = -32768
INT16_MAX = 32767


class ClipTooShort(ValueError):
    """Clip has fewer samples than one analysis frame."""


class FrameLengthMismatch(ValueError):
    """Frame passed to power_spectrum does not match the configured length."""


class InvalidBandEdges(ValueError):
    """Mel band edges are out of order or exceed Nyquist."""


class TooManyCoefficients(ValueError):
    """Requested more cepstral coefficients than mel filters."""


@dataclass(frozen=True)
class AudioClip:
    """One buffer of signed 16-bit mono PCM.

    Classification clips are exactly 1 s long; arbitrary lengths are accepted
    for framing experiments.
    """

    samples: np.ndarray
    sample_rate_hz: int = SAMPLE_RATE_HZ
    label: str | None = None

    def __post_init__(self):
        samples = np.asarray(self.samples)
        if samples.ndim != 1:
            raise ValueError(f"samples must be 1-D, got shape {samples.shape}")
        if samples.size and (samples.min() < INT16_MIN or samples.max() > INT16_MAX):
            raise ValueError("samples exceed the signed 16-bit PCM range")
        samples = samples.astype(np.int16)
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)

    def __len__(self) -> int:
        return int(self.samples.size)

    def is_classification_length(self) -> bool:
        return self.samples.size == round(self.sample_rate_hz * CLIP_SECONDS)

    def scaled(self, gain: float) -> "AudioClip":
        """Scale samples by `gain`, rounding back to int16 (clipped)."""
        scaled = np.clip(np.rint(self.samples.astype(np.float64) * gain), INT16_MIN, INT16_MAX)
        return AudioClip(scaled.astype(np.int16), self.sample_rate_hz, self.label)


@dataclass(frozen=True)
class FrameConfig:
    """Analysis framing: 32 ms frames every 16 ms at 16 kHz by default."""

    frame_len: int = 512
    stride: int = 256
    fft_size: int = 512

    def __post_init__(self):
        if not (0 < self.stride <= self.frame_len <= self.fft_size):
            raise ValueError(
                f"need 0 < stride <= frame_len <= fft_size, got "
                f"stride={self.stride} frame_len={self.frame_len} fft_size={self.fft_size}"
            )
        if self.fft_size & (self.fft_size - 1):
            raise ValueError(f"fft_size must be a power of two, got {self.fft_size}")

    @property
    def n_bins(self) -> int:
        return self.fft_size // 2 + 1

    def frame_count(self, n_samples: int) -> int:
        if n_samples < self.frame_len:
            raise ClipTooShort(f"{n_samples} samples < frame_len {self.frame_len}")
        return (n_samples - self.frame_len) // self.stride + 1


def hz_to_mel(f_hz):
    """Perceptual frequency warp: mel(f) = 2595 * log10(1 + f/700)."""
    return 2595.0 * np.log10(1.0 + np.asarray(f_hz, dtype=np.float64) / 700.0)


def mel_to_hz(mel):
    return 700.0 * (10.0 ** (np.asarray(mel, dtype=np.float64) / 2595.0) - 1.0)


@dataclass(frozen=True)
class MelFilterbank:
    """Triangular unit-peak filters with centers equally spaced on the mel scale.

    `weights` is a (num_filters, fft_size/2 + 1) matrix. Triangles are linear
    in Hz between mel-spaced edges, so adjacent filters are complementary:
    every FFT bin between the first and last center sums to 1 across filters.
    """

    sample_rate_hz: int
    fft_size: int
    num_filters: int
    f_low_hz: float
    f_high_hz: float
    edges_hz: np.ndarray
    weights: np.ndarray

    @property
    def centers_hz(self) -> np.ndarray:
        return self.edges_hz[1:-1]


def build_mel_filterbank(
    sample_rate_hz: int = SAMPLE_RATE_HZ,
    fft_size: int = 512,
    num_filters: int = 40,
    f_low_hz: float = 300.0,
    f_high_hz: float = 8000.0,
) -> MelFilterbank:
    """Construct the triangular mel filterbank."""
    if num_filters < 1:
        raise InvalidBandEdges(f"num_filters must be >= 1, got {num_filters}")
    if not (0.0 <= f_low_hz < f_high_hz <= sample_rate_hz / 2):
        raise InvalidBandEdges(
            f"need 0 <= f_low < f_high <= rate/2, got [{f_low_hz}, {f_high_hz}] at {sample_rate_hz} Hz"
        )
    edges_hz = mel_to_hz(np.linspace(hz_to_mel(f_low_hz), hz_to_mel(f_high_hz), num_filters + 2))
    # Pin the outermost edges exactly; mel round trip leaves ~1e-12 residue.
    edges_hz[0] = f_low_hz
    edges_hz[-1] = f_high_hz

    bin_hz = np.arange(fft_size // 2 + 1) * (sample_rate_hz / fft_size)
    lo, mid, hi = edges_hz[:-2, None], edges_hz[1:-1, None], edges_hz[2:, None]
    rising = (bin_hz[None, :] - lo) / (mid - lo)
    falling = (hi - bin_hz[None, :]) / (hi - mid)
    weights = np.maximum(0.0, np.minimum(rising, falling))
    weights.setflags(write=False)
    edges_hz.setflags(write=False)
    return MelFilterbank(
        sample_rate_hz=sample_rate_hz,
        fft_size=fft_size,
        num_filters=num_filters,
        f_low_hz=float(f_low_hz),
        f_high_hz=float(f_high_hz),
        edges_hz=edges_hz,
        weights=weights,
    )


@lru_cache(maxsize=32)
def default_filterbank(
    sample_rate_hz: int = SAMPLE_RATE_HZ,
    fft_size: int = 512,
    num_filters: int = 40,
    f_low_hz: float = 300.0,
    f_high_hz: float = 8000.0,
) -> MelFilterbank:
    """Cached filterbank constructor for the hot featurization path."""
    return build_mel_filterbank(sample_rate_hz, fft_size, num_filters, f_low_hz, f_high_hz)


def frame_signal(clip: AudioClip, cfg: FrameConfig = FrameConfig()) -> np.ndarray:
    """Slice a clip into overlapping frames; trailing samples that do not
    fill a frame are dropped.

    Returns a (frame_count, frame_len) float64 array.
    """
    n = clip.samples.size
    count = cfg.frame_count(n)  # raises ClipTooShort
    starts = np.arange(count) * cfg.stride
    idx = starts[:, None] + np.arange(cfg.frame_len)[None, :]
    return clip.samples.astype(np.float64)[idx]


def _windowed_power(frames: np.ndarray, cfg: FrameConfig) -> np.ndarray:
    window = np.hamming(cfg.frame_len)
    spectrum = np.fft.rfft(frames * window, n=cfg.fft_size, axis=-1)
    return np.abs(spectrum) ** 2


def power_spectrum(frame: np.ndarray, cfg: FrameConfig = FrameConfig()) -> np.ndarray:
    """Squared-magnitude rFFT of one Hamming-windowed, zero-padded frame.

    Output has fft_size/2 + 1 bins; bin k sits at k * rate / fft_size Hz.
    """
    frame = np.asarray(frame, dtype=np.float64)
    if frame.shape != (cfg.frame_len,):
        raise FrameLengthMismatch(f"expected frame of length {cfg.frame_len}, got shape {frame.shape}")
    return _windowed_power(frame[None, :], cfg)[0]


def mfe(clip: AudioClip, cfg: FrameConfig = FrameConfig(), bank: MelFilterbank | None = None) -> np.ndarray:
    """Log10 mel filterbank energies, (frame_count, num_filters) float64."""
    if bank is None:
        bank = default_filterbank(clip.sample_rate_hz, cfg.fft_size)
    if bank.fft_size != cfg.fft_size:
        raise ValueError(f"bank fft_size {bank.fft_size} != config fft_size {cfg.fft_size}")
    if bank.sample_rate_hz != clip.sample_rate_hz:
        raise ValueError(f"bank rate {bank.sample_rate_hz} != clip rate {clip.sample_rate_hz}")
    power = _windowed_power(frame_signal(clip, cfg), cfg)
    energies = power @ bank.weights.T
    return np.log10(np.maximum(energies, LOG_ENERGY_FLOOR))


def dct_matrix(num_coeffs: int, size: int) -> np.ndarray:
    """Orthonormal DCT-II matrix, truncated to num_coeffs rows.

    The square case satisfies M @ M.T == I.
    """
    if num_coeffs > size:
        raise TooManyCoefficients(f"num_coeffs {num_coeffs} > size {size}")
    n = np.arange(size)
    k = np.arange(num_coeffs)[:, None]
    mat = np.sqrt(2.0 / size) * np.cos(np.pi * (2 * n[None, :] + 1) * k / (2 * size))
    mat[0] *= np.sqrt(0.5)
    return mat


def mfcc(
    clip: AudioClip,
    cfg: FrameConfig = FrameConfig(),
    bank: MelFilterbank | None = None,
    num_coeffs: int = 13,
) -> np.ndarray:
    """Orthonormal DCT-II of each log-mel row, truncated to num_coeffs."""
    if bank is None:
        bank = default_filterbank(clip.sample_rate_hz, cfg.fft_size)
    if num_coeffs > bank.num_filters:
        raise TooManyCoefficients(f"num_coeffs {num_coeffs} > num_filters {bank.num_filters}")
    return mfe(clip, cfg, bank) @ dct_matrix(num_coeffs, bank.num_filters).T


@dataclass(frozen=True)
class FrontendConfig:
    """Which feature front end feeds the classifier.

    MFCC front ends may drop coefficient 0 (the per-frame energy term), which
    makes the downstream classification decision exactly gain-invariant.
    """

    kind: str = "mfe"  # "mfe" | "mfcc"
    frame: FrameConfig = FrameConfig()
    num_filters: int = 40
    num_coeffs: int = 13
    f_low_hz: float = 300.0
    f_high_hz: float = 8000.0
    drop_coeff0: bool = False

    def __post_init__(self):
        if self.kind not in ("mfe", "mfcc"):
            raise ValueError(f"unknown frontend kind {self.kind!r}")
        if self.kind == "mfcc" and self.num_coeffs > self.num_filters:
            raise TooManyCoefficients(f"num_coeffs {self.num_coeffs} > num_filters {self.num_filters}")
        if self.drop_coeff0 and self.kind != "mfcc":
            raise ValueError("drop_coeff0 only applies to MFCC front ends")

    @property
    def n_cols(self) -> int:
        if self.kind == "mfe":
            return self.num_filters
        return self.num_coeffs - (1 if self.drop_coeff0 else 0)

    def output_shape(self, n_samples: int = SAMPLE_RATE_HZ) -> tuple[int, int]:
        return self.frame.frame_count(n_samples), self.n_cols

    def key(self) -> str:
        tag = f"{self.kind}{self.num_filters}"
        if self.kind == "mfcc":
            tag += f"c{self.num_coeffs}" + ("x0" if self.drop_coeff0 else "")
        return tag


def featurize(clip: AudioClip, frontend: FrontendConfig = FrontendConfig(), dtype=np.float64) -> np.ndarray:
    """Run the configured front end over a clip.

    Training uses float64; pass dtype=np.float32 on the inference path.
    """
    bank = default_filterbank(
        clip.sample_rate_hz, frontend.frame.fft_size, frontend.num_filters,
        frontend.f_low_hz, frontend.f_high_hz,
    )
    if frontend.kind == "mfe":
        feats = mfe(clip, frontend.frame, bank)
    else:
        feats = mfcc(clip, frontend.frame, bank, frontend.num_coeffs)
        if frontend.drop_coeff0:
            feats = feats[:, 1:]
    return np.ascontiguousarray(feats, dtype=dtype)
