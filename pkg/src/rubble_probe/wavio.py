"""Minimal RIFF/WAVE reader and writer for 16-bit mono PCM.

Strict by design: the classifier consumes exactly one format (PCM format 1,
16-bit, mono), so anything else is rejected instead of resampled.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .dsp import AudioClip


class WavFormatError(ValueError):
    """File is not the 16-bit mono PCM layout this project uses."""


def write_wav(clip: AudioClip, path) -> None:
    """Write a clip as canonical 44-byte-header RIFF/WAVE, little-endian."""
    data = clip.samples.astype("<i2").tobytes()
    rate = clip.sample_rate_hz
    byte_rate = rate * 2  # mono, 2 bytes per sample
    header = b"RIFF" + struct.pack("<I", 36 + len(data)) + b"WAVE"
    header += b"fmt " + struct.pack("<IHHIIHH", 16, 1, 1, rate, byte_rate, 2, 16)
    header += b"data" + struct.pack("<I", len(data))
    Path(path).write_bytes(header + data)


def read_wav(path, strict_rate: int | None = None) -> AudioClip:
    """Read a 16-bit mono PCM WAV file.

    strict_rate, when given, rejects files at any other sample rate.
    """
    raw = Path(path).read_bytes()
    if len(raw) < 12 or raw[:4] != b"RIFF" or raw[8:12] != b"WAVE":
        raise WavFormatError(f"{path}: not a RIFF/WAVE file")

    fmt = None
    data = None
    pos = 12
    while pos + 8 <= len(raw):
        chunk_id = raw[pos : pos + 4]
        (chunk_size,) = struct.unpack_from("<I", raw, pos + 4)
        body = raw[pos + 8 : pos + 8 + chunk_size]
        if len(body) < chunk_size:
            raise WavFormatError(f"{path}: truncated {chunk_id!r} chunk")
        if chunk_id == b"fmt ":
            fmt = body
        elif chunk_id == b"data":
            data = body
        pos += 8 + chunk_size + (chunk_size & 1)  # chunks are word-aligned

    if fmt is None or len(fmt) < 16:
        raise WavFormatError(f"{path}: missing fmt chunk")
    if data is None:
        raise WavFormatError(f"{path}: missing data chunk")

    audio_format, channels, rate, _, _, bits = struct.unpack_from("<HHIIHH", fmt)
    if audio_format != 1:
        raise WavFormatError(f"{path}: not PCM (format tag {audio_format})")
    if channels != 1:
        raise WavFormatError(f"{path}: expected mono, got {channels} channels")
    if bits != 16:
        raise WavFormatError(f"{path}: expected 16-bit samples, got {bits}")
    if strict_rate is not None and rate != strict_rate:
        raise WavFormatError(f"{path}: expected {strict_rate} Hz, got {rate}")

    samples = np.frombuffer(data[: len(data) - (len(data) % 2)], dtype="<i2")
    return AudioClip(samples.astype(np.int16), sample_rate_hz=rate)
