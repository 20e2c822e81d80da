"""End-to-end audio classifier: frontend, feature normalization, model.

The network trains poorly on raw log-energies (all-positive, large mean),
so the pipeline standardizes each feature matrix to zero mean and unit
variance before it reaches the model, at training and inference alike.
The normalization is stateless per clip; nothing dataset-dependent is
stored beside the weights.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import nn
from .dsp import AudioClip, FrontendConfig, featurize
from .labels import LABELS, LABEL_INDEX


def normalize_features(matrix: np.ndarray) -> np.ndarray:
    """Per-matrix standardization with a variance floor for silent clips."""
    matrix = np.asarray(matrix, dtype=np.float64)
    return (matrix - matrix.mean()) / max(float(matrix.std()), 1e-6)


@dataclass(frozen=True)
class Pipeline:
    """A deployable classifier bundle."""

    frontend: FrontendConfig
    spec: nn.ModelSpec
    weights: nn.Weights
    threshold: float = nn.CONFIDENCE_THRESHOLD

    def features_for(self, clip: AudioClip) -> np.ndarray:
        return normalize_features(featurize(clip, self.frontend))

    def predict_clip(self, clip: AudioClip) -> nn.Prediction:
        return nn.predict(self.spec, self.weights, self.features_for(clip), self.threshold)

    def predict_batch(self, clips: list[AudioClip]) -> np.ndarray:
        feats = np.stack([self.features_for(c) for c in clips])
        return nn.forward_batch(self.spec, self.weights, feats)


def default_pipeline_config() -> tuple[FrontendConfig, nn.ModelSpec]:
    frontend = FrontendConfig()
    n_frames, n_cols = frontend.output_shape(16000)
    return frontend, nn.default_model_spec((n_frames, n_cols), len(LABELS))


def prepare_dataset(clips: list[AudioClip], labels: list[str], frontend: FrontendConfig) -> tuple[np.ndarray, np.ndarray]:
    """Featurize and normalize a clip list into (features, label indices)."""
    feats = np.stack([normalize_features(featurize(c, frontend)) for c in clips])
    y = np.array([LABEL_INDEX[lbl] for lbl in labels], dtype=np.int64)
    return feats, y


def train_pipeline(
    clips: list[AudioClip],
    labels: list[str],
    frontend: FrontendConfig | None = None,
    spec: nn.ModelSpec | None = None,
    cfg: nn.TrainConfig | None = None,
) -> tuple[Pipeline, dict]:
    """Train the default (or given) architecture; returns (pipeline, history)."""
    if frontend is None or spec is None:
        default_fe, default_spec = default_pipeline_config()
        frontend = frontend or default_fe
        spec = spec or default_spec
    feats, y = prepare_dataset(clips, labels, frontend)
    result = nn.fit(spec, feats, y, cfg or nn.TrainConfig())
    return Pipeline(frontend, result.spec, result.weights), result.history


def _frontend_to_dict(fe: FrontendConfig) -> dict:
    return {
        "kind": fe.kind,
        "frame_len": fe.frame.frame_len,
        "stride": fe.frame.stride,
        "fft_size": fe.frame.fft_size,
        "num_filters": fe.num_filters,
        "num_coeffs": fe.num_coeffs,
        "f_low_hz": fe.f_low_hz,
        "f_high_hz": fe.f_high_hz,
        "drop_coeff0": fe.drop_coeff0,
    }


def _frontend_from_dict(obj: dict) -> FrontendConfig:
    from .dsp import FrameConfig

    return FrontendConfig(
        kind=obj["kind"],
        frame=FrameConfig(obj["frame_len"], obj["stride"], obj["fft_size"]),
        num_filters=obj["num_filters"],
        num_coeffs=obj["num_coeffs"],
        f_low_hz=obj["f_low_hz"],
        f_high_hz=obj["f_high_hz"],
        drop_coeff0=obj["drop_coeff0"],
    )


def save_pipeline(pipe: Pipeline, path, quantized: bool = False) -> None:
    extra = {
        "frontend": _frontend_to_dict(pipe.frontend),
        "normalize": "per_matrix",
        "labels": list(LABELS),
        "threshold": pipe.threshold,
    }
    nn.save_weights(pipe.spec, pipe.weights, path, quantized=quantized, extra=extra)


def load_pipeline(path) -> Pipeline:
    spec, weights, extra = nn.load_weights_full(path)
    if "frontend" not in extra:
        raise nn.ModelFormatError("weight file carries no frontend config; not a pipeline bundle")
    stored = extra.get("labels", list(LABELS))
    if stored != list(LABELS):
        raise nn.ModelFormatError(f"label set mismatch: {stored}")
    return Pipeline(
        _frontend_from_dict(extra["frontend"]),
        spec,
        weights,
        float(extra.get("threshold", nn.CONFIDENCE_THRESHOLD)),
    )
