"""Sequential conv/dense network with Adam training, built on numpy alone.

Forward, backprop, and the optimizer are handwritten so the classifier has
no framework dependency and behaves identically on every host. Weights
travel in a small CRC-checked binary container ("RSNN") holding float32
or quantized int8 arrays.

forward and classify are pure; fit is single-threaded per call (batch maps
could run in parallel, the reduction order is fixed either way).
"""

from __future__ import annotations

import json
import struct
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .labels import LABELS, UNCERTAIN

CONFIDENCE_THRESHOLD = 0.6
WEIGHTS_MAGIC = b"RSNN"
WEIGHTS_VERSION = 1


class InvalidSpec(ValueError):
    pass


class ShapeMismatch(ValueError):
    pass


class EmptyClass(ValueError):
    pass


class TrainingDiverged(RuntimeError):
    pass


class ModelFormatError(ValueError):
    pass


# ---------------------------------------------------------------- layer menu


@dataclass(frozen=True)
class Conv1D:
    """Valid-padding stride-1 convolution along time, fixed relu."""

    filters: int
    kernel: int = 3
    kind: str = field(default="conv1d", init=False)


@dataclass(frozen=True)
class MaxPool1D:
    size: int = 2
    kind: str = field(default="maxpool1d", init=False)


@dataclass(frozen=True)
class Flatten:
    kind: str = field(default="flatten", init=False)


@dataclass(frozen=True)
class Dropout:
    """Inverted dropout; active only while training."""

    rate: float = 0.25
    kind: str = field(default="dropout", init=False)


@dataclass(frozen=True)
class Dense:
    units: int
    activation: str = "linear"  # "linear" | "relu"
    kind: str = field(default="dense", init=False)


@dataclass(frozen=True)
class Softmax:
    kind: str = field(default="softmax", init=False)


LayerSpec = Conv1D | MaxPool1D | Flatten | Dropout | Dense | Softmax

_LAYER_KINDS = {
    "conv1d": Conv1D,
    "maxpool1d": MaxPool1D,
    "flatten": Flatten,
    "dropout": Dropout,
    "dense": Dense,
    "softmax": Softmax,
}


@dataclass(frozen=True)
class ModelSpec:
    """Layer chain plus its (frames, coeffs) input shape, shape-checked."""

    input_shape: tuple[int, int]
    layers: tuple[LayerSpec, ...]

    def __post_init__(self):
        object.__setattr__(self, "input_shape", tuple(int(v) for v in self.input_shape))
        object.__setattr__(self, "layers", tuple(self.layers))
        self.shapes()  # raises InvalidSpec on a bad chain

    def shapes(self) -> list:
        """Output shape after each layer; 2D (length, channels) until flatten."""
        if len(self.input_shape) != 2 or min(self.input_shape) < 1:
            raise InvalidSpec(f"input_shape must be two positive dims, got {self.input_shape}")
        if not self.layers:
            raise InvalidSpec("empty layer list")
        if sum(isinstance(l, Softmax) for l in self.layers) != 1 or not isinstance(self.layers[-1], Softmax):
            raise InvalidSpec("exactly one softmax layer is required, at the end")
        if len(self.layers) < 2 or not isinstance(self.layers[-2], Dense) or self.layers[-2].activation != "linear":
            raise InvalidSpec("softmax must follow a linear dense layer")
        shape: tuple | int = self.input_shape
        out = []
        for i, layer in enumerate(self.layers):
            if isinstance(layer, Conv1D):
                if not isinstance(shape, tuple):
                    raise InvalidSpec(f"layer {i}: conv1d after flatten")
                if layer.filters < 1 or layer.kernel < 1:
                    raise InvalidSpec(f"layer {i}: conv1d needs positive filters and kernel")
                if layer.kernel > shape[0]:
                    raise InvalidSpec(f"layer {i}: kernel {layer.kernel} exceeds length {shape[0]}")
                shape = (shape[0] - layer.kernel + 1, layer.filters)
            elif isinstance(layer, MaxPool1D):
                if not isinstance(shape, tuple):
                    raise InvalidSpec(f"layer {i}: maxpool1d after flatten")
                if layer.size < 1 or shape[0] // layer.size < 1:
                    raise InvalidSpec(f"layer {i}: pool {layer.size} too large for length {shape[0]}")
                shape = (shape[0] // layer.size, shape[1])
            elif isinstance(layer, Flatten):
                if not isinstance(shape, tuple):
                    raise InvalidSpec(f"layer {i}: repeated flatten")
                shape = shape[0] * shape[1]
            elif isinstance(layer, Dropout):
                if not 0.0 <= layer.rate < 1.0:
                    raise InvalidSpec(f"layer {i}: dropout rate {layer.rate} outside [0, 1)")
            elif isinstance(layer, Dense):
                if isinstance(shape, tuple):
                    raise InvalidSpec(f"layer {i}: dense before flatten")
                if layer.units < 1:
                    raise InvalidSpec(f"layer {i}: dense needs positive units")
                if layer.activation not in ("linear", "relu"):
                    raise InvalidSpec(f"layer {i}: unknown activation {layer.activation!r}")
                shape = layer.units
            out.append(shape)
        return out

    @property
    def n_classes(self) -> int:
        return self.layers[-2].units

    def param_shapes(self) -> list[dict[str, tuple]]:
        """Per-layer parameter array shapes ({} for parameterless layers)."""
        out = []
        shape: tuple | int = self.input_shape
        for layer, next_shape in zip(self.layers, self.shapes()):
            if isinstance(layer, Conv1D):
                out.append({"w": (layer.kernel * shape[1], layer.filters), "b": (layer.filters,)})
            elif isinstance(layer, Dense):
                out.append({"w": (shape, layer.units), "b": (layer.units,)})
            else:
                out.append({})
            shape = next_shape
        return out

    def param_count(self) -> int:
        return sum(int(np.prod(s)) for layer in self.param_shapes() for s in layer.values())

    def mac_count(self) -> int:
        """Multiply-accumulates per forward pass (bias adds not counted)."""
        total = 0
        shape: tuple | int = self.input_shape
        for layer, next_shape in zip(self.layers, self.shapes()):
            if isinstance(layer, Conv1D):
                total += next_shape[0] * layer.filters * layer.kernel * shape[1]
            elif isinstance(layer, Dense):
                total += shape * layer.units
            shape = next_shape
        return total

    def activation_counts(self) -> list[int]:
        """Element count of each layer's output buffer, input first."""
        counts = [int(np.prod(self.input_shape))]
        for s in self.shapes():
            counts.append(int(np.prod(s)) if isinstance(s, tuple) else int(s))
        return counts

    def to_dict(self) -> dict:
        layers = []
        for layer in self.layers:
            entry = {"kind": layer.kind}
            entry.update({k: v for k, v in layer.__dict__.items() if k != "kind"})
            layers.append(entry)
        return {"input_shape": list(self.input_shape), "layers": layers}

    @classmethod
    def from_dict(cls, obj: dict) -> "ModelSpec":
        layers = []
        for entry in obj["layers"]:
            fields = dict(entry)
            kind = fields.pop("kind")
            if kind not in _LAYER_KINDS:
                raise ModelFormatError(f"unknown layer kind {kind!r}")
            layers.append(_LAYER_KINDS[kind](**fields))
        return cls(tuple(obj["input_shape"]), tuple(layers))


def default_model_spec(input_shape: tuple[int, int] = (61, 40), n_classes: int = len(LABELS)) -> ModelSpec:
    """Two conv/pool stages into a small dense head."""
    return ModelSpec(
        input_shape,
        (
            Conv1D(8, 3),
            MaxPool1D(2),
            Conv1D(16, 3),
            MaxPool1D(2),
            Flatten(),
            Dropout(0.25),
            Dense(n_classes),
            Softmax(),
        ),
    )


# Weights: list aligned with spec.layers, each entry {"w": ..., "b": ...} or {}.
Weights = list


def init_weights(spec: ModelSpec, seed: int = 42) -> Weights:
    """He-style uniform fan-in init for w, zeros for b."""
    rng = np.random.default_rng(np.random.SeedSequence([seed & 0xFFFFFFFF, 0x1A17]))
    weights = []
    for shapes in spec.param_shapes():
        if not shapes:
            weights.append({})
            continue
        fan_in = shapes["w"][0]
        limit = np.sqrt(6.0 / fan_in)
        weights.append(
            {
                "w": rng.uniform(-limit, limit, size=shapes["w"]),
                "b": np.zeros(shapes["b"]),
            }
        )
    return weights


def _check_weights(spec: ModelSpec, weights: Weights) -> None:
    template = spec.param_shapes()
    if len(weights) != len(template):
        raise ShapeMismatch(f"{len(weights)} weight entries for {len(template)} layers")
    for i, (have, want) in enumerate(zip(weights, template)):
        have_shapes = {k: tuple(v.shape) for k, v in have.items()}
        if have_shapes != want:
            raise ShapeMismatch(f"layer {i}: got {have_shapes}, expected {want}")


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def _conv_cols(x: np.ndarray, kernel: int) -> np.ndarray:
    # (B, L, C) -> (B, L-k+1, k*C), tap-major to match the (k*C_in, C_out) weight layout
    win = np.lib.stride_tricks.sliding_window_view(x, kernel, axis=1)  # (B, L_out, C, k)
    return np.ascontiguousarray(win.transpose(0, 1, 3, 2)).reshape(x.shape[0], -1, kernel * x.shape[2])


def _forward_batch(spec: ModelSpec, weights: Weights, x: np.ndarray, train: bool = False, rng=None):
    """Run the chain up to the logits; returns (logits, caches) for backprop."""
    caches = []
    for layer, params in zip(spec.layers, weights):
        if isinstance(layer, Conv1D):
            cols = _conv_cols(x, layer.kernel)
            z = cols @ params["w"] + params["b"]
            out = np.maximum(z, 0.0)
            caches.append(("conv1d", cols, z, x.shape))
            x = out
        elif isinstance(layer, MaxPool1D):
            b, length, ch = x.shape
            keep = (length // layer.size) * layer.size
            windows = x[:, :keep].reshape(b, length // layer.size, layer.size, ch)
            idx = windows.argmax(axis=2)
            caches.append(("maxpool1d", idx, x.shape))
            x = np.take_along_axis(windows, idx[:, :, None, :], axis=2)[:, :, 0, :]
        elif isinstance(layer, Flatten):
            caches.append(("flatten", x.shape))
            x = x.reshape(x.shape[0], -1)
        elif isinstance(layer, Dropout):
            if train and layer.rate > 0.0:
                mask = (rng.random(x.shape) >= layer.rate) / (1.0 - layer.rate)
                caches.append(("dropout", mask))
                x = x * mask
            else:
                caches.append(("dropout", None))
        elif isinstance(layer, Dense):
            z = x @ params["w"] + params["b"]
            caches.append(("dense", x, z))
            x = np.maximum(z, 0.0) if layer.activation == "relu" else z
        else:  # Softmax: handled outside the chain so the loss can use raw logits
            caches.append(("softmax",))
    return x, caches


def _backward_batch(spec: ModelSpec, weights: Weights, caches: list, dlogits: np.ndarray):
    grads = [{} for _ in spec.layers]
    dx = dlogits
    for i in range(len(spec.layers) - 1, -1, -1):
        layer, cache = spec.layers[i], caches[i]
        if isinstance(layer, Softmax):
            continue
        if isinstance(layer, Dense):
            _, x_in, z = cache
            dz = dx * (z > 0.0) if layer.activation == "relu" else dx
            grads[i] = {"w": x_in.T @ dz, "b": dz.sum(axis=0)}
            dx = dz @ weights[i]["w"].T
        elif isinstance(layer, Dropout):
            mask = cache[1]
            if mask is not None:
                dx = dx * mask
        elif isinstance(layer, Flatten):
            dx = dx.reshape(cache[1])
        elif isinstance(layer, MaxPool1D):
            _, idx, in_shape = cache
            b, length, ch = in_shape
            pooled = length // layer.size
            expanded = np.zeros((b, pooled, layer.size, ch))
            np.put_along_axis(expanded, idx[:, :, None, :], dx[:, :, None, :], axis=2)
            full = np.zeros(in_shape)
            full[:, : pooled * layer.size] = expanded.reshape(b, pooled * layer.size, ch)
            dx = full
        elif isinstance(layer, Conv1D):
            _, cols, z, in_shape = cache
            dz = dx * (z > 0.0)
            flat_cols = cols.reshape(-1, cols.shape[2])
            flat_dz = dz.reshape(-1, dz.shape[2])
            grads[i] = {"w": flat_cols.T @ flat_dz, "b": flat_dz.sum(axis=0)}
            dcols = (dz @ weights[i]["w"].T).reshape(dz.shape[0], dz.shape[1], layer.kernel, in_shape[2])
            dx = np.zeros(in_shape)
            for tap in range(layer.kernel):
                dx[:, tap : tap + dz.shape[1]] += dcols[:, :, tap]
    return grads


def forward(spec: ModelSpec, weights: Weights, features: np.ndarray) -> np.ndarray:
    """Probabilities for one feature matrix; dropout inactive."""
    features = np.asarray(features, dtype=np.float64)
    if features.shape != tuple(spec.input_shape):
        raise ShapeMismatch(f"features {features.shape} != input_shape {spec.input_shape}")
    _check_weights(spec, weights)
    logits, _ = _forward_batch(spec, weights, features[None])
    return _softmax(logits)[0]


def forward_batch(spec: ModelSpec, weights: Weights, features: np.ndarray) -> np.ndarray:
    """Probabilities for a (batch, frames, coeffs) stack; dropout inactive."""
    features = np.asarray(features, dtype=np.float64)
    if features.shape[1:] != tuple(spec.input_shape):
        raise ShapeMismatch(f"features {features.shape} != (n, *{spec.input_shape})")
    _check_weights(spec, weights)
    logits, _ = _forward_batch(spec, weights, features)
    return _softmax(logits)


def _loss_and_grads(spec, weights, x, y_idx, train=False, rng=None):
    logits, caches = _forward_batch(spec, weights, x, train=train, rng=rng)
    # log-softmax keeps the loss exact for the finite-difference check
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_probs = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    n = x.shape[0]
    loss = -log_probs[np.arange(n), y_idx].mean()
    dlogits = (np.exp(log_probs) - np.eye(spec.n_classes)[y_idx]) / n
    grads = _backward_batch(spec, weights, caches, dlogits)
    return loss, grads, np.exp(log_probs)


def _as_indices(targets: np.ndarray, n_classes: int) -> np.ndarray:
    targets = np.asarray(targets)
    if targets.ndim == 2:  # one-hot rows
        return targets.argmax(axis=1)
    return targets.astype(np.int64)


def gradients(spec: ModelSpec, weights: Weights, features: np.ndarray, targets: np.ndarray):
    """(loss, per-layer grads) of the mean categorical cross-entropy; no dropout."""
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 3 or features.shape[0] == 0:
        raise ShapeMismatch("need a nonempty (batch, frames, coeffs) feature stack")
    if features.shape[1:] != tuple(spec.input_shape):
        raise ShapeMismatch(f"features {features.shape} != (n, *{spec.input_shape})")
    _check_weights(spec, weights)
    loss, grads, _ = _loss_and_grads(spec, weights, features, _as_indices(targets, spec.n_classes))
    return loss, grads


def adam_step(w, g, m, v, t: int, lr: float = 0.0005, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
    """One bias-corrected Adam update on a single array; returns (w, m, v)."""
    if t < 1:
        raise ValueError(f"step index must be >= 1, got {t}")
    m = beta1 * m + (1.0 - beta1) * g
    v = beta2 * v + (1.0 - beta2) * np.square(g)
    m_hat = m / (1.0 - beta1**t)
    v_hat = v / (1.0 - beta2**t)
    return w - lr * m_hat / (np.sqrt(v_hat) + eps), m, v


@dataclass
class TrainConfig:
    learning_rate: float = 0.0005
    epochs: int = 100
    validation_split: float = 0.2
    batch_size: int = 32
    rng_seed: int = 42

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError(f"learning_rate must be positive, got {self.learning_rate}")
        if not 0.0 < self.validation_split < 1.0:
            raise ValueError(f"validation_split must be in (0, 1), got {self.validation_split}")
        if self.batch_size < 1 or self.epochs < 0:
            raise ValueError("batch_size must be >= 1 and epochs >= 0")


@dataclass
class TrainResult:
    spec: ModelSpec
    weights: Weights
    history: dict


def fit(spec: ModelSpec, features: np.ndarray, targets: np.ndarray, cfg: TrainConfig | None = None) -> TrainResult:
    """Train with Adam; fully deterministic given cfg.rng_seed."""
    cfg = cfg or TrainConfig()
    features = np.asarray(features, dtype=np.float64)
    y = _as_indices(targets, spec.n_classes)
    if features.ndim != 3 or features.shape[1:] != tuple(spec.input_shape):
        raise ShapeMismatch(f"features {features.shape} != (n, *{spec.input_shape})")
    present = np.bincount(y, minlength=spec.n_classes)
    if (present == 0).any():
        missing = [int(i) for i in np.flatnonzero(present == 0)]
        raise EmptyClass(f"no training examples for class index(es) {missing}")

    seed_root = np.random.SeedSequence([cfg.rng_seed & 0xFFFFFFFF, 0xF17])
    init_seq, shuffle_seq, drop_seq = seed_root.spawn(3)
    weights = init_weights(spec, seed=int(init_seq.generate_state(1)[0]))
    history: dict = {"loss": [], "accuracy": [], "val_loss": [], "val_accuracy": []}
    if cfg.epochs == 0:
        return TrainResult(spec, weights, history)

    shuffle_rng = np.random.default_rng(shuffle_seq)
    drop_rng = np.random.default_rng(drop_seq)
    n = features.shape[0]
    n_val = min(max(int(np.floor(cfg.validation_split * n + 0.5)), 1), n - 1)
    order = shuffle_rng.permutation(n)
    val_idx, train_idx = order[:n_val], order[n_val:]

    m_state = [{k: np.zeros_like(v) for k, v in layer.items()} for layer in weights]
    v_state = [{k: np.zeros_like(v) for k, v in layer.items()} for layer in weights]
    t = 0
    for epoch in range(cfg.epochs):
        epoch_order = train_idx[shuffle_rng.permutation(train_idx.size)]
        loss_sum = 0.0
        hit_sum = 0
        for start in range(0, epoch_order.size, cfg.batch_size):
            batch = epoch_order[start : start + cfg.batch_size]
            loss, grads, probs = _loss_and_grads(spec, weights, features[batch], y[batch], train=True, rng=drop_rng)
            if not np.isfinite(loss):
                raise TrainingDiverged(f"non-finite loss {loss} at epoch {epoch} step {t} (lr={cfg.learning_rate})")
            t += 1
            for layer_w, layer_g, layer_m, layer_v in zip(weights, grads, m_state, v_state):
                for key in layer_w:
                    layer_w[key], layer_m[key], layer_v[key] = adam_step(
                        layer_w[key], layer_g[key], layer_m[key], layer_v[key], t, lr=cfg.learning_rate
                    )
            loss_sum += loss * batch.size
            hit_sum += int((probs.argmax(axis=1) == y[batch]).sum())
        val_probs = forward_batch(spec, weights, features[val_idx])
        val_y = y[val_idx]
        val_log = np.log(np.maximum(val_probs[np.arange(val_idx.size), val_y], 1e-300))
        history["loss"].append(loss_sum / epoch_order.size)
        history["accuracy"].append(hit_sum / epoch_order.size)
        history["val_loss"].append(float(-val_log.mean()))
        history["val_accuracy"].append(float((val_probs.argmax(axis=1) == val_y).mean()))
    return TrainResult(spec, weights, history)


# ------------------------------------------------------------ classification


@dataclass(frozen=True)
class Prediction:
    probabilities: np.ndarray
    decision: str
    threshold: float


def classify(probabilities, threshold: float = CONFIDENCE_THRESHOLD, labels: tuple = LABELS) -> str:
    """Argmax label when its probability clears the threshold (inclusive)."""
    p = np.asarray(probabilities, dtype=np.float64)
    if p.shape != (len(labels),) or (p < -1e-9).any() or abs(p.sum() - 1.0) > 1e-6:
        raise ValueError(f"not a probability vector over {len(labels)} labels: {p}")
    top = int(p.argmax())  # first max wins ties, i.e. label order
    return labels[top] if p[top] >= threshold else UNCERTAIN


def predict(spec: ModelSpec, weights: Weights, features: np.ndarray, threshold: float = CONFIDENCE_THRESHOLD) -> Prediction:
    probs = forward(spec, weights, features)
    return Prediction(probs, classify(probs, threshold), threshold)


# ------------------------------------------------------------- weight files


def _array_entries(spec: ModelSpec):
    for i, shapes in enumerate(spec.param_shapes()):
        for name in sorted(shapes):
            yield i, name, shapes[name]


def save_weights(spec: ModelSpec, weights: Weights, path, quantized: bool = False, extra: dict | None = None) -> None:
    """Write the CRC-checked RSNN container (float32, or int8 when quantized).

    `extra` rides along in the header for pipeline metadata (frontend etc.).
    """
    if not quantized:
        _check_weights(spec, weights)
    arrays = []
    blobs = []
    for i, name, _ in _array_entries(spec):
        value = weights[i][name]
        if quantized:
            qa = value if isinstance(value, QuantArray) else quantize_array(value)
            arrays.append(
                {
                    "layer": i,
                    "name": name,
                    "shape": list(qa.values.shape),
                    "dtype": "int8",
                    "scale": qa.scale,
                    "zero_point": qa.zero_point,
                }
            )
            blobs.append(qa.values.astype("<i1").tobytes())
        else:
            arrays.append({"layer": i, "name": name, "shape": list(value.shape), "dtype": "float32"})
            blobs.append(np.asarray(value, dtype="<f4").tobytes())
    doc = {"spec": spec.to_dict(), "arrays": arrays}
    if extra:
        doc["extra"] = extra
    header = json.dumps(doc, sort_keys=True).encode()
    payload = WEIGHTS_MAGIC + struct.pack("<II", WEIGHTS_VERSION, len(header)) + header + b"".join(blobs)
    Path(path).write_bytes(payload + struct.pack("<I", zlib.crc32(payload)))


def load_weights(path) -> tuple[ModelSpec, Weights]:
    spec, weights, _ = load_weights_full(path)
    return spec, weights


def load_weights_full(path) -> tuple[ModelSpec, Weights, dict]:
    """Read an RSNN file back; int8 arrays come back dequantized to float."""
    data = Path(path).read_bytes()
    if len(data) < 16:
        raise ModelFormatError(f"file too short ({len(data)} bytes)")
    if data[:4] != WEIGHTS_MAGIC:
        raise ModelFormatError(f"bad magic {data[:4]!r}")
    (stored_crc,) = struct.unpack("<I", data[-4:])
    if zlib.crc32(data[:-4]) != stored_crc:
        raise ModelFormatError("CRC mismatch (truncated or corrupted file)")
    version, header_len = struct.unpack("<II", data[4:12])
    if version != WEIGHTS_VERSION:
        raise ModelFormatError(f"unsupported version {version}")
    if 12 + header_len > len(data) - 4:
        raise ModelFormatError("header length exceeds file size")
    try:
        header = json.loads(data[12 : 12 + header_len])
        spec = ModelSpec.from_dict(header["spec"])
    except (KeyError, ValueError, TypeError) as exc:
        raise ModelFormatError(f"malformed header: {exc}") from exc
    weights: Weights = [{} for _ in spec.layers]
    offset = 12 + header_len
    for entry in header["arrays"]:
        count = int(np.prod(entry["shape"]))
        width = 1 if entry["dtype"] == "int8" else 4
        end = offset + count * width
        if end > len(data) - 4:
            raise ModelFormatError("array data exceeds file size")
        raw = np.frombuffer(data[offset:end], dtype="<i1" if entry["dtype"] == "int8" else "<f4")
        value = raw.reshape(entry["shape"]).astype(np.float64)
        if entry["dtype"] == "int8":
            value = (value - entry["zero_point"]) * entry["scale"]
        weights[entry["layer"]][entry["name"]] = value
        offset = end
    if offset != len(data) - 4:
        raise ModelFormatError("trailing bytes after arrays")
    _check_weights(spec, weights)
    return spec, weights, header.get("extra", {})


# -------------------------------------------------------------- quantization


@dataclass(frozen=True)
class QuantArray:
    values: np.ndarray  # int8
    scale: float
    zero_point: int


def quantize_array(x: np.ndarray) -> QuantArray:
    """Affine int8 map covering [min, max]; scale floor on degenerate ranges."""
    x = np.asarray(x, dtype=np.float64)
    lo, hi = float(x.min()), float(x.max())
    if hi - lo < 1e-12:
        scale = max(abs(hi) / 127.0, 1e-8)
        zero_point = 0
    else:
        scale = (hi - lo) / 255.0
        zero_point = int(np.clip(round(-128.0 - lo / scale), -128, 127))
    q = np.clip(np.rint(x / scale) + zero_point, -128, 127).astype(np.int8)
    return QuantArray(q, scale, zero_point)


def dequantize_array(qa: QuantArray) -> np.ndarray:
    return (qa.values.astype(np.float64) - qa.zero_point) * qa.scale


def quantize(weights: Weights) -> list:
    """Per-array affine int8 form of every parameter array."""
    return [{k: quantize_array(v) for k, v in layer.items()} for layer in weights]


def dequantize(qweights: list) -> Weights:
    return [{k: dequantize_array(v) for k, v in layer.items()} for layer in qweights]
