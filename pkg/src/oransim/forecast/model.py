"""Stacked LSTM forecaster: configuration, parameters, forward pass, file format.

The network is a stack of LSTM layers followed by a dense head applied to
the final hidden state of the top layer. Gates use the logistic sigmoid,
cell/candidate activations use tanh. All tensors are float64.

Weight matrices pack the four gates row-wise in the order (input, forget,
output, candidate) so the three sigmoid gates form one contiguous block:
``w_x`` is (4H, D_in), ``w_h`` is (4H, H), ``b`` is (4H,). The recurrence
for one step is

    z = w_x @ x + w_h @ h_prev + b
    i, f, o = sigmoid(z_i), sigmoid(z_f), sigmoid(z_o)
    g = tanh(z_g)
    c = f * c_prev + i * g
    h = o * tanh(c)
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "LstmConfig",
    "LayerParams",
    "HeadParams",
    "NormStats",
    "ForecastModel",
    "init_model",
    "lstm_cell_step",
    "forward",
    "sigmoid",
    "model_to_json",
    "model_from_json",
    "save_model",
    "load_model",
]

MODEL_FORMAT = "oransim-forecast-model"
MODEL_FORMAT_VERSION = 1


def sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


@dataclass(frozen=True)
class LstmConfig:
    """Architecture of the forecaster (activations are fixed: sigmoid gates, tanh cell)."""

    n_layers: int = 2
    units_per_layer: int = 12
    input_dim: int = 2
    output_dim: int = 2

    def __post_init__(self):
        for name in ("n_layers", "units_per_layer", "input_dim", "output_dim"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1, got {getattr(self, name)}")

    def layer_input_dim(self, layer: int) -> int:
        return self.input_dim if layer == 0 else self.units_per_layer


@dataclass
class LayerParams:
    w_x: np.ndarray  # (4H, D_in)
    w_h: np.ndarray  # (4H, H)
    b: np.ndarray    # (4H,)


@dataclass
class HeadParams:
    w: np.ndarray  # (output_dim, H)
    b: np.ndarray  # (output_dim,)


@dataclass(frozen=True)
class NormStats:
    """Per-feature min/max (over the training split) for min-max scaling.

    Degenerate features (max == min) normalize to 0 and denormalize to the
    shared min value.
    """

    feature_min: np.ndarray
    feature_max: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.feature_min, dtype=np.float64)
        hi = np.asarray(self.feature_max, dtype=np.float64)
        object.__setattr__(self, "feature_min", lo)
        object.__setattr__(self, "feature_max", hi)
        if lo.shape != hi.shape:
            raise ValueError("feature_min and feature_max must have the same shape")
        if np.any(hi < lo):
            raise ValueError("feature_max must be >= feature_min per feature")

    @property
    def span(self) -> np.ndarray:
        return self.feature_max - self.feature_min

    def normalize(self, values: np.ndarray) -> np.ndarray:
        span = np.where(self.span > 0, self.span, 1.0)
        out = (np.asarray(values, dtype=np.float64) - self.feature_min) / span
        return np.where(self.span > 0, out, 0.0)

    def denormalize(self, values: np.ndarray) -> np.ndarray:
        return self.feature_min + np.asarray(values, dtype=np.float64) * self.span


@dataclass
class ForecastModel:
    """LSTM parameters plus the normalization statistics they were trained with."""

    config: LstmConfig
    layers: list[LayerParams]
    head: HeadParams
    norm: NormStats
    trained_epochs: int = 0

    def validate_shapes(self):
        cfg = self.config
        if len(self.layers) != cfg.n_layers:
            raise ValueError(f"expected {cfg.n_layers} layers, got {len(self.layers)}")
        h = cfg.units_per_layer
        for l, layer in enumerate(self.layers):
            d = cfg.layer_input_dim(l)
            if layer.w_x.shape != (4 * h, d):
                raise ValueError(f"layer {l} w_x shape {layer.w_x.shape} != {(4 * h, d)}")
            if layer.w_h.shape != (4 * h, h):
                raise ValueError(f"layer {l} w_h shape {layer.w_h.shape} != {(4 * h, h)}")
            if layer.b.shape != (4 * h,):
                raise ValueError(f"layer {l} b shape {layer.b.shape} != {(4 * h,)}")
        if self.head.w.shape != (cfg.output_dim, h):
            raise ValueError(f"head w shape {self.head.w.shape} != {(cfg.output_dim, h)}")
        if self.head.b.shape != (cfg.output_dim,):
            raise ValueError(f"head b shape {self.head.b.shape} != {(cfg.output_dim,)}")
        for arr in param_arrays(self):
            if not np.all(np.isfinite(arr)):
                raise ValueError("model parameters must all be finite")


def param_arrays(model: ForecastModel) -> list[np.ndarray]:
    """Flat, ordered view of all parameter tensors (shared references)."""
    arrays = []
    for layer in model.layers:
        arrays.extend([layer.w_x, layer.w_h, layer.b])
    arrays.extend([model.head.w, model.head.b])
    return arrays


def init_model(config: LstmConfig, norm: NormStats, rng: np.random.Generator) -> ForecastModel:
    """Seeded initialization: weights uniform in +-1/sqrt(fan_in), forget bias 1.

    Draw order is fixed (per layer: w_x then w_h; then head w) so a given
    generator state always produces the same model.
    """
    h = config.units_per_layer
    layers = []
    for l in range(config.n_layers):
        d = config.layer_input_dim(l)
        bound_x = 1.0 / np.sqrt(d)
        bound_h = 1.0 / np.sqrt(h)
        w_x = rng.uniform(-bound_x, bound_x, size=(4 * h, d))
        w_h = rng.uniform(-bound_h, bound_h, size=(4 * h, h))
        b = np.zeros(4 * h)
        b[h : 2 * h] = 1.0  # forget gate bias
        layers.append(LayerParams(w_x, w_h, b))
    bound = 1.0 / np.sqrt(h)
    head = HeadParams(rng.uniform(-bound, bound, size=(config.output_dim, h)), np.zeros(config.output_dim))
    model = ForecastModel(config, layers, head, norm)
    model.validate_shapes()
    return model


def lstm_cell_step(x: np.ndarray, h_prev: np.ndarray, c_prev: np.ndarray, layer: LayerParams):
    """One LSTM step. Accepts a single vector (D,) or a batch (B, D).

    Returns (h, c) with the same leading shape as the inputs.
    """
    x = np.asarray(x, dtype=np.float64)
    h4 = layer.b.shape[0]
    h_units = h4 // 4
    if x.shape[-1] != layer.w_x.shape[1]:
        raise ValueError(f"input dim {x.shape[-1]} != expected {layer.w_x.shape[1]}")
    if h_prev.shape[-1] != h_units or c_prev.shape[-1] != h_units:
        raise ValueError("state dims do not match layer size")
    z = x @ layer.w_x.T + h_prev @ layer.w_h.T + layer.b
    gates = sigmoid(z[..., : 3 * h_units])
    i = gates[..., 0 * h_units : 1 * h_units]
    f = gates[..., 1 * h_units : 2 * h_units]
    o = gates[..., 2 * h_units : 3 * h_units]
    g = np.tanh(z[..., 3 * h_units :])
    c = f * c_prev + i * g
    h = o * np.tanh(c)
    return h, c


def forward(model: ForecastModel, window: np.ndarray) -> np.ndarray:
    """Run the stacked recurrence over a normalized input window.

    ``window`` is (T, input_dim) or (B, T, input_dim); initial states are
    zero. Returns the (normalized) prediction, shape (output_dim,) or
    (B, output_dim).
    """
    window = np.asarray(window, dtype=np.float64)
    squeeze = window.ndim == 2
    if squeeze:
        window = window[np.newaxis, :, :]
    if window.ndim != 3 or window.shape[2] != model.config.input_dim:
        raise ValueError(
            f"window must be (T, {model.config.input_dim}) or (B, T, {model.config.input_dim}), "
            f"got {window.shape}"
        )
    if window.shape[1] < 1:
        raise ValueError("window must cover at least one step")
    batch, steps, _ = window.shape
    h_units = model.config.units_per_layer
    layer_in = window.transpose(1, 0, 2)  # (T, B, D)
    for layer in model.layers:
        zx = layer_in @ layer.w_x.T + layer.b
        h = np.zeros((batch, h_units))
        c = np.zeros((batch, h_units))
        outputs = np.empty((steps, batch, h_units))
        for t in range(steps):
            z = zx[t] + h @ layer.w_h.T
            gates = sigmoid(z[:, : 3 * h_units])
            g = np.tanh(z[:, 3 * h_units :])
            c = gates[:, h_units : 2 * h_units] * c + gates[:, :h_units] * g
            h = gates[:, 2 * h_units : 3 * h_units] * np.tanh(c)
            outputs[t] = h
        layer_in = outputs
    pred = layer_in[-1] @ model.head.w.T + model.head.b
    return pred[0] if squeeze else pred


def model_to_json(model: ForecastModel) -> str:
    """Self-describing, deterministic JSON encoding (exact float round-trip)."""
    model.validate_shapes()
    doc = {
        "format": MODEL_FORMAT,
        "format_version": MODEL_FORMAT_VERSION,
        "config": {
            "n_layers": model.config.n_layers,
            "units_per_layer": model.config.units_per_layer,
            "input_dim": model.config.input_dim,
            "output_dim": model.config.output_dim,
        },
        "norm": {
            "feature_min": model.norm.feature_min.tolist(),
            "feature_max": model.norm.feature_max.tolist(),
        },
        "trained_epochs": model.trained_epochs,
        "layers": [
            {"w_x": layer.w_x.tolist(), "w_h": layer.w_h.tolist(), "b": layer.b.tolist()}
            for layer in model.layers
        ],
        "head": {"w": model.head.w.tolist(), "b": model.head.b.tolist()},
    }
    return json.dumps(doc, sort_keys=True, separators=(",", ":"))


def model_from_json(text: str) -> ForecastModel:
    doc = json.loads(text)
    if doc.get("format") != MODEL_FORMAT:
        raise ValueError(f"not a forecast model file (format={doc.get('format')!r})")
    if doc.get("format_version") != MODEL_FORMAT_VERSION:
        raise ValueError(f"unsupported model format version {doc.get('format_version')!r}")
    config = LstmConfig(**doc["config"])
    layers = [
        LayerParams(
            np.array(layer["w_x"], dtype=np.float64),
            np.array(layer["w_h"], dtype=np.float64),
            np.array(layer["b"], dtype=np.float64),
        )
        for layer in doc["layers"]
    ]
    head = HeadParams(
        np.array(doc["head"]["w"], dtype=np.float64),
        np.array(doc["head"]["b"], dtype=np.float64),
    )
    norm = NormStats(
        np.array(doc["norm"]["feature_min"], dtype=np.float64),
        np.array(doc["norm"]["feature_max"], dtype=np.float64),
    )
    model = ForecastModel(config, layers, head, norm, trained_epochs=doc["trained_epochs"])
    model.validate_shapes()
    return model


def save_model(model: ForecastModel, path) -> None:
    Path(path).write_text(model_to_json(model), encoding="utf-8")


def load_model(path) -> ForecastModel:
    return model_from_json(Path(path).read_text(encoding="utf-8"))
