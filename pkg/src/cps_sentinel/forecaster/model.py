"""Next-step forecaster: model assembly, training loop, Adam, serialization."""

import json
from dataclasses import dataclass, field

import numpy as np

from ..dataio import ChannelSchema, TimeSeriesFrame, WindowBatch, make_windows
from ..rng import Rng, derive_seed
from .layers import (
    SIGMOID,
    TANH,
    Conv1DLayer,
    Conv1DSpec,
    DenseLayer,
    DenseSpec,
    FlattenLayer,
    FlattenSpec,
    MaxPool1DLayer,
    MaxPool1DSpec,
    ShapeError,
)

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8

FORMAT_VERSION = 1
PREDICT_CHUNK = 4096


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 100
    batch_size: int = 433
    learning_rate: float = 0.001
    early_stop_patience: int = 5
    validation_fraction: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be positive")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.early_stop_patience < 1:
            raise ValueError("early_stop_patience must be positive")
        if self.early_stop_patience > self.epochs:
            raise ValueError("patience must not exceed epochs")
        if not 0.0 < self.validation_fraction < 1.0:
            raise ValueError("validation_fraction must lie in (0, 1)")


@dataclass
class TrainHistory:
    train_loss: list[float] = field(default_factory=list)
    val_loss: list[float] = field(default_factory=list)

    @property
    def stopped_epoch(self) -> int:
        return len(self.val_loss)

    @property
    def best_val_loss(self) -> float:
        return min(self.val_loss)


class EarlyStopper:
    """Stop after `patience` consecutive epochs without strict improvement."""

    def __init__(self, patience: int):
        self.patience = patience
        self.best = np.inf
        self.best_epoch = 0
        self._stale = 0
        self._seen = 0

    def update(self, loss: float) -> bool:
        """Record one epoch's loss; returns True when it improved on the best."""
        self._seen += 1
        if loss < self.best:
            self.best = loss
            self.best_epoch = self._seen
            self._stale = 0
            return True
        self._stale += 1
        return False

    @property
    def should_stop(self) -> bool:
        return self._stale >= self.patience


def default_stack(
    channels: int,
    conv_filters: tuple[int, int] = (32, 64),
    kernel_size: int = 3,
    dense_units: tuple[int, int] = (64, 32),
    dropout: float = 0.2,
) -> list:
    """The reference conv-pool-conv-pool-flatten-dense stack, C-generic."""
    return [
        Conv1DSpec(filters=conv_filters[0], kernel_size=kernel_size),
        MaxPool1DSpec(pool=2),
        Conv1DSpec(filters=conv_filters[1], kernel_size=kernel_size),
        MaxPool1DSpec(pool=2),
        FlattenSpec(),
        DenseSpec(units=dense_units[0], activation=TANH, dropout=dropout),
        DenseSpec(units=dense_units[1], activation=TANH, dropout=dropout),
        DenseSpec(units=channels, activation=SIGMOID, dropout=dropout),
    ]


class CnnModel:
    """Ordered layer stack with parameters and Adam state.

    Training (`train`, `adam_step`) mutates the instance and needs external
    synchronization; `forward`/`predict_series` on a model nobody is training
    are pure and thread-safe.
    """

    def __init__(self, input_shape: tuple[int, int], layers: list, specs: list):
        self.input_shape = input_shape
        self.layers = layers
        self.specs = specs
        self.params = [p for layer in layers for p in layer.params]
        self.adam_m = [np.zeros_like(p) for p in self.params]
        self.adam_v = [np.zeros_like(p) for p in self.params]
        self.adam_t = 0

    @property
    def w(self) -> int:
        return self.input_shape[0]

    @property
    def channels(self) -> int:
        return self.input_shape[1]

    def forward(self, window: np.ndarray, training: bool = False, rng: Rng | None = None) -> np.ndarray:
        """Predict the next reading for one (w, C) window or a (B, w, C) batch."""
        x = np.asarray(window, dtype=np.float64)
        single = x.ndim == 2
        if single:
            x = x[None, :, :]
        if x.shape[1:] != self.input_shape:
            raise ValueError(
                f"window shape {x.shape[1:]} does not match model input {self.input_shape}"
            )
        for layer in self.layers:
            x, _ = layer.forward(x, training=training, rng=rng)
        if not np.all(np.isfinite(x)):
            raise FloatingPointError("non-finite forecaster output: parameters blew up")
        return x[0] if single else x

    def loss_and_grads(
        self,
        windows: np.ndarray,
        targets: np.ndarray,
        training: bool = False,
        rng: Rng | None = None,
    ) -> tuple[float, list[np.ndarray]]:
        """Batch MAE and its gradient for every parameter tensor.

        Dropout masks drawn in this forward pass are the ones backpropagated.
        """
        x = np.asarray(windows, dtype=np.float64)
        y = np.asarray(targets, dtype=np.float64)
        if x.ndim == 2:
            x, y = x[None], y[None]
        caches = []
        out = x
        for layer in self.layers:
            out, cache = layer.forward(out, training=training, rng=rng)
            caches.append(cache)
        if not np.all(np.isfinite(out)):
            raise FloatingPointError("non-finite forecaster output: parameters blew up")
        diff = out - y
        loss = float(np.mean(np.abs(diff)))
        # d mean|x| / dx, with the subgradient at 0 taken as 0
        dy = np.sign(diff) / diff.size
        grads: list[np.ndarray] = []
        for layer, cache in zip(reversed(self.layers), reversed(caches)):
            dy, param_grads = layer.backward(dy, cache)
            grads = param_grads + grads
        return loss, grads

    def copy_params(self) -> list[np.ndarray]:
        return [p.copy() for p in self.params]

    def set_params(self, snapshot: list[np.ndarray]) -> None:
        for p, s in zip(self.params, snapshot):
            p[...] = s


def build_model(w: int, channels: int, specs: list, seed: int = 0) -> CnnModel:
    """Assemble and initialize the stack, validating shape composition.

    Conv weights: Glorot-uniform in +-sqrt(6/(fan_in+fan_out)); biases zero.
    """
    if w < 1 or channels < 1:
        raise ShapeError("input shape must be positive")
    rng = Rng(derive_seed(seed))
    layers = []
    shape: tuple = (w, channels)
    for i, spec in enumerate(specs):
        where = f"layer {i} ({type(spec).__name__})"
        if isinstance(spec, Conv1DSpec):
            if len(shape) != 2:
                raise ShapeError(f"{where}: expects sequence input, got {shape}")
            layers.append(Conv1DLayer(spec, shape[0], shape[1], rng))
        elif isinstance(spec, MaxPool1DSpec):
            if len(shape) != 2:
                raise ShapeError(f"{where}: expects sequence input, got {shape}")
            if shape[0] % spec.pool != 0:
                raise ShapeError(
                    f"{where}: pool {spec.pool} does not divide length {shape[0]}"
                )
            layers.append(MaxPool1DLayer(spec, shape[0], shape[1]))
        elif isinstance(spec, FlattenSpec):
            if len(shape) != 2:
                raise ShapeError(f"{where}: expects sequence input, got {shape}")
            layers.append(FlattenLayer(spec, shape[0], shape[1]))
        elif isinstance(spec, DenseSpec):
            if len(shape) != 1:
                raise ShapeError(f"{where}: expects flattened input, got {shape}")
            layers.append(DenseLayer(spec, shape[0], rng))
        else:
            raise ShapeError(f"{where}: unknown layer spec")
        shape = layers[-1].out_shape
    if len(shape) != 1 or shape[0] != channels:
        raise ShapeError(
            f"final layer must emit {channels} units, stack emits {shape}"
        )
    last = specs[-1] if specs else None
    if not isinstance(last, DenseSpec) or last.activation != SIGMOID:
        raise ShapeError("final layer must be Dense with sigmoid activation")
    return CnnModel(input_shape=(w, channels), layers=layers, specs=list(specs))


def mae_loss(prediction: np.ndarray, target: np.ndarray) -> float:
    """Mean over channels of |prediction - target|."""
    p = np.asarray(prediction, dtype=np.float64)
    t = np.asarray(target, dtype=np.float64)
    if p.shape != t.shape:
        raise ValueError(f"shape mismatch: {p.shape} vs {t.shape}")
    return float(np.mean(np.abs(p - t)))


def backward(model: CnnModel, window: np.ndarray, target: np.ndarray) -> list[np.ndarray]:
    """Gradient of the MAE at one window/target pair, dropout off."""
    _, grads = model.loss_and_grads(window, target, training=False)
    return grads


def adam_step(model: CnnModel, grads: list[np.ndarray], learning_rate: float) -> None:
    """Standard bias-corrected Adam update; increments the step counter."""
    if len(grads) != len(model.params):
        raise ValueError("gradient list does not match parameter list")
    for g in grads:
        if not np.all(np.isfinite(g)):
            raise FloatingPointError("non-finite gradient passed to adam_step")
    model.adam_t += 1
    t = model.adam_t
    for p, g, m, v in zip(model.params, grads, model.adam_m, model.adam_v):
        m[...] = ADAM_BETA1 * m + (1.0 - ADAM_BETA1) * g
        v[...] = ADAM_BETA2 * v + (1.0 - ADAM_BETA2) * g * g
        m_hat = m / (1.0 - ADAM_BETA1**t)
        v_hat = v / (1.0 - ADAM_BETA2**t)
        p -= learning_rate * m_hat / (np.sqrt(v_hat) + ADAM_EPS)


def _batched_mae(model: CnnModel, inputs: np.ndarray, targets: np.ndarray) -> float:
    total = 0.0
    for lo in range(0, len(inputs), PREDICT_CHUNK):
        chunk = slice(lo, lo + PREDICT_CHUNK)
        pred = model.forward(inputs[chunk], training=False)
        total += float(np.sum(np.abs(pred - targets[chunk])))
    return total / (len(inputs) * targets.shape[1])


def train(model: CnnModel, batch: WindowBatch, config: TrainConfig) -> TrainHistory:
    """Seeded mini-batch training with time-ordered validation split.

    The trailing validation_fraction of windows monitors MAE; training stops
    once validation fails to improve for `early_stop_patience` consecutive
    epochs, and the best-epoch parameters are restored.
    """
    n = len(batch)
    if n == 0:
        raise ValueError("empty window batch")
    val_n = max(1, int(round(config.validation_fraction * n)))
    train_n = n - val_n
    if train_n < 1:
        raise ValueError("validation split leaves no training windows")
    train_x, train_y = batch.inputs[:train_n], batch.targets[:train_n]
    val_x, val_y = batch.inputs[train_n:], batch.targets[train_n:]

    rng = Rng(derive_seed(config.seed, 0xD0))
    stopper = EarlyStopper(config.early_stop_patience)
    history = TrainHistory()
    best_params = model.copy_params()
    order = np.arange(train_n)

    for _ in range(config.epochs):
        rng.shuffle(order)
        epoch_loss = 0.0
        for lo in range(0, train_n, config.batch_size):
            idx = order[lo : lo + config.batch_size]
            loss, grads = model.loss_and_grads(
                train_x[idx], train_y[idx], training=True, rng=rng
            )
            adam_step(model, grads, config.learning_rate)
            epoch_loss += loss * len(idx)
        history.train_loss.append(epoch_loss / train_n)

        val_loss = _batched_mae(model, val_x, val_y)
        if not np.isfinite(val_loss):
            raise FloatingPointError("training diverged: non-finite validation loss")
        history.val_loss.append(val_loss)
        if stopper.update(val_loss):
            best_params = model.copy_params()
        if stopper.should_stop:
            break

    model.set_params(best_params)
    return history


def predict_series(
    model: CnnModel, frame: TimeSeriesFrame, w: int | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """One next-step prediction per window of the frame, dropout disabled.

    predictions[i] forecasts the reading at absolute timestep
    target_indices[i].
    """
    w = model.w if w is None else w
    if w != model.w:
        raise ValueError(f"window {w} does not match model input {model.w}")
    batch = make_windows(frame, w)
    preds = np.empty((len(batch), model.channels))
    for lo in range(0, len(batch), PREDICT_CHUNK):
        chunk = slice(lo, lo + PREDICT_CHUNK)
        preds[chunk] = model.forward(batch.inputs[chunk], training=False)
    return preds, batch.target_indices


def _spec_to_dict(spec) -> dict:
    if isinstance(spec, Conv1DSpec):
        return {
            "kind": "conv1d",
            "filters": spec.filters,
            "kernel_size": spec.kernel_size,
            "activation": spec.activation,
        }
    if isinstance(spec, MaxPool1DSpec):
        return {"kind": "maxpool1d", "pool": spec.pool}
    if isinstance(spec, FlattenSpec):
        return {"kind": "flatten"}
    if isinstance(spec, DenseSpec):
        return {
            "kind": "dense",
            "units": spec.units,
            "activation": spec.activation,
            "dropout": spec.dropout,
        }
    raise ValueError(f"unknown spec {spec!r}")


def spec_from_dict(d: dict):
    kind = d["kind"]
    if kind == "conv1d":
        return Conv1DSpec(
            filters=d["filters"], kernel_size=d["kernel_size"], activation=d["activation"]
        )
    if kind == "maxpool1d":
        return MaxPool1DSpec(pool=d["pool"])
    if kind == "flatten":
        return FlattenSpec()
    if kind == "dense":
        return DenseSpec(units=d["units"], activation=d["activation"], dropout=d["dropout"])
    raise ValueError(f"unknown layer kind {kind!r}")


def model_state(model: CnnModel, schema: ChannelSchema | None = None) -> tuple[dict, dict]:
    """(json-safe metadata, array map) pair describing the model bit-exactly."""
    meta = {
        "format_version": FORMAT_VERSION,
        "input_shape": list(model.input_shape),
        "layer_specs": [_spec_to_dict(s) for s in model.specs],
        "adam_t": model.adam_t,
        "schema": None
        if schema is None
        else {"names": list(schema.names), "kinds": list(schema.kinds)},
    }
    arrays = {}
    for i, p in enumerate(model.params):
        arrays[f"param_{i}"] = p
        arrays[f"adam_m_{i}"] = model.adam_m[i]
        arrays[f"adam_v_{i}"] = model.adam_v[i]
    return meta, arrays


def model_from_state(meta: dict, arrays: dict) -> CnnModel:
    if meta.get("format_version") != FORMAT_VERSION:
        raise ValueError(f"unsupported model format version {meta.get('format_version')}")
    w, channels = meta["input_shape"]
    specs = [spec_from_dict(d) for d in meta["layer_specs"]]
    model = build_model(w, channels, specs, seed=0)
    for i in range(len(model.params)):
        model.params[i][...] = arrays[f"param_{i}"]
        model.adam_m[i][...] = arrays[f"adam_m_{i}"]
        model.adam_v[i][...] = arrays[f"adam_v_{i}"]
    model.adam_t = int(meta["adam_t"])
    return model


def save_model(model: CnnModel, path, schema: ChannelSchema | None = None) -> None:
    """Single-file .npz artifact: metadata plus exact parameter tensors."""
    meta, arrays = model_state(model, schema)
    np.savez(path, meta=np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8), **arrays)


def load_model(path) -> tuple[CnnModel, ChannelSchema | None]:
    with np.load(path) as data:
        meta = json.loads(bytes(data["meta"]))
        arrays = {k: data[k] for k in data.files if k != "meta"}
    model = model_from_state(meta, arrays)
    schema = None
    if meta.get("schema"):
        schema = ChannelSchema(
            names=tuple(meta["schema"]["names"]), kinds=tuple(meta["schema"]["kinds"])
        )
    return model, schema
