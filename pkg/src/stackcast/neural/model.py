"""Forecasting members: spec-driven model assembly, mini-batch training
with backprop through time, and blob+manifest serialization.

A member consumes windows shaped (samples, lookback, features) and emits
one value per window: a price for regression, a probability for
classification. Features (and regression targets) are z-scored with
statistics taken from the training windows; the statistics travel with
the trained model, so prediction always returns original units.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, asdict

import numpy as np

from ..exceptions import ConfigurationError, DivergenceError, ShapeError
from .layers import GRU, LSTM, AttentionEncoder, Dense, IndRNN
from .losses import LOSSES
from .optim import Adam

__all__ = ["ModelSpec", "SequenceModel", "TrainedModel", "train"]

KINDS = ("dense", "lstm", "gru", "indrnn", "transformer")
RECURRENT_KINDS = ("lstm", "gru", "indrnn")

# Loss explosion past this multiple of the first epoch's loss counts as
# divergence even while still finite.
_EXPLOSION_FACTOR = 1e8


@dataclass(frozen=True)
class ModelSpec:
    """Declarative description of one ensemble member.

    ``level_column``, when set for a regression member, names the feature
    index whose value at the window end anchors the target: the member
    learns the change relative to that level and adds it back when
    predicting. Prediction output is always the raw target value.
    """

    kind: str
    task: str = "regression"
    hidden: tuple = (64,)
    lookback: int = 30
    seed: int | None = None
    loss: str | None = None  # default: logcosh (regression) / bce (classification)
    probsparse: bool = False
    top_u: object = "auto"
    pe_base: float | None = None
    level_column: int | None = None
    name: str | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigurationError(f"unknown model kind '{self.kind}'; valid: {KINDS}")
        if self.task not in ("regression", "classification"):
            raise ConfigurationError(f"unknown task '{self.task}'")
        hidden = tuple(int(h) for h in self.hidden)
        if not hidden or any(h < 1 for h in hidden):
            raise ConfigurationError(f"hidden sizes must be positive, got {self.hidden}")
        object.__setattr__(self, "hidden", hidden)
        if self.lookback < 1:
            raise ConfigurationError(f"lookback must be >= 1, got {self.lookback}")
        if self.loss is not None and self.loss not in LOSSES:
            raise ConfigurationError(f"unknown loss '{self.loss}'")
        if self.level_column is not None and int(self.level_column) < 0:
            raise ConfigurationError(
                f"level_column must be a feature index, got {self.level_column}"
            )

    @property
    def loss_name(self) -> str:
        if self.loss is not None:
            return self.loss
        return "bce" if self.task == "classification" else "logcosh"

    @property
    def label(self) -> str:
        return self.name or self.kind

    def to_dict(self) -> dict:
        d = asdict(self)
        d["hidden"] = list(self.hidden)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelSpec":
        d = dict(d)
        d["hidden"] = tuple(d.get("hidden", (64,)))
        return cls(**d)


class SequenceModel:
    """A member network: body over the window, dense head to one output."""

    def __init__(self, spec: ModelSpec, n_features: int, rng: np.random.Generator):
        self.spec = spec
        self.n_features = n_features
        self.layers: list = []
        head_act = "sigmoid" if spec.task == "classification" else "identity"

        if spec.kind == "dense":
            width = spec.lookback * n_features
            for h in spec.hidden:
                self.layers.append(Dense(width, h, "relu"))
                width = h
        elif spec.kind in RECURRENT_KINDS:
            cls = {"lstm": LSTM, "gru": GRU, "indrnn": IndRNN}[spec.kind]
            width = n_features
            for h in spec.hidden:
                self.layers.append(cls(width, h))
                width = h
        else:  # transformer
            d_model = spec.hidden[0]
            self.layers.append(
                AttentionEncoder(
                    n_features,
                    d_model,
                    probsparse=spec.probsparse,
                    top_u=spec.top_u,
                    pe_base=spec.pe_base,
                )
            )
            width = d_model
            for h in spec.hidden[1:]:
                self.layers.append(Dense(width, h, "relu"))
                width = h
        self.head = Dense(width, 1, head_act)
        for layer in self.layers:
            layer.init(rng)
        self.head.init(rng)

    # -- parameter plumbing -------------------------------------------------

    def _named(self, attr: str) -> dict[str, np.ndarray]:
        out = {}
        for i, layer in enumerate(self.layers):
            for k, v in getattr(layer, attr).items():
                out[f"body{i}.{k}"] = v
        for k, v in getattr(self.head, attr).items():
            out[f"head.{k}"] = v
        return out

    def params(self) -> dict[str, np.ndarray]:
        return self._named("params")

    def grads(self) -> dict[str, np.ndarray]:
        return self._named("grads")

    def zero_grads(self):
        for layer in self.layers:
            layer.zero_grads()
        self.head.zero_grads()

    def load_params(self, named: dict[str, np.ndarray]):
        current = self.params()
        missing = set(current) - set(named)
        if missing:
            raise ConfigurationError(f"missing tensors: {sorted(missing)}")
        for key, value in current.items():
            if named[key].shape != value.shape:
                raise ShapeError(
                    f"tensor '{key}': stored shape {named[key].shape} != {value.shape}"
                )
            value[...] = named[key]

    # -- forward / backward --------------------------------------------------

    def _split_body(self):
        seq_layers = [l for l in self.layers if not isinstance(l, Dense)]
        flat_layers = [l for l in self.layers if isinstance(l, Dense)]
        return seq_layers, flat_layers

    def forward(self, windows: np.ndarray) -> np.ndarray:
        if windows.ndim != 3 or windows.shape[1] != self.spec.lookback:
            raise ShapeError(
                f"expected windows (samples, {self.spec.lookback}, {self.n_features}), "
                f"got {windows.shape}"
            )
        if self.spec.kind == "dense":
            h = windows.reshape(windows.shape[0], -1)
            for layer in self.layers:
                h = layer.forward(h)
        else:
            seq_layers, flat_layers = self._split_body()
            seq = windows
            for layer in seq_layers:
                seq = layer.forward(seq)
            self._last_seq_shape = seq.shape
            h = seq[:, -1, :]
            for layer in flat_layers:
                h = layer.forward(h)
        return self.head.forward(h)[:, 0]

    def backward(self, d_pred: np.ndarray):
        d_h = self.head.backward(d_pred[:, None])
        if self.spec.kind == "dense":
            for layer in reversed(self.layers):
                d_h = layer.backward(d_h)
            return
        seq_layers, flat_layers = self._split_body()
        for layer in reversed(flat_layers):
            d_h = layer.backward(d_h)
        # the head only read the last timestep of the final sequence output
        d_seq = np.zeros(self._last_seq_shape)
        d_seq[:, -1, :] = d_h
        for layer in reversed(seq_layers):
            d_seq = layer.backward(d_seq)

    @property
    def is_recurrent(self) -> bool:
        return self.spec.kind in RECURRENT_KINDS


def _level_anchor(spec: ModelSpec, windows: np.ndarray) -> np.ndarray:
    """Window-end level the regression target is expressed against."""
    if spec.task != "regression" or spec.level_column is None:
        return np.zeros(windows.shape[0])
    col = int(spec.level_column)
    if col >= windows.shape[2]:
        raise ShapeError(
            f"level_column {col} out of range for {windows.shape[2]} features"
        )
    return windows[:, -1, col]


def _clip_gradients(grads: dict[str, np.ndarray], max_norm: float):
    total = np.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))
    if total > max_norm > 0:
        scale = max_norm / total
        for g in grads.values():
            g *= scale


@dataclass
class TrainedModel:
    """A fitted member plus the scaling statistics it was trained with."""

    spec: ModelSpec
    model: SequenceModel
    x_mean: np.ndarray
    x_std: np.ndarray
    y_mean: float
    y_std: float
    loss_history: list = field(default_factory=list)
    seed: int = 0

    def predict(self, windows: np.ndarray) -> np.ndarray:
        windows = np.asarray(windows, dtype=np.float64)
        scaled = (windows - self.x_mean) / self.x_std
        preds = []
        for start in range(0, scaled.shape[0], 512):
            preds.append(self.model.forward(scaled[start : start + 512]))
        out = np.concatenate(preds) if preds else np.empty(0)
        if self.spec.task == "regression":
            out = out * self.y_std + self.y_mean
            out = out + _level_anchor(self.spec, windows)
        return out

    # -- serialization: JSON manifest + little-endian float64 blob ----------

    def _tensors(self) -> dict[str, np.ndarray]:
        named = dict(self.model.params())
        named["scale.x_mean"] = self.x_mean
        named["scale.x_std"] = self.x_std
        named["scale.y"] = np.array([self.y_mean, self.y_std])
        return named

    def save(self, directory: str, name: str):
        os.makedirs(directory, exist_ok=True)
        index = []
        offset = 0
        blob = bytearray()
        for tensor_name, value in self._tensors().items():
            raw = np.ascontiguousarray(value, dtype="<f8").tobytes()
            index.append(
                {"name": tensor_name, "shape": list(value.shape), "offset": offset}
            )
            blob.extend(raw)
            offset += len(raw)
        manifest = {
            "spec": self.spec.to_dict(),
            "seed": self.seed,
            "n_features": self.model.n_features,
            "loss_history": [float(v) for v in self.loss_history],
            "tensors": index,
        }
        with open(os.path.join(directory, f"{name}.json"), "w") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
        with open(os.path.join(directory, f"{name}.bin"), "wb") as fh:
            fh.write(bytes(blob))

    @classmethod
    def load(cls, directory: str, name: str) -> "TrainedModel":
        with open(os.path.join(directory, f"{name}.json")) as fh:
            manifest = json.load(fh)
        with open(os.path.join(directory, f"{name}.bin"), "rb") as fh:
            blob = fh.read()
        named = {}
        for entry in manifest["tensors"]:
            shape = tuple(entry["shape"])
            count = int(np.prod(shape)) if shape else 1
            start = entry["offset"]
            arr = np.frombuffer(blob, dtype="<f8", count=count, offset=start)
            named[entry["name"]] = arr.reshape(shape).astype(np.float64)
        spec = ModelSpec.from_dict(manifest["spec"])
        model = SequenceModel(spec, manifest["n_features"], np.random.default_rng(0))
        scale_y = named.pop("scale.y")
        x_mean = named.pop("scale.x_mean")
        x_std = named.pop("scale.x_std")
        model.load_params(named)
        return cls(
            spec=spec,
            model=model,
            x_mean=x_mean,
            x_std=x_std,
            y_mean=float(scale_y[0]),
            y_std=float(scale_y[1]),
            loss_history=list(manifest["loss_history"]),
            seed=manifest["seed"],
        )


def train(
    spec: ModelSpec,
    windows: np.ndarray,
    targets: np.ndarray,
    epochs: int = 100,
    batch: int = 64,
    lr: float = 0.001,
    seed: int = 0,
    clip_norm: float = 5.0,
) -> TrainedModel:
    """Mini-batch train one member with Adam.

    Recurrent members are fully unrolled over the lookback window and
    their gradients clipped to ``clip_norm`` in global L2 norm. A
    non-finite or exploding loss raises :class:`DivergenceError` naming
    the epoch. ``epochs=0`` returns the initialized model untouched.
    """
    windows = np.asarray(windows, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64).ravel()
    if windows.ndim != 3:
        raise ShapeError(f"windows must be (samples, lookback, features), got {windows.shape}")
    if windows.shape[0] != targets.size:
        raise ShapeError(
            f"{windows.shape[0]} windows for {targets.size} targets"
        )
    if windows.shape[1] != spec.lookback:
        raise ShapeError(
            f"windows have lookback {windows.shape[1]}, spec wants {spec.lookback}"
        )
    if batch < 1:
        raise ConfigurationError(f"batch size must be >= 1, got {batch}")
    if epochs < 0:
        raise ConfigurationError(f"epochs must be >= 0, got {epochs}")

    member_seed = spec.seed if spec.seed is not None else seed
    rng = np.random.default_rng(member_seed)
    n_features = windows.shape[2]

    x_mean = windows.mean(axis=(0, 1))
    x_std = windows.std(axis=(0, 1))
    x_std[x_std == 0.0] = 1.0
    if spec.task == "regression":
        targets = targets - _level_anchor(spec, windows)
        y_mean, y_std = float(targets.mean()), float(targets.std())
        if y_std == 0.0:
            y_std = 1.0
    else:
        y_mean, y_std = 0.0, 1.0

    model = SequenceModel(spec, n_features, rng)
    fitted = TrainedModel(
        spec=spec,
        model=model,
        x_mean=x_mean,
        x_std=x_std,
        y_mean=y_mean,
        y_std=y_std,
        loss_history=[],
        seed=member_seed,
    )
    if epochs == 0:
        return fitted

    x_scaled = (windows - x_mean) / x_std
    y_scaled = (targets - y_mean) / y_std
    loss_fn = LOSSES[spec.loss_name]
    adam = Adam(lr=lr)
    n = windows.shape[0]

    ceiling = None  # set from the very first batch, before any update
    for epoch in range(epochs):
        perm = rng.permutation(n)
        batch_losses = []
        for start in range(0, n, batch):
            idx = perm[start : start + batch]
            pred = model.forward(x_scaled[idx])
            loss, d_pred = loss_fn(pred, y_scaled[idx])
            if ceiling is None:
                ceiling = _EXPLOSION_FACTOR * (loss + 1.0)
            if not np.isfinite(loss) or loss > ceiling:
                raise DivergenceError(
                    f"member '{spec.label}' diverged at epoch {epoch}: loss={loss:.3e}"
                )
            model.zero_grads()
            model.backward(d_pred)
            if model.is_recurrent and clip_norm:
                _clip_gradients(model.grads(), clip_norm)
            adam.step(model.params(), model.grads())
            batch_losses.append(loss)
        fitted.loss_history.append(float(np.mean(batch_losses)))
    return fitted
