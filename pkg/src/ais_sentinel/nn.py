"""Three-layer perceptron classifier trained with Adam, written against numpy.

Hidden units compute ``h_j = relu(sum_i x_i w_ij - b_j)``: the hidden
threshold is subtracted.  The output layer adds its bias ``b2`` and feeds a
softmax.  All arithmetic is float64.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import kernels
from .errors import (
    CorruptModelFile,
    DimensionMismatch,
    NonFiniteLoss,
    SchemaVersionMismatch,
    SingleClassDataset,
    ValidationError,
)

SCHEMA_VERSION = 1
LOG_EPS = 1e-12
LR_DECAY = 5.0
LR_PATIENCE = 2


@dataclass
class MlpModel:
    W1: np.ndarray  # (n, m)
    b1: np.ndarray  # (m,) hidden thresholds, subtracted
    W2: np.ndarray  # (m, K)
    b2: np.ndarray  # (K,)
    class_names: tuple[str, ...] = ()
    scaler: dict | None = None
    prep_config: dict | None = None
    train_config: dict | None = None

    @property
    def n(self) -> int:
        return self.W1.shape[0]

    @property
    def m(self) -> int:
        return self.W1.shape[1]

    @property
    def K(self) -> int:
        return self.W2.shape[1]

    @classmethod
    def zeros(cls, n: int, m: int, K: int) -> "MlpModel":
        return cls(np.zeros((n, m)), np.zeros(m), np.zeros((m, K)), np.zeros(K))

    @classmethod
    def glorot(cls, n: int, m: int, K: int, rng: np.random.Generator) -> "MlpModel":
        lim1 = math.sqrt(6.0 / (n + m))
        lim2 = math.sqrt(6.0 / (m + K))
        return cls(
            W1=rng.uniform(-lim1, lim1, (n, m)),
            b1=np.zeros(m),
            W2=rng.uniform(-lim2, lim2, (m, K)),
            b2=np.zeros(K),
        )

    def params(self) -> dict[str, np.ndarray]:
        return {"W1": self.W1, "b1": self.b1, "W2": self.W2, "b2": self.b2}

    def copy(self) -> "MlpModel":
        return MlpModel(self.W1.copy(), self.b1.copy(), self.W2.copy(), self.b2.copy(),
                        self.class_names, self.scaler, self.prep_config, self.train_config)


def _as_batch(model: MlpModel, x) -> np.ndarray:
    X = np.asarray(x, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != model.n:
        raise DimensionMismatch(f"model expects {model.n} inputs, got shape {X.shape}")
    return X


def softmax(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    shifted = z - z.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def forward(model: MlpModel, x) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(hidden, probs)``; 1-D input gives 1-D outputs."""
    single = np.ndim(x) == 1
    X = _as_batch(model, x)
    H = np.maximum(X @ model.W1 - model.b1, 0.0)
    P = softmax(H @ model.W2 + model.b2)
    return (H[0], P[0]) if single else (H, P)


def _onehot(y, K: int) -> np.ndarray:
    y = np.asarray(y)
    if y.ndim == 2:
        if y.shape[1] != K:
            raise DimensionMismatch(f"one-hot labels have {y.shape[1]} columns, model has {K}")
        return y.astype(np.float64)
    if y.size and (y.min() < 0 or y.max() >= K):
        raise DimensionMismatch("class index outside the model's output range")
    out = np.zeros((len(y), K))
    out[np.arange(len(y)), y.astype(np.int64)] = 1.0
    return out


def _l2(model: MlpModel) -> float:
    return float(np.sum(model.W1 * model.W1) + np.sum(model.W2 * model.W2))


def loss(model: MlpModel, X, y, l2_alpha: float = 1e-4) -> float:
    """Mean cross-entropy plus ``l2_alpha / (2 * batch)`` times the squared weights."""
    X = _as_batch(model, X)
    Y = _onehot(y, model.K)
    if len(Y) != len(X):
        raise DimensionMismatch("rows and labels differ in length")
    _, P = forward(model, X)
    ce = -np.sum(Y * np.log(P + LOG_EPS)) / len(X)
    return float(ce + l2_alpha / (2.0 * len(X)) * _l2(model))


def _loss_and_grads(model: MlpModel, X: np.ndarray, Y: np.ndarray, l2_alpha: float):
    n = len(X)
    Z = X @ model.W1
    Z -= model.b1
    H = np.maximum(Z, 0.0)
    P = H @ model.W2
    P += model.b2
    ce = kernels.softmax_xent(P, Y, LOG_EPS)  # P now holds probabilities
    value = ce / n + l2_alpha / (2.0 * n) * _l2(model)

    D2 = (P - Y) / n
    gW2 = H.T @ D2
    gW2 += (l2_alpha / n) * model.W2
    gb2 = D2.sum(axis=0)
    D1 = D2 @ model.W2.T
    D1[Z <= 0.0] = 0.0
    gW1 = X.T @ D1
    gW1 += (l2_alpha / n) * model.W1
    gb1 = -D1.sum(axis=0)
    return value, {"W1": gW1, "b1": gb1, "W2": gW2, "b2": gb2}


def backward(model: MlpModel, X, y, l2_alpha: float = 1e-4) -> dict[str, np.ndarray]:
    """Analytic gradients of :func:`loss` with respect to W1, b1, W2, b2."""
    X = _as_batch(model, X)
    Y = _onehot(y, model.K)
    if len(Y) != len(X):
        raise DimensionMismatch("rows and labels differ in length")
    return _loss_and_grads(model, X, Y, l2_alpha)[1]


@dataclass
class AdamState:
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_step(state: AdamState, params: dict[str, np.ndarray], grads: dict[str, np.ndarray],
              lr: float) -> None:
    """One bias-corrected Adam update, applied to ``params`` in place."""
    state.t += 1
    for name, p in params.items():
        if name not in state.m:
            state.m[name] = np.zeros_like(p)
            state.v[name] = np.zeros_like(p)
        kernels.adam_update(p, np.ascontiguousarray(grads[name]), state.m[name], state.v[name],
                            lr, state.beta1, state.beta2, state.eps, state.t)


@dataclass(frozen=True)
class TrainConfig:
    lr0: float = 1e-3
    schedule: str = "adaptive"
    tol: float = 1e-5
    n_iter_no_change: int = 10
    max_epochs: int = 200
    batch_size: int = 200
    l2_alpha: float = 1e-4
    hidden: int = 100
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if not self.lr0 > 0 or self.tol < 0 or self.max_epochs < 1 or self.batch_size < 1:
            raise ValidationError("invalid training configuration")
        if self.schedule not in ("adaptive", "constant"):
            raise ValidationError(f"unknown schedule {self.schedule!r}")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValidationError(f"unknown training settings: {sorted(unknown)}")
        return cls(**d)


@dataclass
class TrainReport:
    losses: list[float]
    epochs_run: int
    converged: bool
    wall_time_s: float
    train_s_per_1000: float
    final_loss: float
    final_lr: float
    n_rows: int
    config: dict

    def as_dict(self, timing: bool = True) -> dict:
        d = asdict(self)
        if not timing:
            d.pop("wall_time_s")
            d.pop("train_s_per_1000")
        return d


def fit(X: np.ndarray, y: np.ndarray, n_classes: int, config: TrainConfig = TrainConfig()
        ) -> tuple[MlpModel, TrainReport]:
    """Train on already-scaled rows ``X`` with integer labels ``y``."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2 or len(X) != len(y) or len(X) == 0:
        raise DimensionMismatch("training rows and labels must be non-empty and aligned")
    if len(np.unique(y)) < 2:
        raise SingleClassDataset("training data holds a single class")
    rng = np.random.default_rng(config.seed)
    model = MlpModel.glorot(X.shape[1], config.hidden, n_classes, rng)
    Y = _onehot(y, n_classes)
    state = AdamState(config.beta1, config.beta2, config.eps)
    params = model.params()
    batch = min(config.batch_size, len(X))
    lr = config.lr0
    losses: list[float] = []
    best = np.inf
    stale = 0
    converged = False

    start = time.perf_counter()
    for _epoch in range(config.max_epochs):
        order = rng.permutation(len(X))
        total = 0.0
        for lo in range(0, len(X), batch):
            idx = order[lo:lo + batch]
            value, grads = _loss_and_grads(model, X[idx], Y[idx], config.l2_alpha)
            adam_step(state, params, grads, lr)
            total += value * len(idx)
        epoch_loss = total / len(X)
        if not math.isfinite(epoch_loss):
            raise NonFiniteLoss(f"loss became {epoch_loss} in epoch {len(losses) + 1}")
        losses.append(epoch_loss)

        if epoch_loss > best - config.tol:
            stale += 1
        else:
            stale = 0
        best = min(best, epoch_loss)
        if stale >= config.n_iter_no_change:
            converged = True
            break
        if config.schedule == "adaptive" and stale and stale % LR_PATIENCE == 0:
            lr /= LR_DECAY
    wall = time.perf_counter() - start

    model.train_config = config.to_dict()
    report = TrainReport(
        losses=losses,
        epochs_run=len(losses),
        converged=converged,
        wall_time_s=wall,
        train_s_per_1000=wall / len(X) * 1000.0,
        final_loss=losses[-1],
        final_lr=lr,
        n_rows=len(X),
        config=config.to_dict(),
    )
    return model, report


def train(dataset, config: TrainConfig = TrainConfig()) -> tuple[MlpModel, TrainReport]:
    """Train on a :class:`pipeline.Dataset`; the model carries its scaler and prep settings."""
    model, report = fit(dataset.feature_matrix, dataset.labels, len(dataset.class_names), config)
    model.class_names = tuple(dataset.class_names)
    model.scaler = dataset.scaler.to_dict()
    model.prep_config = dataset.cfg.to_dict()
    return model, report


def predict_proba(model: MlpModel, rows) -> np.ndarray:
    return forward(model, _as_batch(model, rows))[1]


def predict(model: MlpModel, rows) -> tuple[np.ndarray, np.ndarray]:
    """Argmax class per row (ties go to the lowest index) and the probability rows."""
    P = predict_proba(model, rows)
    return np.argmax(P, axis=1), P


# --------------------------------------------------------------------------
# persistence


def model_to_dict(model: MlpModel) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "n": model.n,
        "m": model.m,
        "K": model.K,
        "class_names": list(model.class_names),
        "scaler": model.scaler,
        "prep_config": model.prep_config,
        "W1": model.W1.tolist(),
        "b1": model.b1.tolist(),
        "W2": model.W2.tolist(),
        "b2": model.b2.tolist(),
        "train_config_echo": model.train_config,
    }


def save_model(model: MlpModel, path) -> None:
    with open(path, "w") as fh:
        json.dump(model_to_dict(model), fh, separators=(",", ":"), sort_keys=True)
        fh.write("\n")


def model_from_dict(doc: dict) -> MlpModel:
    if not isinstance(doc, dict) or "schema_version" not in doc:
        raise CorruptModelFile("model document lacks schema_version")
    if doc["schema_version"] != SCHEMA_VERSION:
        raise SchemaVersionMismatch(
            f"model schema {doc['schema_version']!r}, this build reads {SCHEMA_VERSION}"
        )
    try:
        n, m, K = int(doc["n"]), int(doc["m"]), int(doc["K"])
        W1 = np.asarray(doc["W1"], dtype=np.float64)
        b1 = np.asarray(doc["b1"], dtype=np.float64)
        W2 = np.asarray(doc["W2"], dtype=np.float64)
        b2 = np.asarray(doc["b2"], dtype=np.float64)
        names = tuple(doc["class_names"])
    except (KeyError, TypeError, ValueError) as exc:
        raise CorruptModelFile(f"model document is incomplete: {exc}") from None
    if W1.shape != (n, m) or b1.shape != (m,) or W2.shape != (m, K) or b2.shape != (K,):
        raise CorruptModelFile("weight shapes disagree with n, m, K")
    if len(names) != K:
        raise CorruptModelFile("class_names length differs from K")
    if not all(np.isfinite(a).all() for a in (W1, b1, W2, b2)):
        raise CorruptModelFile("non-finite weights")
    return MlpModel(W1, b1, W2, b2, names, doc.get("scaler"), doc.get("prep_config"),
                    doc.get("train_config_echo"))


def load_model(path) -> MlpModel:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise CorruptModelFile(f"{path}: {exc}") from None
    except UnicodeDecodeError as exc:
        raise CorruptModelFile(f"{path}: {exc}") from None
    return model_from_dict(doc)
