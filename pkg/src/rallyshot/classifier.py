"""Shot classification over per-frame backbone features.

A two-layer transformer encoder (multi-head self-attention, add & norm,
feed-forward, add & norm) with fixed sinusoidal positional encodings reads the
15 per-frame feature vectors of a segment, mean-pools over time, and maps to a
shot probability. One model per court side, trained with cross-entropy on a
stratified 7:3 split while the backbone stays frozen.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np

from .backbone import BackboneModel, EpochLog, _clone_values, _restore_values
from .court import Side
from .errors import ConfigError, DataError, ShapeError
from .evaluate import Confusion, Metrics, metrics
from .nn import (
    AdamState,
    LayerNorm,
    Linear,
    Parameter,
    ReLU,
    adam_step,
    attention_backward,
    attention_forward,
    cross_entropy,
    softmax,
)
from .pose import SEGMENT_LEN, Label, PoseSegment


@dataclass(frozen=True)
class ClassifierConfig:
    layers: int = 2
    model_dim: int = 64
    heads: int = 4
    ff_dim: int = 128
    train_fraction: float = 0.7
    use_positions: bool = True
    patience: int = 15
    max_epochs: int = 500
    lr: float = 1e-3
    seed: int = 0

    def __post_init__(self):
        if self.layers != 2:
            raise ConfigError("the classifier uses exactly two encoder layers")
        if self.model_dim % self.heads != 0:
            raise ConfigError(f"heads ({self.heads}) must divide model_dim ({self.model_dim})")
        if not 0.0 < self.train_fraction < 1.0:
            raise ConfigError("train_fraction must lie in (0, 1)")

    def arch(self) -> dict:
        return {"layers": self.layers, "model_dim": self.model_dim, "heads": self.heads,
                "ff_dim": self.ff_dim, "use_positions": self.use_positions}


def sinusoidal_positions(t: int, d: int) -> np.ndarray:
    pos = np.arange(t)[:, None]
    i = np.arange(d // 2)[None, :]
    angles = pos / np.power(10000.0, 2.0 * i / d)
    pe = np.zeros((t, d))
    pe[:, 0::2] = np.sin(angles)
    pe[:, 1::2] = np.cos(angles)
    return pe


class _SelfAttention:
    """Multi-head self-attention with input/output projections."""

    def __init__(self, d: int, heads: int, rng: np.random.Generator, name: str):
        self.d, self.heads = d, heads
        self.wq = Linear(d, d, rng, f"{name}.wq")
        self.wk = Linear(d, d, rng, f"{name}.wk")
        self.wv = Linear(d, d, rng, f"{name}.wv")
        self.wo = Linear(d, d, rng, f"{name}.wo")
        self._cache = None

    def _split(self, x: np.ndarray) -> np.ndarray:
        b, t, d = x.shape
        return x.reshape(b, t, self.heads, d // self.heads).transpose(0, 2, 1, 3)

    def _merge(self, x: np.ndarray) -> np.ndarray:
        b, h, t, dh = x.shape
        return x.transpose(0, 2, 1, 3).reshape(b, t, h * dh)

    def forward(self, x: np.ndarray) -> np.ndarray:
        q = self._split(self.wq.forward(x))
        k = self._split(self.wk.forward(x))
        v = self._split(self.wv.forward(x))
        out, att_cache = attention_forward(q, k, v)
        self._cache = att_cache
        return self.wo.forward(self._merge(out))

    def backward(self, dy: np.ndarray) -> np.ndarray:
        d_merged = self.wo.backward(dy)
        d_out = self._split(d_merged)
        dq, dk, dv = attention_backward(d_out, self._cache)
        dx = self.wq.backward(self._merge(dq))
        dx = dx + self.wk.backward(self._merge(dk))
        dx = dx + self.wv.backward(self._merge(dv))
        return dx

    def params(self) -> list[Parameter]:
        return self.wq.params() + self.wk.params() + self.wv.params() + self.wo.params()


class _EncoderLayer:
    def __init__(self, d: int, heads: int, ff_dim: int, rng: np.random.Generator, name: str):
        self.attn = _SelfAttention(d, heads, rng, f"{name}.attn")
        self.ln1 = LayerNorm(d, f"{name}.ln1")
        self.ff1 = Linear(d, ff_dim, rng, f"{name}.ff1")
        self.relu = ReLU()
        self.ff2 = Linear(ff_dim, d, rng, f"{name}.ff2")
        self.ln2 = LayerNorm(d, f"{name}.ln2")

    def forward(self, x: np.ndarray) -> np.ndarray:
        h = self.ln1.forward(x + self.attn.forward(x))
        return self.ln2.forward(h + self.ff2.forward(self.relu.forward(self.ff1.forward(h))))

    def backward(self, dy: np.ndarray) -> np.ndarray:
        dh = self.ln2.backward(dy)
        dh = dh + self.ff1.backward(self.relu.backward(self.ff2.backward(dh)))
        dx = self.ln1.backward(dh)
        return dx + self.attn.backward(dx)

    def params(self) -> list[Parameter]:
        return (self.attn.params() + self.ln1.params() + self.ff1.params()
                + self.ff2.params() + self.ln2.params())


class ClassifierModel:
    def __init__(self, cfg: ClassifierConfig):
        self.cfg = cfg
        rng = np.random.default_rng(cfg.seed)
        self.encoder = [
            _EncoderLayer(cfg.model_dim, cfg.heads, cfg.ff_dim, rng, f"enc{i}")
            for i in range(cfg.layers)
        ]
        self.head = Linear(cfg.model_dim, 2, rng, "head")
        self._pe = sinusoidal_positions(SEGMENT_LEN, cfg.model_dim)
        self._t = None

    def params(self) -> list[Parameter]:
        out: list[Parameter] = []
        for layer in self.encoder:
            out += layer.params()
        return out + self.head.params()

    def zero_grad(self) -> None:
        for p in self.params():
            p.zero_grad()

    def logits(self, features: np.ndarray) -> np.ndarray:
        if features.ndim == 2:
            features = features[None]
        if features.ndim != 3 or features.shape[2] != self.cfg.model_dim:
            raise ShapeError(f"expected (B, T, {self.cfg.model_dim}) features, "
                             f"got {features.shape}")
        self._t = features.shape[1]
        h = features + (self._pe[:self._t] if self.cfg.use_positions else 0.0)
        for layer in self.encoder:
            h = layer.forward(h)
        return self.head.forward(h.mean(axis=1))

    def backward(self, d_logits: np.ndarray) -> None:
        dpool = self.head.backward(d_logits)
        dh = np.repeat(dpool[:, None, :], self._t, axis=1) / self._t
        for layer in reversed(self.encoder):
            dh = layer.backward(dh)

    def classify(self, features: np.ndarray) -> np.ndarray:
        """Shot probability per segment, in [0, 1]."""
        return softmax(self.logits(features), axis=-1)[:, 1]


def stratified_split(labels: Sequence[int], train_fraction: float,
                     seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Deterministic per-class split; returns (train indices, test indices)."""
    labels = np.asarray(labels)
    rng = np.random.default_rng(seed)
    train, test = [], []
    for cls in sorted(set(labels.tolist())):
        idx = np.flatnonzero(labels == cls)
        idx = idx[rng.permutation(len(idx))]
        n_train = int(round(train_fraction * len(idx)))
        train.extend(idx[:n_train].tolist())
        test.extend(idx[n_train:].tolist())
    return np.array(sorted(train)), np.array(sorted(test))


@dataclass
class TrainResult:
    model: ClassifierModel
    test_metrics: Metrics
    log: list[EpochLog] = field(default_factory=list)
    best_epoch: int = 0
    train_indices: np.ndarray | None = None
    test_indices: np.ndarray | None = None


def extract_features(backbone: BackboneModel, segments: Sequence[PoseSegment]) -> np.ndarray:
    """Frozen per-frame features for a segment list: (N, 15, 64)."""
    x = np.stack([seg.frames for seg in segments])
    frame_feats, _ = backbone.encode(x)
    return frame_feats


def train_classifier_side(segments: Sequence[PoseSegment], backbone: BackboneModel,
                          cfg: ClassifierConfig, side: Side) -> TrainResult:
    """Full-batch Adam on cross-entropy with early stopping on the held-out
    loss; the backbone is a frozen feature extractor."""
    if len(segments) < 10:
        raise DataError(f"side {side.value}: need at least 10 segments, got {len(segments)}")
    labels = np.array([seg.label.value for seg in segments])
    train_idx, test_idx = stratified_split(labels, cfg.train_fraction, cfg.seed)
    if len(set(labels[train_idx].tolist())) < 2:
        raise DataError(f"side {side.value}: a class is absent from the training split")
    if len(test_idx) == 0:
        raise DataError(f"side {side.value}: test split is empty")

    features = extract_features(backbone, segments)
    x_train, y_train = features[train_idx], labels[train_idx]
    x_test, y_test = features[test_idx], labels[test_idx]

    model = ClassifierModel(replace(cfg, seed=cfg.seed + (0 if side is Side.FRONT else 1)))
    params = model.params()
    state = AdamState()

    best_loss = np.inf
    best_epoch = 0
    best_values = _clone_values(params)
    log: list[EpochLog] = []
    t0 = time.perf_counter()

    for epoch in range(1, cfg.max_epochs + 1):
        model.zero_grad()
        loss, d_logits = cross_entropy(model.logits(x_train), y_train)
        model.backward(d_logits)
        adam_step(params, state, cfg.lr)

        test_loss, _ = cross_entropy(model.logits(x_test), y_test)
        if test_loss < best_loss:
            best_loss = test_loss
            best_epoch = epoch
            best_values = _clone_values(params)
        log.append(EpochLog(epoch=epoch, loss=test_loss, best_loss=best_loss,
                            elapsed=time.perf_counter() - t0))
        if epoch - best_epoch >= cfg.patience:
            break

    _restore_values(params, best_values)
    conf = confusion_at(model.classify(x_test), y_test == Label.SHOT.value, 0.5)
    return TrainResult(model=model, test_metrics=metrics(conf), log=log,
                       best_epoch=best_epoch, train_indices=train_idx, test_indices=test_idx)


def train_classifier(segments_by_side: Mapping[Side, Sequence[PoseSegment]],
                     backbones: Mapping[Side, BackboneModel],
                     cfg: ClassifierConfig) -> dict[Side, TrainResult]:
    results: dict[Side, TrainResult] = {}
    for side in (Side.FRONT, Side.BACK):
        segs = segments_by_side.get(side, [])
        if not segs:
            raise DataError(f"no segments for side {side.value!r}")
        results[side] = train_classifier_side(segs, backbones[side], cfg, side)
    return results


def save_classifier(path, model: ClassifierModel, cfg_hash: str) -> None:
    from .nn import save_checkpoint
    save_checkpoint(path, model.params(), model.cfg.arch(), cfg_hash)


def load_classifier(path) -> ClassifierModel:
    from .nn import load_checkpoint, restore
    table, sidecar = load_checkpoint(path)
    arch = sidecar["arch"]
    cfg = ClassifierConfig(layers=arch["layers"], model_dim=arch["model_dim"],
                           heads=arch["heads"], ff_dim=arch["ff_dim"],
                           use_positions=arch["use_positions"])
    model = ClassifierModel(cfg)
    restore(model.params(), table)
    return model


# --- threshold sweep ---------------------------------------------------------

def confusion_at(confidences: np.ndarray, truths: np.ndarray, threshold: float) -> Confusion:
    pred = np.asarray(confidences) >= threshold
    truth = np.asarray(truths, dtype=bool)
    return Confusion(
        tp=int(np.sum(pred & truth)),
        fp=int(np.sum(pred & ~truth)),
        tn=int(np.sum(~pred & ~truth)),
        fn=int(np.sum(~pred & truth)),
    )


@dataclass(frozen=True)
class SweepRow:
    threshold: float
    accuracy: float
    precision: float
    recall: float
    f1: float


def sweep_threshold(confidences: np.ndarray, truths: np.ndarray,
                    step: float = 0.01) -> tuple[list[SweepRow], SweepRow]:
    """Metrics over a threshold grid in (0, 1); the optimum maximizes accuracy,
    breaking ties by higher F1 and then lower threshold."""
    confidences = np.asarray(confidences, dtype=np.float64)
    truths = np.asarray(truths, dtype=bool)
    if confidences.size == 0:
        raise DataError("cannot sweep an empty score set")
    if not 0.0 < step < 1.0:
        raise ConfigError(f"sweep step must lie in (0, 1), got {step}")
    n_steps = int(round(1.0 / step)) - 1
    rows: list[SweepRow] = []
    best: SweepRow | None = None
    for i in range(1, n_steps + 1):
        theta = i * step
        m = metrics(confusion_at(confidences, truths, theta))
        row = SweepRow(threshold=theta, accuracy=m.accuracy, precision=m.precision,
                       recall=m.recall, f1=m.f1)
        rows.append(row)
        if best is None or (row.accuracy, row.f1, -row.threshold) > \
                (best.accuracy, best.f1, -best.threshold):
            best = row
    return rows, best
