"""Skeleton-sequence encoder and its contrastive pretraining.

Four residual blocks, each pairing graph convolution over the joint skeleton
with temporal convolution over frames, feed a per-frame linear projection into
a 64-dimensional embedding space. Pretraining pulls two augmented views of the
same segment together under the normalized-temperature cross-entropy (NT-Xent)
loss, one model per court side.
"""

from __future__ import annotations

import copy
import time
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np

from .court import Side
from .errors import ConfigError, DataError, DegenerateEmbeddingError, ShapeError
from .nn import (
    AdamState,
    GraphConv,
    LayerNorm,
    Linear,
    Parameter,
    ReLU,
    SkeletonGraph,
    TemporalConv,
    adam_step,
)
from .pose import JITTER_MAX, SEGMENT_LEN, PoseSegment

EMBED_DIM = 64
N_BLOCKS = 4


@dataclass(frozen=True)
class BackboneConfig:
    channels: tuple[int, ...] = (2, 16, 32, 64, 64)
    temporal_kernel: int = 9
    embed_dim: int = EMBED_DIM
    temperature: float = 0.1
    batch_pairs: int = 32
    patience: int = 15
    max_epochs: int = 500
    lr: float = 1e-3
    noise_sigma: float = 0.05
    jitter_max: int = JITTER_MAX
    seed: int = 0

    def __post_init__(self):
        if len(self.channels) != N_BLOCKS + 1:
            raise ConfigError(f"channel plan must list {N_BLOCKS + 1} widths, "
                              f"got {self.channels}")
        if self.temperature <= 0:
            raise ConfigError("temperature must be positive")
        if self.patience < 1 or self.max_epochs < 1 or self.batch_pairs < 1:
            raise ConfigError("patience, max_epochs, and batch_pairs must be >= 1")

    def arch(self) -> dict:
        return {"channels": list(self.channels), "temporal_kernel": self.temporal_kernel,
                "embed_dim": self.embed_dim}


class _Block:
    """graph conv -> layer norm -> ReLU -> temporal conv -> layer norm, with a
    residual connection (1x1 linear when the channel count changes)."""

    def __init__(self, c_in: int, c_out: int, k: int, graph: SkeletonGraph,
                 rng: np.random.Generator, name: str):
        self.gconv = GraphConv(c_in, c_out, graph, rng, f"{name}.gconv")
        self.ln1 = LayerNorm(c_out, f"{name}.ln1")
        self.relu = ReLU()
        self.tconv = TemporalConv(c_out, k, rng, f"{name}.tconv")
        self.ln2 = LayerNorm(c_out, f"{name}.ln2")
        self.residual = None if c_in == c_out else Linear(c_in, c_out, rng, f"{name}.res")

    def forward(self, x: np.ndarray) -> np.ndarray:
        h = self.ln2.forward(self.tconv.forward(self.relu.forward(
            self.ln1.forward(self.gconv.forward(x)))))
        res = x if self.residual is None else self.residual.forward(x)
        return h + res

    def backward(self, dy: np.ndarray) -> np.ndarray:
        dx = self.gconv.backward(self.ln1.backward(self.relu.backward(
            self.tconv.backward(self.ln2.backward(dy)))))
        if self.residual is None:
            dx = dx + dy
        else:
            dx = dx + self.residual.backward(dy)
        return dx

    def params(self) -> list[Parameter]:
        out = self.gconv.params() + self.ln1.params() + self.tconv.params() + self.ln2.params()
        if self.residual is not None:
            out += self.residual.params()
        return out


class BackboneModel:
    """Encoder from (B, 15, 17, 2) segments to per-frame features and a
    pooled embedding."""

    def __init__(self, cfg: BackboneConfig, graph: SkeletonGraph | None = None):
        self.cfg = cfg
        self.graph = graph or SkeletonGraph.from_edges()
        rng = np.random.default_rng(cfg.seed)
        ch = cfg.channels
        self.blocks = [
            _Block(ch[i], ch[i + 1], cfg.temporal_kernel, self.graph, rng, f"block{i}")
            for i in range(N_BLOCKS)
        ]
        self.proj = Linear(ch[-1], cfg.embed_dim, rng, "proj")
        self._n_joints = None

    def params(self) -> list[Parameter]:
        out: list[Parameter] = []
        for b in self.blocks:
            out += b.params()
        return out + self.proj.params()

    def zero_grad(self) -> None:
        for p in self.params():
            p.zero_grad()

    def encode(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Returns (per-frame features (B, T, 64), pooled embeddings (B, 64))."""
        if x.ndim == 3:
            x = x[None]
        if x.ndim != 4 or x.shape[1] != SEGMENT_LEN or x.shape[3] != self.cfg.channels[0]:
            raise ShapeError(f"expected (B, {SEGMENT_LEN}, J, {self.cfg.channels[0]}) "
                             f"segments, got {x.shape}")
        h = x
        for b in self.blocks:
            h = b.forward(h)
        self._n_joints = h.shape[2]
        frame_feats = self.proj.forward(h.mean(axis=2))
        pooled = frame_feats.mean(axis=1)
        return frame_feats, pooled

    def backward(self, d_pooled: np.ndarray | None = None,
                 d_frames: np.ndarray | None = None) -> None:
        """Backpropagate from the pooled embedding and/or per-frame features."""
        if d_pooled is None and d_frames is None:
            raise ValueError("nothing to backpropagate")
        b, t = self.proj._x.shape[:2]
        d_ff = np.zeros((b, t, self.cfg.embed_dim)) if d_frames is None \
            else np.array(d_frames, dtype=np.float64)
        if d_pooled is not None:
            d_ff = d_ff + d_pooled[:, None, :] / SEGMENT_LEN
        dh_mean = self.proj.backward(d_ff)
        dh = np.repeat(dh_mean[:, :, None, :], self._n_joints, axis=2) / self._n_joints
        for b in reversed(self.blocks):
            dh = b.backward(dh)


def nt_xent(embeddings: np.ndarray, temperature: float) -> tuple[float, np.ndarray]:
    """NT-Xent loss over 2N embeddings laid out as adjacent positive pairs
    (rows 2i and 2i+1 are two views of the same segment).

    Embeddings are L2-normalized inside the loss. Returns (loss, gradient
    with respect to the raw, unnormalized embeddings).
    """
    e = np.asarray(embeddings, dtype=np.float64)
    if e.ndim != 2 or e.shape[0] % 2 != 0 or e.shape[0] < 2:
        raise ShapeError(f"expected (2N, D) embeddings, got {e.shape}")
    m = e.shape[0]
    norms = np.linalg.norm(e, axis=1, keepdims=True)
    if np.any(norms == 0.0):
        raise DegenerateEmbeddingError("zero-norm embedding in NT-Xent batch")
    u = e / norms
    sim = (u @ u.T) / temperature

    pos = np.arange(m) ^ 1  # partner index of each anchor
    neg_inf = -np.inf
    masked = sim.copy()
    np.fill_diagonal(masked, neg_inf)
    row_max = masked.max(axis=1, keepdims=True)
    exp = np.exp(masked - row_max)
    denom = exp.sum(axis=1, keepdims=True)
    log_denom = np.log(denom) + row_max
    loss = float(np.mean(log_denom[:, 0] - sim[np.arange(m), pos]))

    # d loss / d sim, averaged over the 2N anchors
    g = exp / denom / m
    g[np.arange(m), pos] -= 1.0 / m
    np.fill_diagonal(g, 0.0)
    du = (g + g.T) @ u / temperature
    # through the normalization: project out the radial component
    dot = (du * u).sum(axis=1, keepdims=True)
    de = (du - u * dot) / norms
    return loss, de


def augment_pair(seg: PoseSegment, seed: int,
                 noise_sigma: float = 0.05,
                 jitter_max: int = JITTER_MAX) -> tuple[np.ndarray, np.ndarray]:
    """Two stochastic views of one segment: a temporal jitter of the window
    start by up to +/-jitter_max frames (re-sliced from stored context when
    available, edge-padded otherwise) plus per-joint Gaussian noise on the
    normalized coordinates. Deterministic in the seed."""
    rng = np.random.default_rng(seed)
    views = []
    for _ in range(2):
        u = int(rng.integers(-jitter_max, jitter_max + 1)) if jitter_max > 0 else 0
        if seg.context is not None:
            start = jitter_max + u
            window = seg.context[start:start + SEGMENT_LEN]
        else:
            idx = np.clip(np.arange(SEGMENT_LEN) + u, 0, SEGMENT_LEN - 1)
            window = seg.frames[idx]
        noise = rng.normal(0.0, noise_sigma, size=window.shape) if noise_sigma > 0 else 0.0
        views.append(window + noise)
    return views[0], views[1]


@dataclass
class EpochLog:
    epoch: int
    loss: float
    best_loss: float
    elapsed: float


@dataclass
class PretrainResult:
    model: BackboneModel
    log: list[EpochLog] = field(default_factory=list)
    best_epoch: int = 0


def _clone_values(params: Sequence[Parameter]) -> dict[str, np.ndarray]:
    return {p.name: p.value.copy() for p in params}


def _restore_values(params: Sequence[Parameter], values: Mapping[str, np.ndarray]) -> None:
    for p in params:
        p.value[...] = values[p.name]


def pretrain_side(segments: Sequence[PoseSegment], cfg: BackboneConfig,
                  side: Side) -> PretrainResult:
    """Contrastive pretraining for one court side; keeps the parameters from
    the lowest-loss epoch and stops after `patience` epochs without a new
    best."""
    if len(segments) < 2:
        raise DataError(f"side {side.value}: need at least 2 segments to pretrain, "
                        f"got {len(segments)}")
    model = BackboneModel(replace(cfg, seed=cfg.seed + (0 if side is Side.FRONT else 1)))
    params = model.params()
    state = AdamState()
    rng = np.random.default_rng(cfg.seed * 7919 + (0 if side is Side.FRONT else 1))

    best_loss = np.inf
    best_epoch = 0
    best_values = _clone_values(params)
    log: list[EpochLog] = []
    t0 = time.perf_counter()
    aug_counter = 0

    for epoch in range(1, cfg.max_epochs + 1):
        order = rng.permutation(len(segments))
        losses = []
        for start in range(0, len(order), cfg.batch_pairs):
            batch = [segments[i] for i in order[start:start + cfg.batch_pairs]]
            views = []
            for seg in batch:
                v1, v2 = augment_pair(seg, seed=cfg.seed * 1_000_003 + aug_counter,
                                      noise_sigma=cfg.noise_sigma,
                                      jitter_max=cfg.jitter_max)
                aug_counter += 1
                views.extend((v1, v2))
            x = np.stack(views)
            model.zero_grad()
            _, pooled = model.encode(x)
            loss, d_emb = nt_xent(pooled, cfg.temperature)
            model.backward(d_pooled=d_emb)
            adam_step(params, state, cfg.lr)
            losses.append(loss)
        epoch_loss = float(np.mean(losses))
        if epoch_loss < best_loss:
            best_loss = epoch_loss
            best_epoch = epoch
            best_values = _clone_values(params)
        log.append(EpochLog(epoch=epoch, loss=epoch_loss, best_loss=best_loss,
                            elapsed=time.perf_counter() - t0))
        if epoch - best_epoch >= cfg.patience:
            break

    _restore_values(params, best_values)
    return PretrainResult(model=model, log=log, best_epoch=best_epoch)


def pretrain(segments_by_side: Mapping[Side, Sequence[PoseSegment]],
             cfg: BackboneConfig) -> dict[Side, PretrainResult]:
    """Train the front-court and back-court encoders."""
    results: dict[Side, PretrainResult] = {}
    for side in (Side.FRONT, Side.BACK):
        segs = segments_by_side.get(side, [])
        if not segs:
            raise DataError(f"no segments for side {side.value!r}")
        results[side] = pretrain_side(segs, cfg, side)
    return results


def save_backbone(path, model: BackboneModel, cfg_hash: str) -> None:
    from .nn import save_checkpoint
    save_checkpoint(path, model.params(), model.cfg.arch(), cfg_hash)


def load_backbone(path) -> BackboneModel:
    from .nn import load_checkpoint, restore
    table, sidecar = load_checkpoint(path)
    arch = sidecar["arch"]
    cfg = BackboneConfig(channels=tuple(arch["channels"]),
                         temporal_kernel=arch["temporal_kernel"],
                         embed_dim=arch["embed_dim"])
    model = BackboneModel(cfg)
    restore(model.params(), table)
    return model
