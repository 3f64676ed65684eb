"""Projected gradient descent of free embeddings (or a linear encoder)
under the combined objective, on the unit sphere.

Runs are single-threaded and bitwise deterministic given the seed and
config; independent seeds can run in parallel.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field

import numpy as np

from .clip import ClipSequence, normalize
from .gradients import GradientSet, grad_tnce, grad_total
from .losses import (
    BridgeInterval,
    LossBreakdown,
    TnceConfig,
    _distance_matrix,
    actol_loss,
    lower_bound,
    tnce_loss,
)


class TrainingDiverged(RuntimeError):
    """Raised when the loss becomes non-finite; carries the step index."""

    def __init__(self, step: int):
        super().__init__(f"non-finite loss at step {step}")
        self.step = step


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.05
    steps: int = 1000
    bb_weight: float = 0.1
    temperature: float = 1.0
    seed: int = 0
    optimize_language: bool = False
    intervals_per_step: int = 1

    def __post_init__(self):
        if self.learning_rate < 0:
            raise ValueError("learning rate must be non-negative")
        if self.steps < 1:
            raise ValueError("need at least one step")
        if self.bb_weight < 0:
            raise ValueError("bb_weight must be non-negative")
        if self.intervals_per_step < 1:
            raise ValueError("need at least one interval per step")


@dataclass(frozen=True)
class LinearEncoder:
    """Linear map from raw features to embeddings; outputs are always
    renormalized to the unit sphere."""

    weight: np.ndarray

    def __call__(self, features: np.ndarray) -> np.ndarray:
        z = features @ self.weight.T
        return z / np.linalg.norm(z, axis=-1, keepdims=True)


@dataclass
class TrainHistory:
    records: list = field(default_factory=list)
    final_clip: ClipSequence | None = None

    @property
    def vlo_gap(self) -> list:
        return [r.gap for r in self.records]


def _tangent_step(vectors: np.ndarray, grads: np.ndarray, lr: float) -> np.ndarray:
    """One descent step projected onto the sphere's tangent space, then
    renormalized."""
    if lr == 0.0:
        return vectors
    radial = (grads * vectors).sum(axis=-1, keepdims=True)
    tangent = grads - radial * vectors
    stepped = vectors - lr * tangent
    return stepped / np.linalg.norm(stepped, axis=-1, keepdims=True)


def _sample_intervals(T: int, cfg: TrainConfig, rng):
    if cfg.intervals_per_step == 1:
        return [BridgeInterval(0, T - 1)]
    intervals = []
    for _ in range(cfg.intervals_per_step):
        start = int(rng.integers(0, T - 1))
        end = int(rng.integers(start + 1, T))
        intervals.append(BridgeInterval(start, end))
    return intervals


def _objective_breakdown(clip, cfg: TrainConfig, intervals, objective, lb) -> LossBreakdown:
    if objective is None:
        from .losses import bb_loss, vlo_loss

        vlo = vlo_loss(clip, cfg.temperature)
        bb = sum(bb_loss(clip, iv) for iv in intervals) / len(intervals)
        return LossBreakdown(
            vlo=vlo, bb=bb, total=vlo + cfg.bb_weight * bb, lower_bound=lb, gap=vlo - lb
        )
    value = tnce_loss(clip, objective)
    return LossBreakdown(vlo=value, bb=0.0, total=value, lower_bound=lb, gap=value - lb)


def _objective_grads(clip, cfg: TrainConfig, intervals, objective) -> GradientSet:
    if objective is None:
        return grad_total(clip, cfg.bb_weight, cfg.temperature, intervals)
    return grad_tnce(clip, objective)


def train_free(
    clip_init: ClipSequence,
    cfg: TrainConfig,
    objective: TnceConfig | None = None,
) -> TrainHistory:
    """Optimize the frame embeddings (and optionally the language embedding)
    directly. By default the combined objective is minimized; passing a
    TnceConfig trains under that contrastive variant instead, with the
    history's vlo/total fields holding its value."""
    clip = clip_init.normalized()
    rng = np.random.default_rng(cfg.seed)
    lb = lower_bound(clip)
    history = TrainHistory()
    for step in range(cfg.steps):
        intervals = _sample_intervals(clip.T, cfg, rng)
        breakdown = _objective_breakdown(clip, cfg, intervals, objective, lb)
        if not np.isfinite(breakdown.total):
            raise TrainingDiverged(step)
        history.records.append(breakdown)
        grads = _objective_grads(clip, cfg, intervals, objective)
        emb = _tangent_step(clip.embeddings, grads.frames, cfg.learning_rate)
        lang = clip.language
        if cfg.optimize_language:
            lang = _tangent_step(lang, grads.language, cfg.learning_rate)
        clip = clip.with_embeddings(emb, lang)
    history.final_clip = clip
    return history


def _encoder_loss_and_grad(weight, features, timestamps, language, cfg: TrainConfig, intervals):
    """Loss and dL/dW for embeddings normalize(W f_t), chained through the
    normalization map."""
    z = features @ weight.T
    norms = np.linalg.norm(z, axis=1, keepdims=True)
    emb = z / norms
    clip = ClipSequence(timestamps, emb, language)
    breakdown = actol_loss(clip, cfg.bb_weight, cfg.temperature, intervals)
    grads = grad_total(clip, cfg.bb_weight, cfg.temperature, intervals)
    # dL/dz_t = (I - v v^T) / |z_t| . dL/dv_t
    gv = grads.frames
    gz = (gv - (gv * emb).sum(axis=1, keepdims=True) * emb) / norms
    gw = gz.T @ features
    return breakdown, gw, clip


def train_encoder(features, timestamps, language, cfg: TrainConfig):
    """Descent on the weights of a linear encoder feeding the combined
    objective; the language embedding stays fixed. Returns the trained
    encoder and the per-step history."""
    features = np.asarray(features, dtype=float)
    language = normalize(language)
    n, f = features.shape
    d = language.shape[0]
    rng = np.random.default_rng(cfg.seed)
    if f == d:
        weight = np.eye(d)
    else:
        weight = rng.standard_normal((d, f)) / np.sqrt(f)
    history = TrainHistory()
    for step in range(cfg.steps):
        intervals = _sample_intervals(n, cfg, rng)
        breakdown, gw, clip = _encoder_loss_and_grad(
            weight, features, timestamps, language, cfg, intervals
        )
        if not np.isfinite(breakdown.total):
            raise TrainingDiverged(step)
        history.records.append(breakdown)
        weight = weight - cfg.learning_rate * gw
    encoder = LinearEncoder(weight)
    history.final_clip = ClipSequence(timestamps, encoder(features), language)
    return encoder, history


def measure_delta(clip: ClipSequence, temperature: float = 1.0):
    """Smallest delta in (0, 1) for which the ordering property holds over
    all (anchor, j, k) triples on the temperature-scaled alignment scores:
    equal-distance score gaps below delta, ordered pairs separated by more
    than 1/delta. Returns None when no delta < 1 works; with no triples
    (T = 2) the property is vacuous and the smallest positive normal float
    is returned by convention."""
    from .losses import _score_matrix

    T = clip.T
    R = _score_matrix(clip) / temperature
    d = _distance_matrix(clip.timestamps)

    equal_gaps = []
    margins = []
    for i in range(T):
        for j in range(T):
            if j == i:
                continue
            for k in range(T):
                if k == i or k == j:
                    continue
                if d[i, j] == d[i, k]:
                    equal_gaps.append(abs(R[i, j] - R[i, k]))
                elif d[i, j] < d[i, k]:
                    margins.append(R[i, j] - R[i, k])

    if not equal_gaps and not margins:
        return sys.float_info.min

    if margins and min(margins) <= 0:
        return None

    candidates = sorted(
        {0.01 * k for k in range(1, 100)}
        | {np.nextafter(1.0 / m, 1.0) for m in margins if m > 1.0}
        | ({np.nextafter(max(equal_gaps), 1.0)} if equal_gaps else set())
    )

    def satisfied(delta):
        if equal_gaps and max(equal_gaps) >= delta:
            return False
        if margins and min(margins) <= 1.0 / delta:
            return False
        return True

    for delta in candidates:
        if 0 < delta < 1 and satisfied(delta):
            return float(delta)
    return None
