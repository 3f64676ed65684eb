"""Loss functions over clips: ordering loss, Brownian-bridge penalty,
their weighted combination, the configurable time-contrastive family,
and the combinatorial lower bound of the ordering loss.

All reductions run in a fixed anchor-major, pair-minor order so results
are bit-reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .clip import ClipSequence

DEFAULT_BB_WEIGHT = 0.1


@dataclass(frozen=True)
class DistanceProfile:
    """Sorted unique temporal distances from one anchor frame, with counts."""

    anchor: int
    sorted_distances: tuple
    multiplicities: tuple


@dataclass(frozen=True)
class LossBreakdown:
    vlo: float
    bb: float
    total: float
    lower_bound: float
    gap: float


@dataclass(frozen=True)
class BridgeInterval:
    """Index pair (positions in a clip, start < end) delimiting a bridge."""

    start: int
    end: int

    def validate(self, clip: ClipSequence) -> None:
        if not (0 <= self.start < self.end < clip.T):
            raise ValueError(f"interval ({self.start}, {self.end}) out of bounds for T={clip.T}")


@dataclass(frozen=True)
class TnceConfig:
    """Selector slots of the unified time-contrastive objective.

    positive_selector: 'last-frame' (goal frame), 'future-frame'
    (later-frame pairs), or 'vlo-pair' (all ordered pairs; reduces to
    vlo_loss). negative_selector: 'other-frames' or 'farther-frames'.
    score: 'direct-sim' or 'difference-score'.
    """

    positive_selector: str = "vlo-pair"
    negative_selector: str = "farther-frames"
    score: str = "difference-score"
    temperature: float = 1.0

    def __post_init__(self):
        if self.positive_selector not in ("last-frame", "future-frame", "vlo-pair"):
            raise ValueError(f"unknown positive selector {self.positive_selector!r}")
        if self.negative_selector not in ("other-frames", "farther-frames"):
            raise ValueError(f"unknown negative selector {self.negative_selector!r}")
        if self.score not in ("direct-sim", "difference-score"):
            raise ValueError(f"unknown score {self.score!r}")
        if self.temperature <= 0:
            raise ValueError("temperature must be positive")


def _distance_matrix(timestamps) -> np.ndarray:
    ts = np.asarray(timestamps, dtype=float)
    return np.abs(ts[:, None] - ts[None, :])


def _score_matrix(clip: ClipSequence) -> np.ndarray:
    s = clip.similarities()
    return -np.abs(s[:, None] - s[None, :])


def negative_set(clip: ClipSequence, i: int, j: int) -> set:
    """Frames at least as far from anchor i as frame j is (j included)."""
    if i == j:
        raise ValueError("anchor and positive must differ")
    T = clip.T
    if not (0 <= i < T and 0 <= j < T):
        raise ValueError("frame index out of bounds")
    d = _distance_matrix(clip.timestamps)
    return {k for k in range(T) if k != i and d[i, k] >= d[i, j]}


def _ordered_pair_loss(timestamps, scores: np.ndarray, temperature: float) -> float:
    """Mean over all ordered pairs (i, j) of the contrastive cross-entropy
    with the anchor-i farther-frame negative set."""
    T = len(timestamps)
    d = _distance_matrix(timestamps)
    tau = float(temperature)
    total = 0.0
    for i in range(T):
        # rows j: negative set {k != i, d_ik >= d_ij}
        mask = d[i][None, :] >= d[i][:, None]
        mask[:, i] = False
        logits = np.where(mask, scores[i][None, :] / tau, -np.inf)
        lse = logsumexp(logits, axis=1)
        others = np.arange(T) != i
        total += float(np.sum(-scores[i, others] / tau + lse[others]))
    return total / (T * (T - 1))


def vlo_loss(clip: ClipSequence, temperature: float = 1.0) -> float:
    """Ordering loss: contrastive cross-entropy over all ordered frame
    pairs, with negatives drawn from frames temporally at least as far
    from the anchor as the positive. Non-negative; strictly above
    lower_bound(clip)."""
    if temperature <= 0:
        raise ValueError("temperature must be positive")
    return _ordered_pair_loss(clip.timestamps, _score_matrix(clip), temperature)


def vlo_loss_on_scores(timestamps, scores, temperature: float = 1.0) -> float:
    """Same objective as vlo_loss but on a supplied score matrix, enabling
    score-space constructions that need not come from embeddings."""
    timestamps = tuple(int(t) for t in timestamps)
    if len(timestamps) < 2:
        raise ValueError("need at least two timestamps")
    scores = np.asarray(scores, dtype=float)
    T = len(timestamps)
    if scores.shape != (T, T):
        raise ValueError(f"score matrix must be {T}x{T}, got {scores.shape}")
    if temperature <= 0:
        raise ValueError("temperature must be positive")
    return _ordered_pair_loss(timestamps, scores, temperature)


def distance_profile(clip: ClipSequence, i: int) -> DistanceProfile:
    """Sorted unique temporal distances from anchor i with multiplicities."""
    if not (0 <= i < clip.T):
        raise ValueError("anchor index out of bounds")
    d = _distance_matrix(clip.timestamps)[i]
    dists = np.delete(d, i)
    levels, counts = np.unique(dists, return_counts=True)
    return DistanceProfile(
        anchor=i,
        sorted_distances=tuple(float(x) for x in levels),
        multiplicities=tuple(int(c) for c in counts),
    )


def lower_bound_from_timestamps(timestamps) -> float:
    """Combinatorial minimum of the ordering loss, determined solely by the
    multiset of pairwise temporal distances."""
    T = len(timestamps)
    if T < 2:
        raise ValueError("need at least two timestamps")
    d = _distance_matrix(timestamps)
    total = 0.0
    for i in range(T):
        _, counts = np.unique(np.delete(d[i], i), return_counts=True)
        total += float(np.sum(counts * np.log(counts)))
    return total / (T * (T - 1))


def lower_bound(clip: ClipSequence) -> float:
    return lower_bound_from_timestamps(clip.timestamps)


def _interval_times(clip: ClipSequence, interval: BridgeInterval):
    interval.validate(clip)
    t0 = clip.timestamps[interval.start]
    t1 = clip.timestamps[interval.end]
    return t0, t1


def bb_mean(t: float, interval: BridgeInterval, clip: ClipSequence) -> np.ndarray:
    """Linear interpolant between the interval's endpoint embeddings at time t."""
    t0, t1 = _interval_times(clip, interval)
    if not (t0 <= t <= t1):
        raise ValueError(f"time {t} outside interval [{t0}, {t1}]")
    alpha = (t - t0) / (t1 - t0)
    v0 = clip.embeddings[interval.start]
    v1 = clip.embeddings[interval.end]
    return v0 + alpha * (v1 - v0)


def bb_variance(t: float, interval: BridgeInterval, clip: ClipSequence) -> float:
    """Bridge variance (t - t0)(t1 - t) / (t1 - t0): zero at the pinned
    endpoints, maximal at the midpoint."""
    t0, t1 = _interval_times(clip, interval)
    if not (t0 <= t <= t1):
        raise ValueError(f"time {t} outside interval [{t0}, {t1}]")
    return (t - t0) * (t1 - t) / (t1 - t0)


def _interior_positions(clip: ClipSequence, interval: BridgeInterval):
    return range(interval.start + 1, interval.end)


def bb_loss(clip: ClipSequence, interval: BridgeInterval) -> float:
    """Mean variance-weighted squared deviation of interior frames from the
    bridge mean. Endpoints are pinned (variance zero) and excluded; an
    interval with no interior frames contributes 0."""
    interval.validate(clip)
    interior = list(_interior_positions(clip, interval))
    if not interior:
        return 0.0
    total = 0.0
    for p in interior:
        t = clip.timestamps[p]
        dev = clip.embeddings[p] - bb_mean(t, interval, clip)
        total += float(dev @ dev) / (2.0 * bb_variance(t, interval, clip))
    return total / len(interior)


def full_interval(clip: ClipSequence) -> BridgeInterval:
    return BridgeInterval(0, clip.T - 1)


def actol_loss(
    clip: ClipSequence,
    bb_weight: float = DEFAULT_BB_WEIGHT,
    temperature: float = 1.0,
    intervals=None,
) -> LossBreakdown:
    """Combined objective: ordering loss plus bb_weight times the mean
    bridge penalty over the given intervals (default: the full clip)."""
    if bb_weight < 0:
        raise ValueError("bb_weight must be non-negative")
    if intervals is None:
        intervals = [full_interval(clip)]
    vlo = vlo_loss(clip, temperature)
    bb = sum(bb_loss(clip, iv) for iv in intervals) / len(intervals) if intervals else 0.0
    lb = lower_bound(clip)
    total = vlo + bb_weight * bb
    return LossBreakdown(vlo=vlo, bb=bb, total=total, lower_bound=lb, gap=vlo - lb)


def _tnce_terms(clip: ClipSequence, cfg: TnceConfig):
    """Enumerate contrastive terms as (positive item, negative items).

    An item is a frame index (direct-sim scoring) or an (anchor, frame)
    pair (difference scoring). Enumeration order is anchor-major,
    pair-minor, matching the ordering-loss reduction.
    """
    T = clip.T
    d = _distance_matrix(clip.timestamps)

    def negatives(i, j):
        if cfg.negative_selector == "other-frames":
            return [k for k in range(T) if k != i]
        return [k for k in range(T) if k != i and d[i, k] >= d[i, j]]

    def item(i, k):
        return k if cfg.score == "direct-sim" else (i, k)

    terms = []
    if cfg.positive_selector == "vlo-pair":
        if cfg.score != "difference-score":
            raise ValueError("vlo-pair positives require difference-score")
        pairs = [(i, j) for i in range(T) for j in range(T) if j != i]
    elif cfg.positive_selector == "last-frame":
        pairs = [(i, T - 1) for i in range(T - 1)]
    else:  # future-frame
        pairs = [(i, j) for i in range(T) for j in range(i + 1, T)]

    for i, j in pairs:
        negs = negatives(i, j)
        if not negs:
            raise ValueError(f"empty negative set for anchor {i}, positive {j}")
        terms.append((item(i, j), [item(i, k) for k in negs]))
    if not terms:
        raise ValueError("selector configuration yields no positive terms")
    return terms


def _item_score(item, s: np.ndarray) -> float:
    if isinstance(item, tuple):
        i, k = item
        return -abs(s[i] - s[k])
    return float(s[item])


def tnce_loss(clip: ClipSequence, cfg: TnceConfig) -> float:
    """Unified time-contrastive objective. The vlo-pair configuration
    equals vlo_loss on the same clip; last-frame with direct-sim scoring
    is the goal-reaching baseline."""
    if cfg.positive_selector == "vlo-pair" and cfg.negative_selector == "farther-frames":
        if cfg.score != "difference-score":
            raise ValueError("vlo-pair positives require difference-score")
        return vlo_loss(clip, cfg.temperature)
    s = clip.similarities()
    tau = cfg.temperature
    terms = _tnce_terms(clip, cfg)
    total = 0.0
    for pos, negs in terms:
        neg_scores = np.array([_item_score(n, s) for n in negs])
        total += -_item_score(pos, s) / tau + logsumexp(neg_scores / tau)
    return total / len(terms)
