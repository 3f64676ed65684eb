"""Language-conditioned reward curves and objective comparison on
synthetic clips with distractor tails.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .clip import ClipSequence
from .losses import TnceConfig
from .synthetic import SyntheticClipSpec, generate_clip
from .trainer import TrainConfig, train_free


@dataclass(frozen=True)
class RewardCurve:
    """Per-frame cosine rewards, min-max normalized per clip.

    argmax_index is 1-based (frame positions, matching completion_index
    conventions) with earliest-index tie-break. Constant curves normalize
    to all zeros.
    """

    raw: tuple
    normalized: tuple
    argmax_index: int


def reward_curve(clip: ClipSequence) -> RewardCurve:
    raw = clip.similarities()
    lo, hi = raw.min(), raw.max()
    if hi > lo:
        norm = (raw - lo) / (hi - lo)
    else:
        norm = np.zeros_like(raw)
    return RewardCurve(
        raw=tuple(float(x) for x in raw),
        normalized=tuple(float(x) for x in norm),
        argmax_index=int(np.argmax(raw)) + 1,
    )


def curve_rows(clip: ClipSequence):
    """CSV-ready rows: (frame_index, timestamp, raw_reward, normalized_reward)."""
    curve = reward_curve(clip)
    return [
        (i + 1, clip.timestamps[i], curve.raw[i], curve.normalized[i])
        for i in range(clip.T)
    ]


@dataclass(frozen=True)
class ObjectiveSpec:
    """One entry in a comparison: the combined objective (tnce=None) or a
    time-contrastive variant."""

    name: str
    tnce: TnceConfig | None = None


@dataclass(frozen=True)
class SeedResult:
    seed: int
    completion_index: int
    argmax_by_objective: dict
    error_by_objective: dict


@dataclass(frozen=True)
class ComparisonRecord:
    seeds: tuple
    objectives: tuple
    results: tuple
    median_error: dict
    final_clips: dict = field(default_factory=dict, compare=False)


def _max_workers() -> int:
    env = os.environ.get("ACTOL_THREADS")
    if env:
        return max(1, int(env))
    return 1


def _run_seed(seed, clip_spec: SyntheticClipSpec, objectives, train_cfg: TrainConfig):
    clip, truth = generate_clip(replace(clip_spec, seed=seed))
    argmaxes = {}
    errors = {}
    clips = {}
    for obj in objectives:
        cfg = replace(train_cfg, seed=seed)
        history = train_free(clip, cfg, objective=obj.tnce)
        curve = reward_curve(history.final_clip)
        argmaxes[obj.name] = curve.argmax_index
        errors[obj.name] = abs(curve.argmax_index - truth.completion_index)
        clips[obj.name] = history.final_clip
    return SeedResult(seed, truth.completion_index, argmaxes, errors), clips


def compare_objectives(
    clip_spec: SyntheticClipSpec,
    objectives,
    train_cfg: TrainConfig,
    seeds,
) -> ComparisonRecord:
    """Train free embeddings from identical per-seed initializations under
    each objective and report reward-argmax distance to the ground-truth
    completion index. Seeds fan out over at most ACTOL_THREADS workers;
    output ordering is deterministic regardless."""
    objectives = tuple(objectives)
    seeds = tuple(int(s) for s in seeds)
    with ThreadPoolExecutor(max_workers=_max_workers()) as pool:
        outcomes = list(pool.map(lambda s: _run_seed(s, clip_spec, objectives, train_cfg), seeds))
    results = tuple(res for res, _ in outcomes)
    final_clips = {
        (res.seed, name): c for res, clips in outcomes for name, c in clips.items()
    }
    medians = {
        obj.name: float(np.median([r.error_by_objective[obj.name] for r in results]))
        for obj in objectives
    }
    return ComparisonRecord(
        seeds=seeds,
        objectives=tuple(o.name for o in objectives),
        results=results,
        median_error=medians,
        final_clips=final_clips,
    )
