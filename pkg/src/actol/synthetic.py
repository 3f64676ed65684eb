"""Deterministic toy-clip generators with known ground truth.

All randomness flows through numpy's PCG64 generator
(np.random.default_rng), so outputs are reproducible from the seed alone.
Frames move along great-circle arcs (slerp), which keeps them unit-norm
by construction and makes similarity curves smooth.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .clip import ClipSequence, normalize

TAIL_MODES = ("none", "frozen", "drift-away", "second-action")


@dataclass(frozen=True)
class SyntheticClipSpec:
    """Generator parameters for one toy clip.

    completion_index is 1-based: the frame at which the instructed action
    finishes; frames after it are distractor tail per tail_mode.
    """

    T: int = 10
    d: int = 8
    completion_index: int = 10
    tail_mode: str = "none"
    noise_sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.T < 2:
            raise ValueError("need at least two frames")
        if not (1 <= self.completion_index <= self.T):
            raise ValueError("completion_index must lie in [1, T]")
        if self.tail_mode not in TAIL_MODES:
            raise ValueError(f"unknown tail mode {self.tail_mode!r}")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be non-negative")


@dataclass(frozen=True)
class GroundTruth:
    completion_index: int
    progress: tuple


def slerp(a: np.ndarray, b: np.ndarray, t: float) -> np.ndarray:
    """Great-circle interpolation between unit vectors a (t=0) and b (t=1)."""
    dot = float(np.clip(np.dot(a, b), -1.0, 1.0))
    omega = np.arccos(dot)
    if omega < 1e-12:
        return a.copy()
    return (np.sin((1.0 - t) * omega) * a + np.sin(t * omega) * b) / np.sin(omega)


def _random_unit(rng, d: int) -> np.ndarray:
    return normalize(rng.standard_normal(d))


def _unit_away_from(rng, ref: np.ndarray, max_abs_cos: float = 0.5) -> np.ndarray:
    # rejection keeps the arc to ref bounded away from 0 and pi
    while True:
        v = _random_unit(rng, ref.shape[0])
        if abs(float(v @ ref)) < max_abs_cos:
            return v


def generate_clip(spec: SyntheticClipSpec):
    """Build a clip whose frames approach the language embedding along a
    geodesic, reaching maximum alignment at completion_index, then behave
    per tail_mode. Returns (ClipSequence, GroundTruth)."""
    rng = np.random.default_rng(spec.seed)
    language = _random_unit(rng, spec.d)
    start = _unit_away_from(rng, language)
    c = spec.completion_index

    frames = []
    progress = []
    for i in range(c):
        p = 1.0 if c == 1 else i / (c - 1)
        frames.append(slerp(start, language, p))
        progress.append(p)

    n_tail = spec.T - c
    if n_tail > 0:
        if spec.tail_mode in ("drift-away", "second-action"):
            if spec.tail_mode == "drift-away":
                # pure tangent direction: similarity decays from 1 toward 0
                w = _random_unit(rng, spec.d)
                w = normalize(w - (w @ language) * language)
            else:
                w = _unit_away_from(rng, language)
            for k in range(1, n_tail + 1):
                q = k / n_tail
                frames.append(slerp(language, w, q))
        else:
            # 'none' holds the target; 'frozen' repeats the completion frame
            frames.extend(frames[-1].copy() for _ in range(n_tail))
        progress.extend(1.0 for _ in range(n_tail))

    emb = np.stack(frames)
    if spec.noise_sigma > 0:
        if spec.tail_mode == "frozen":
            noisy = emb[: c] + spec.noise_sigma * rng.standard_normal((c, spec.d))
            noisy = np.stack([normalize(v) for v in noisy])
            emb = np.vstack([noisy, np.repeat(noisy[-1][None, :], n_tail, axis=0)])
        else:
            emb = emb + spec.noise_sigma * rng.standard_normal(emb.shape)
            emb = np.stack([normalize(v) for v in emb])
    clip = ClipSequence(tuple(range(spec.T)), emb, language)
    return clip, GroundTruth(completion_index=c, progress=tuple(progress))


def random_clip(T: int, d: int, rng, max_gap: int = 4) -> ClipSequence:
    """Clip with random unit embeddings and random strictly increasing
    integer timestamps (gaps in [1, max_gap])."""
    gaps = rng.integers(1, max_gap + 1, size=T - 1)
    ts = tuple(int(t) for t in np.concatenate([[0], np.cumsum(gaps)]))
    emb = rng.standard_normal((T, d))
    emb /= np.linalg.norm(emb, axis=1, keepdims=True)
    return ClipSequence(ts, emb, _random_unit(rng, d))


def sample_bridge(v_start, v_end, t_start: int, t_end: int, seed: int):
    """Draw one vector per integer time in [t_start, t_end]: endpoints
    exactly, interior points from the bridge's per-time Gaussian marginal
    (independent coordinates, variance (t-t0)(t1-t)/(t1-t0))."""
    if t_end <= t_start:
        raise ValueError("interval must have positive length")
    v_start = np.asarray(v_start, dtype=float)
    v_end = np.asarray(v_end, dtype=float)
    rng = np.random.default_rng(seed)
    length = t_end - t_start
    out = [v_start.copy()]
    for t in range(t_start + 1, t_end):
        alpha = (t - t_start) / length
        mean = v_start + alpha * (v_end - v_start)
        var = (t - t_start) * (t_end - t) / length
        out.append(mean + np.sqrt(var) * rng.standard_normal(v_start.shape))
    out.append(v_end.copy())
    return out


def perturb_language(l, delta: float, seed: int) -> np.ndarray:
    """Unit vector at Euclidean distance in (0, delta] from l, built by a
    random tangent step of size delta followed by renormalization."""
    if delta < 0:
        raise ValueError("perturbation size must be non-negative")
    if delta > 2:
        raise ValueError("perturbation size cannot exceed the sphere diameter 2")
    l = normalize(l)
    if delta == 0:
        return l.copy()
    rng = np.random.default_rng(seed)
    u = rng.standard_normal(l.shape)
    u = u - (u @ l) * l
    norm = np.linalg.norm(u)
    if norm < 1e-12:  # degenerate draw; retry deterministically
        return perturb_language(l, delta, seed + 1)
    lp = normalize(l + delta * (u / norm))
    assert np.linalg.norm(lp - l) <= delta + 1e-12
    return lp
