"""Hand-derived gradients of every loss with respect to frame and language
embeddings, plus a central finite-difference oracle.

Gradients are ambient (they include the cosine-normalization Jacobian, so
finite differences off the unit sphere agree); the trainer projects them
onto the sphere's tangent space before stepping.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import softmax

from .clip import ClipSequence
from .losses import (
    BridgeInterval,
    TnceConfig,
    _distance_matrix,
    _tnce_terms,
    bb_loss,
    bb_mean,
    bb_variance,
    full_interval,
    tnce_loss,
    vlo_loss,
)

KINK_TOL = 1e-12


@dataclass(frozen=True)
class GradientSet:
    """Per-frame and language gradients of a scalar loss.

    at_kink is set when a contributing frame pair sits on the absolute-value
    kink of the alignment score (similarity difference below 1e-12); the
    returned value is then a subgradient with the kinked terms treated as 0.
    """

    frames: np.ndarray
    language: np.ndarray
    at_kink: bool = False

    def __add__(self, other: "GradientSet") -> "GradientSet":
        return GradientSet(
            self.frames + other.frames,
            self.language + other.language,
            self.at_kink or other.at_kink,
        )

    def scaled(self, c: float) -> "GradientSet":
        return GradientSet(c * self.frames, c * self.language, self.at_kink)


def _zero_grads(clip: ClipSequence) -> GradientSet:
    return GradientSet(np.zeros_like(clip.embeddings), np.zeros_like(clip.language))


def _sim_chain(clip: ClipSequence, g_s: np.ndarray, at_kink: bool) -> GradientSet:
    """Map per-frame similarity gradients dL/ds_t to embedding gradients
    through the cosine (including normalization Jacobians)."""
    norms_v = np.linalg.norm(clip.embeddings, axis=1)
    norm_l = np.linalg.norm(clip.language)
    u_v = clip.embeddings / norms_v[:, None]
    u_l = clip.language / norm_l
    s = u_v @ u_l
    frames = g_s[:, None] * (u_l[None, :] - s[:, None] * u_v) / norms_v[:, None]
    language = (g_s[:, None] * (u_v - s[:, None] * u_l[None, :])).sum(axis=0) / norm_l
    return GradientSet(frames, language, at_kink)


def _pair_weight_matrix(clip: ClipSequence, temperature: float):
    """Accumulate dL/dR over the ordering loss's contrastive terms.

    Returns (G, s, at_kink) with G[i, k] = dL/dR_{i,k}.
    """
    T = clip.T
    tau = float(temperature)
    s = clip.similarities()
    R = -np.abs(s[:, None] - s[None, :])
    d = _distance_matrix(clip.timestamps)
    G = np.zeros((T, T))
    scale = 1.0 / (T * (T - 1))
    for i in range(T):
        # rows j: negative set {k != i, d_ik >= d_ij}; softmax per row
        mask = d[i][None, :] >= d[i][:, None]
        mask[:, i] = False
        logits = np.where(mask, R[i][None, :] / tau, -np.inf)
        mx = logits.max(axis=1, keepdims=True)
        expd = np.exp(logits - mx)
        w = expd / expd.sum(axis=1, keepdims=True)
        others = np.arange(T) != i
        G[i, :] += scale / tau * w[others].sum(axis=0)
        G[i, others] -= scale / tau
    return G, s, R


def _scores_to_sim_grads(G: np.ndarray, s: np.ndarray):
    """Map score-matrix gradients dL/dR_{i,k} (R = -|s_i - s_k|) to
    similarity gradients dL/ds_t, flagging absolute-value kinks."""
    diff = s[:, None] - s[None, :]
    sign = np.sign(diff)
    contributing = (G != 0) & ~np.eye(len(s), dtype=bool)
    at_kink = bool(np.any(contributing & (np.abs(diff) < KINK_TOL)))
    GS = G * sign
    g_s = -GS.sum(axis=1) + GS.sum(axis=0)
    return g_s, at_kink


def grad_vlo(clip: ClipSequence, temperature: float = 1.0) -> GradientSet:
    """Exact ambient gradient of vlo_loss w.r.t. every embedding."""
    if temperature <= 0:
        raise ValueError("temperature must be positive")
    G, s, _ = _pair_weight_matrix(clip, temperature)
    g_s, at_kink = _scores_to_sim_grads(G, s)
    return _sim_chain(clip, g_s, at_kink)


def grad_bb(clip: ClipSequence, interval: BridgeInterval) -> GradientSet:
    """Exact gradient of bb_loss. Endpoint frames receive gradient through
    the bridge mean even though they contribute no deviation term."""
    interval.validate(clip)
    grads = _zero_grads(clip)
    interior = list(range(interval.start + 1, interval.end))
    if not interior:
        return grads
    t0 = clip.timestamps[interval.start]
    t1 = clip.timestamps[interval.end]
    frames = grads.frames
    for p in interior:
        t = clip.timestamps[p]
        alpha = (t - t0) / (t1 - t0)
        dev = clip.embeddings[p] - bb_mean(t, interval, clip)
        g = dev / (bb_variance(t, interval, clip) * len(interior))
        frames[p] += g
        frames[interval.start] -= (1.0 - alpha) * g
        frames[interval.end] -= alpha * g
    return grads


def grad_tnce(clip: ClipSequence, cfg: TnceConfig) -> GradientSet:
    """Exact ambient gradient of tnce_loss for any selector configuration."""
    s = clip.similarities()
    tau = cfg.temperature
    terms = _tnce_terms(clip, cfg)
    T = clip.T
    g_s = np.zeros(T)
    G = np.zeros((T, T))
    scale = 1.0 / len(terms)

    def add(item, coeff):
        if isinstance(item, tuple):
            i, k = item
            G[i, k] += coeff
        else:
            g_s[item] += coeff

    from .losses import _item_score

    for pos, negs in terms:
        neg_scores = np.array([_item_score(n, s) for n in negs])
        w = softmax(neg_scores / tau)
        add(pos, -scale / tau)
        for n, wn in zip(negs, w):
            add(n, scale * wn / tau)

    g_pair, at_kink = _scores_to_sim_grads(G, s)
    return _sim_chain(clip, g_s + g_pair, at_kink)


def grad_total(
    clip: ClipSequence,
    bb_weight: float = 0.1,
    temperature: float = 1.0,
    intervals=None,
) -> GradientSet:
    """Gradient of the combined objective: grad_vlo plus bb_weight times the
    mean bridge gradient over the intervals."""
    if intervals is None:
        intervals = [full_interval(clip)]
    grads = grad_vlo(clip, temperature)
    if bb_weight != 0.0 and intervals:
        bb = _zero_grads(clip)
        for iv in intervals:
            bb = bb + grad_bb(clip, iv)
        grads = grads + bb.scaled(bb_weight / len(intervals))
    return grads


def _loss_and_grad(loss: str, clip: ClipSequence, params: dict):
    params = dict(params or {})
    if loss == "vlo":
        tau = params.get("temperature", 1.0)
        return vlo_loss(clip, tau), grad_vlo(clip, tau)
    if loss == "bb":
        iv = params.get("interval", full_interval(clip))
        return bb_loss(clip, iv), grad_bb(clip, iv)
    if loss == "total":
        lam = params.get("bb_weight", 0.1)
        tau = params.get("temperature", 1.0)
        ivs = params.get("intervals")
        from .losses import actol_loss

        return actol_loss(clip, lam, tau, ivs).total, grad_total(clip, lam, tau, ivs)
    if loss == "tnce":
        cfg = params["config"]
        return tnce_loss(clip, cfg), grad_tnce(clip, cfg)
    raise ValueError(f"unknown loss {loss!r}")


def finite_diff_check(loss: str, clip: ClipSequence, params=None, step: float = 1e-5) -> float:
    """Central finite differences on every coordinate of every embedding
    (frames and language); returns the max relative error against the
    analytic gradient."""
    if step <= 0:
        raise ValueError("step must be positive")
    _, grads = _loss_and_grad(loss, clip, params)

    def value(emb, lang):
        c = ClipSequence(clip.timestamps, emb, lang)
        v, _ = _loss_and_grad(loss, c, params)
        if not np.isfinite(v):
            raise FloatingPointError(f"non-finite {loss} loss at perturbed point")
        return v

    def rel_err(analytic, numeric):
        return abs(analytic - numeric) / max(abs(analytic), abs(numeric), 1e-8)

    worst = 0.0
    emb0 = clip.embeddings
    lang0 = clip.language
    for t in range(clip.T):
        for c in range(clip.d):
            e_plus = emb0.copy()
            e_minus = emb0.copy()
            e_plus[t, c] += step
            e_minus[t, c] -= step
            num = (value(e_plus, lang0) - value(e_minus, lang0)) / (2 * step)
            worst = max(worst, rel_err(grads.frames[t, c], num))
    for c in range(clip.d):
        l_plus = lang0.copy()
        l_minus = lang0.copy()
        l_plus[c] += step
        l_minus[c] -= step
        num = (value(emb0, l_plus) - value(emb0, l_minus)) / (2 * step)
        worst = max(worst, rel_err(grads.language[c], num))
    return worst
