"""Sequence-aware mixing of tower outputs into intermediate predictions.

Two strategies plus a plain-attention baseline:

* prefix-sum ("pseudo-autoregressive"): frame i is the last observed pose
  plus the running sum of predicted per-frame offsets 1..i;
* anchor: frame i is a per-spatial-dimension convex combination of anchor
  poses, with weights from a causally masked softmax over query/key scores,
  confining each coordinate to the anchors' bounding interval;
* plain: same score/combination machinery with no causal mask.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import DimensionError

__all__ = [
    "AttentionConfig",
    "MixMatrix",
    "pseudo_autoregressive",
    "score_matrix",
    "anchor_combination",
    "plain_attention",
]

STRATEGIES = ("pseudo_autoregressive", "anchor", "plain", "none")


@dataclass(frozen=True)
class AttentionConfig:
    strategy: str = "anchor"
    anchor_count: int | None = None   # None means one anchor per input frame
    scale: float | None = None        # None means sqrt(V), set at model build

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValueError(
                f"unknown strategy {self.strategy!r}; expected one of {STRATEGIES}"
            )
        if self.strategy == "anchor" and self.anchor_count is not None:
            if self.anchor_count < 1:
                raise ValueError(f"anchor_count must be >= 1, got {self.anchor_count}")


@dataclass(frozen=True)
class MixMatrix:
    """Per-spatial-dimension stochastic weights, [batch, 3, T, n_anchors]."""

    weights: ad.Tensor
    mask: np.ndarray


def pseudo_autoregressive(offsets, last_frame):
    """Prefix-sum offsets over time, then add the last observed frame.

    offsets: [batch, T, V, 3]; last_frame: [batch, V, 3].
    Equivalent to multiplying by a lower-triangular all-ones T x T matrix.
    """
    if offsets.shape[-2:] != last_frame.shape[-2:]:
        raise DimensionError(
            f"offsets {offsets.shape} and last frame {last_frame.shape} disagree"
        )
    accumulated = ad.cumsum(offsets, axis=1)
    b, _, v, c = offsets.shape
    return ad.add(accumulated, ad.reshape(last_frame, (b, 1, v, c)))


def causal_mask(frames, anchors):
    """True where anchor k may feed frame i (k <= i), shape [T, n_a]."""
    i = np.arange(frames)[:, None]
    k = np.arange(anchors)[None, :]
    return k <= i


def score_matrix(q, key, config, anchor_frames=None, causal=True):
    """Per-dimension mixing weights from query/key towers.

    q, key: [batch, T, V, 3]. Scores contract over joints separately for
    each spatial dimension; a masked softmax over the anchor axis yields
    three row-stochastic T x n_a matrices per batch element.

    anchor_frames selects which key frames serve as anchors (default: all).
    Causal masking only applies when anchors are in one-to-one frame
    correspondence (n_a == T).
    """
    if q.shape != key.shape:
        raise DimensionError(f"query {q.shape} and key {key.shape} disagree")
    b, t, v, _ = q.shape
    scale = config.scale if config.scale is not None else float(np.sqrt(v))

    kv = key if anchor_frames is None else _take_frames(key, anchor_frames)
    n_a = kv.shape[1]

    # [B, T, V, 3] -> [B, 3, T, V], keys transposed to [B, 3, V, n_a].
    qd = ad.transpose(q, (0, 3, 1, 2))
    kd = ad.transpose(kv, (0, 3, 2, 1))
    scores = ad.mul(ad.matmul(qd, kd), ad.constant(1.0 / scale))

    if causal and n_a == t:
        mask = causal_mask(t, n_a)
    else:
        mask = np.ones((t, n_a), dtype=bool)
    full_mask = np.broadcast_to(mask, (b, 3, t, n_a))
    weights = ad.masked_softmax(scores, full_mask, axis=-1)
    return MixMatrix(weights=weights, mask=mask)


def _take_frames(tensor, frames):
    """Differentiable selection of frames along axis 1 via a 0/1 matrix."""
    t = tensor.shape[1]
    sel = np.zeros((len(frames), t))
    sel[np.arange(len(frames)), frames] = 1.0
    moved = ad.transpose(tensor, (0, 2, 3, 1))        # [B, V, 3, T]
    picked = ad.matmul(moved, ad.constant(sel.T))     # [B, V, 3, n_a]
    return ad.transpose(picked, (0, 3, 1, 2))


def anchor_combination(mix, anchors):
    """out[b, i, v, d] = sum_k w[b, d, i, k] * anchor[b, k, v, d]."""
    if mix.weights.shape[-1] != anchors.shape[1]:
        raise DimensionError(
            f"mix expects {mix.weights.shape[-1]} anchors, got {anchors.shape[1]}"
        )
    ad_anchors = ad.transpose(anchors, (0, 3, 1, 2))   # [B, 3, n_a, V]
    mixed = ad.matmul(mix.weights, ad_anchors)         # [B, 3, T, V]
    return ad.transpose(mixed, (0, 2, 3, 1))


def plain_attention(q, key, val, config):
    """Score/combination path with no causal mask; values used directly."""
    mix = score_matrix(q, key, config, causal=False)
    return anchor_combination(mix, val)
