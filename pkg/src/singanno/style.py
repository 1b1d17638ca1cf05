"""Technique and global-style decoding, plus the query/key cross-attention
pooling operator used to summarize frame features into per-task vectors.
"""

from __future__ import annotations

import numpy as np

from .annotation import (
    DEFAULT_STYLE_VOCABS,
    STYLE_ATTRIBUTES,
    TECHNIQUE_NAMES,
    GlobalStyle,
    TechniqueMatrix,
    is_silence,
)


def decode_techniques(
    technique_prob: np.ndarray, phonemes, threshold: float = 0.5
) -> TechniqueMatrix:
    """Threshold per-phone technique posteriors to binary flags; silence
    phonemes are always all-zero regardless of their posteriors."""
    prob = np.asarray(technique_prob, dtype=np.float64)
    if prob.ndim != 2 or prob.shape[1] != len(TECHNIQUE_NAMES):
        raise ValueError(
            f"technique posterior must be [L_p x {len(TECHNIQUE_NAMES)}], got {prob.shape}"
        )
    labels = list(phonemes)
    if prob.shape[0] != len(labels):
        raise ValueError("one posterior row per phoneme required")
    flags = (prob >= threshold).astype(np.uint8)
    for i, label in enumerate(labels):
        if is_silence(label):
            flags[i] = 0
    return TechniqueMatrix(flags)


def cross_attention_pool(queries: np.ndarray, keys_values: np.ndarray) -> np.ndarray:
    """Scaled dot-product attention with keys == values: each output row is
    a convex combination of the value rows."""
    q = np.asarray(queries, dtype=np.float64)
    kv = np.asarray(keys_values, dtype=np.float64)
    if q.ndim != 2 or kv.ndim != 2 or q.shape[1] != kv.shape[1]:
        raise ValueError("queries and keys/values must be 2-D with equal feature dims")
    if kv.shape[0] < 1:
        raise ValueError("empty key sequence")
    logits = q @ kv.T / np.sqrt(q.shape[1])
    logits -= logits.max(axis=1, keepdims=True)
    attn = np.exp(logits)
    attn /= attn.sum(axis=1, keepdims=True)
    return attn @ kv


def decode_global_style(
    style_prob: dict[str, np.ndarray],
    vocabs: dict[str, tuple[str, ...]] | None = None,
) -> GlobalStyle:
    """Argmax per attribute with ties going to the lowest index."""
    vocabs = vocabs or DEFAULT_STYLE_VOCABS
    picks = {}
    for attr in STYLE_ATTRIBUTES:
        vec = np.asarray(style_prob[attr], dtype=np.float64).reshape(-1)
        if vec.shape[0] != len(vocabs[attr]):
            raise ValueError(
                f"{attr}: posterior length {vec.shape[0]} != vocabulary size "
                f"{len(vocabs[attr])}"
            )
        picks[attr] = int(np.argmax(vec))
    return GlobalStyle(**picks)


def render_caption(
    style: GlobalStyle, vocabs: dict[str, tuple[str, ...]] | None = None
) -> str:
    """One-line template caption for a decoded global style."""
    names = style.names(vocabs)
    return (
        f"a {names['gender']} {names['language']} singer, {names['emotion']}, "
        f"{names['pace']} pace, {names['range']} range"
    )
