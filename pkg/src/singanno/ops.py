"""Deterministic tensor operators: frequency-chunked expert mixing, vector
quantization with commitment loss, boundary pooling, length regulation,
and the CTC/CE/BCE losses. All operate on plain numpy arrays; no training
or gradients are involved.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

PROB_FLOOR = 1e-10
LOG_FLOOR = float(np.log(PROB_FLOOR))


@dataclass(frozen=True)
class ExpertBank:
    """K affine experts, each owning one equal chunk of the feature axis."""

    weights: np.ndarray  # [K, d, d] applied as chunk @ weights[k]
    biases: np.ndarray  # [K, d]

    def __post_init__(self):
        if self.weights.ndim != 3 or self.weights.shape[1] != self.weights.shape[2]:
            raise ValueError("expert weights must be [K, d, d]")
        if self.biases.shape != self.weights.shape[:2]:
            raise ValueError("expert biases must be [K, d]")

    @property
    def n_experts(self) -> int:
        return self.weights.shape[0]

    @property
    def chunk_dim(self) -> int:
        return self.weights.shape[1]

    @classmethod
    def identity(cls, dim: int, n_experts: int = 4) -> "ExpertBank":
        if dim % n_experts:
            raise ValueError(f"feature dim {dim} not divisible by {n_experts} experts")
        d = dim // n_experts
        return cls(
            weights=np.broadcast_to(np.eye(d), (n_experts, d, d)).copy(),
            biases=np.zeros((n_experts, d)),
        )


def freq_moe(x: np.ndarray, bank: ExpertBank) -> np.ndarray:
    """Split the feature axis into equal chunks, run expert k on chunk k,
    and concatenate the outputs in order."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError("input must be [T, D]")
    K, d = bank.n_experts, bank.chunk_dim
    if x.shape[1] != K * d:
        raise ValueError(
            f"feature dim {x.shape[1]} not divisible into {K} chunks of {d}"
        )
    chunks = [
        x[:, k * d : (k + 1) * d] @ bank.weights[k] + bank.biases[k] for k in range(K)
    ]
    return np.concatenate(chunks, axis=1)


@dataclass(frozen=True)
class Codebook:
    entries: np.ndarray  # [K_codes, D]

    def __post_init__(self):
        if self.entries.ndim != 2 or self.entries.shape[0] < 1:
            raise ValueError("codebook must be [K_codes, D] with K_codes >= 1")
        if not np.all(np.isfinite(self.entries)):
            raise ValueError("codebook entries must be finite")


def vq_quantize(
    s: np.ndarray, codebook: Codebook
) -> tuple[np.ndarray, np.ndarray, float]:
    """Replace each row by its nearest codebook entry (Euclidean, lowest
    index on ties) and report the commitment loss, the mean squared
    distance moved."""
    s = np.asarray(s, dtype=np.float64)
    if s.ndim != 2 or s.shape[1] != codebook.entries.shape[1]:
        raise ValueError("input rows must match codebook dimensionality")
    d2 = ((s[:, None, :] - codebook.entries[None, :, :]) ** 2).sum(axis=2)
    indices = np.argmin(d2, axis=1)
    quantized = codebook.entries[indices]
    loss = float(np.mean((s - quantized) ** 2)) if s.size else 0.0
    return quantized, indices, loss


def boundary_pool(x: np.ndarray, boundaries) -> np.ndarray:
    """Average rows within each [b_l, b_{l+1}) span. Boundaries must be
    strictly increasing from 0 to len(x)."""
    x = np.asarray(x, dtype=np.float64)
    b = np.asarray(boundaries, dtype=np.int64)
    if b[0] != 0 or b[-1] != x.shape[0]:
        raise ValueError("boundaries must start at 0 and end at the frame count")
    if np.any(np.diff(b) <= 0):
        raise ValueError("empty segment: boundaries must be strictly increasing")
    return np.stack([x[b[l] : b[l + 1]].mean(axis=0) for l in range(len(b) - 1)])


def length_regulate(x: np.ndarray, seg_lengths, total: int | None = None) -> np.ndarray:
    """Repeat row l seg_lengths[l] times, restoring frame resolution."""
    x = np.asarray(x, dtype=np.float64)
    lengths = np.asarray(seg_lengths, dtype=np.int64)
    if lengths.ndim != 1 or lengths.shape[0] != x.shape[0]:
        raise ValueError("one length per segment row required")
    if np.any(lengths < 1):
        raise ValueError("segment lengths must be >= 1")
    if total is not None and int(lengths.sum()) != total:
        raise ValueError(
            f"segment lengths sum to {int(lengths.sum())}, expected {total}"
        )
    return np.repeat(x, lengths, axis=0)


def _logsumexp(values: np.ndarray, axis=None) -> np.ndarray:
    vmax = np.max(values, axis=axis, keepdims=True)
    vmax = np.where(np.isfinite(vmax), vmax, 0.0)
    out = np.log(np.sum(np.exp(values - vmax), axis=axis, keepdims=True)) + vmax
    return np.squeeze(out, axis=axis) if axis is not None else out.reshape(())


def ctc_min_frames(labels) -> int:
    labels = list(labels)
    repeats = sum(1 for a, b in zip(labels, labels[1:]) if a == b)
    return len(labels) + repeats


def ctc_loss(logprobs: np.ndarray, labels) -> float:
    """Negative log of the summed probability of every frame path that
    collapses to `labels`. The last class is the blank. Standard forward
    recursion over the 2U+1 padded label states, entirely in log domain.
    """
    logprobs = np.asarray(logprobs, dtype=np.float64)
    if logprobs.ndim != 2:
        raise ValueError("logprobs must be [T, n_classes]")
    T, n_classes = logprobs.shape
    blank = n_classes - 1
    labels = list(labels)
    if any(not 0 <= y < blank for y in labels):
        raise ValueError("labels must be non-blank class indices")
    if T < ctc_min_frames(labels):
        raise ValueError(
            f"label sequence needs at least {ctc_min_frames(labels)} frames, got {T}"
        )

    states = [blank]
    for y in labels:
        states += [y, blank]
    S = len(states)

    alpha = np.full(S, -np.inf)
    alpha[0] = logprobs[0, blank]
    if S > 1:
        alpha[1] = logprobs[0, states[1]]
    for t in range(1, T):
        prev = alpha
        stay = prev
        step = np.concatenate(([-np.inf], prev[:-1]))
        skip = np.full(S, -np.inf)
        for s in range(2, S):
            if s % 2 == 1 and states[s] != states[s - 2]:
                skip[s] = prev[s - 2]
        alpha = np.logaddexp(np.logaddexp(stay, step), skip) + logprobs[t, states]

    total = _logsumexp(alpha[-2:] if S > 1 else alpha[-1:], axis=0)
    if not np.isfinite(total):
        raise ValueError("no feasible path for label sequence")
    return float(-total)


def ce_loss(logprobs: np.ndarray, target: int, logits: bool = False) -> float:
    """Negative log-probability of the target class. Pass logits=True to
    apply a log-softmax first."""
    values = np.asarray(logprobs, dtype=np.float64)
    if not 0 <= target < values.shape[-1]:
        raise ValueError(f"target {target} out of range")
    if logits:
        values = values - _logsumexp(values, axis=-1)
    return float(-values[target])


def bce_loss(prob: float, target: int) -> float:
    if target not in (0, 1):
        raise ValueError("target must be 0 or 1")
    p = min(max(float(prob), PROB_FLOOR), 1.0 - PROB_FLOOR)
    return float(-(target * np.log(p) + (1 - target) * np.log(1.0 - p)))
