"""Forced alignment of a known phoneme sequence to frame posteriors.

The lattice has 2L+1 states: even indices are blanks that absorb silence
frames, odd index 2j+1 is phoneme j. Legal moves from frame t-1 to t keep
the state (STAY), advance by one (STEP), or advance by two (SKIP). A SKIP
jumps from a phoneme straight to the next phoneme over the intervening
blank and is legal only when the two labels differ, so no phoneme can ever
be deleted from the path. Transitions are gated by the frame-boundary
posterior: STAY adds log(1 - p_bd), STEP and SKIP add log(p_bd).

Scores are log domain throughout; probabilities are floored at 1e-10
before the log so a 50k-frame utterance cannot underflow. The inner DP
loop is JIT-compiled; the score matrix is kept as two rolling rows while
the int8 backtracking matrix is stored in full, so a five-minute utterance
with 600 phonemes needs well under 512 MB.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum

import numpy as np
from numba import njit

from .annotation import FrameSpec, PhonemeSegment, frame_to_time, is_silence
from .ops import LOG_FLOOR
from .posterior import PosteriorGrid

NEG_INF = -np.inf


class Transition(IntEnum):
    STAY = 0
    STEP = 1
    SKIP = 2


@dataclass
class AlignmentLattice:
    scores: np.ndarray | None  # [T, 2L+1] float64, None when not retained
    backpointers: np.ndarray  # [T, 2L+1] int8 transition codes
    final_scores: np.ndarray  # [2L+1] float64 scores at the last frame


@dataclass(frozen=True)
class AlignmentPath:
    states: np.ndarray  # [T] int32, non-decreasing
    score: float

    @property
    def n_frames(self) -> int:
        return self.states.shape[0]


def token_ids(grid: PosteriorGrid, phonemes) -> np.ndarray:
    lookup = {p: i for i, p in enumerate(grid.phoneme_vocab)}
    try:
        return np.array([lookup[p] for p in phonemes], dtype=np.int64)
    except KeyError as exc:
        raise KeyError(f"phoneme {exc.args[0]!r} not in grid vocabulary") from exc


def _prepared_scores(grid: PosteriorGrid, phonemes):
    """Floored emission and transition log-scores shared by the DP and the
    exhaustive search, so both optimize the identical objective."""
    # emissions stay float32 (135 MB at five minutes x 600 phonemes); the
    # DP accumulates them into float64 rows
    ids = token_ids(grid, phonemes)
    emis_ph = np.maximum(grid.phoneme_logprob[:, ids], np.float32(LOG_FLOOR))
    emis_sil = np.maximum(grid.silence_logprob, np.float32(LOG_FLOOR))
    bd = np.clip(grid.boundary_prob.astype(np.float64), 1e-10, 1.0 - 1e-10)
    log_bd = np.log(bd)
    log_not_bd = np.log1p(-bd)

    labels = list(phonemes)
    S = 2 * len(labels) + 1
    skip_ok = np.zeros(S, dtype=np.bool_)
    for k in range(3, S, 2):
        skip_ok[k] = labels[(k - 1) // 2] != labels[(k - 3) // 2]
    return emis_ph, emis_sil, log_bd, log_not_bd, skip_ok


def emission_score(grid: PosteriorGrid, t: int, k: int, phonemes) -> float:
    """Log-score of state k emitting frame t: the phoneme posterior for odd
    (phoneme) states, the silence posterior for even (blank) states."""
    L = len(phonemes)
    if not 0 <= t < grid.n_frames:
        raise IndexError(f"frame {t} out of range")
    if not 0 <= k < 2 * L + 1:
        raise IndexError(f"state {k} out of range")
    if k % 2 == 1:
        ids = token_ids(grid, phonemes)
        return float(max(grid.phoneme_logprob[t, ids[(k - 1) // 2]], LOG_FLOOR))
    return float(max(grid.silence_logprob[t], LOG_FLOOR))


@njit(cache=True)
def _viterbi_kernel(emis_ph, emis_sil, log_bd, log_not_bd, skip_ok, backptr):
    T = emis_ph.shape[0]
    L = emis_ph.shape[1]
    S = 2 * L + 1
    prev = np.full(S, NEG_INF)
    cur = np.empty(S)
    prev[0] = emis_sil[0]
    prev[1] = emis_ph[0, 0]
    for t in range(1, T):
        lb = log_bd[t]
        lnb = log_not_bd[t]
        for k in range(S):
            best = prev[k] + lnb
            code = 0
            if k >= 1:
                cand = prev[k - 1] + lb
                if cand > best:
                    best = cand
                    code = 1
            if k >= 2 and skip_ok[k]:
                cand = prev[k - 2] + lb
                if cand > best:
                    best = cand
                    code = 2
            if k % 2 == 1:
                cur[k] = best + emis_ph[t, (k - 1) // 2]
            else:
                cur[k] = best + emis_sil[t]
            backptr[t, k] = code
        prev, cur = cur, prev
    return prev


def forward_lattice(grid: PosteriorGrid, phonemes, keep_scores: bool = False) -> AlignmentLattice:
    """Run the forward DP; keep_scores retains the full score matrix (only
    sensible for small instances)."""
    L = len(phonemes)
    T = grid.n_frames
    if L < 1:
        raise ValueError("need at least one phoneme")
    if T < L:
        raise ValueError(f"{T} frames cannot host {L} phonemes")

    emis_ph, emis_sil, log_bd, log_not_bd, skip_ok = _prepared_scores(grid, phonemes)
    S = 2 * L + 1
    backptr = np.zeros((T, S), dtype=np.int8)

    if not keep_scores:
        final = _viterbi_kernel(emis_ph, emis_sil, log_bd, log_not_bd, skip_ok, backptr)
        return AlignmentLattice(scores=None, backpointers=backptr, final_scores=final)

    scores = np.full((T, S), NEG_INF)
    scores[0, 0] = emis_sil[0]
    scores[0, 1] = emis_ph[0, 0]
    for t in range(1, T):
        for k in range(S):
            best, code = scores[t - 1, k] + log_not_bd[t], 0
            if k >= 1 and scores[t - 1, k - 1] + log_bd[t] > best:
                best, code = scores[t - 1, k - 1] + log_bd[t], 1
            if k >= 2 and skip_ok[k] and scores[t - 1, k - 2] + log_bd[t] > best:
                best, code = scores[t - 1, k - 2] + log_bd[t], 2
            emis = emis_ph[t, (k - 1) // 2] if k % 2 else emis_sil[t]
            scores[t, k] = best + emis
            backptr[t, k] = code
    return AlignmentLattice(scores=scores, backpointers=backptr, final_scores=scores[-1])


def _backtrack(lattice: AlignmentLattice, n_states: int) -> AlignmentPath:
    final = lattice.final_scores
    # end in the last phoneme state or the trailing blank; phoneme wins ties
    end_phoneme, end_blank = n_states - 2, n_states - 1
    k = end_phoneme if final[end_phoneme] >= final[end_blank] else end_blank
    score = float(final[k])
    if not np.isfinite(score):
        raise ValueError("no feasible alignment path")

    T = lattice.backpointers.shape[0]
    states = np.empty(T, dtype=np.int32)
    states[T - 1] = k
    for t in range(T - 1, 0, -1):
        k -= int(lattice.backpointers[t, k])
        states[t - 1] = k
    return AlignmentPath(states=states, score=score)


def viterbi_align(grid: PosteriorGrid, phonemes) -> AlignmentPath:
    """Best-scoring alignment of the phoneme sequence to the grid."""
    lattice = forward_lattice(grid, phonemes)
    return _backtrack(lattice, 2 * len(phonemes) + 1)


BRUTE_FORCE_MAX_FRAMES = 12
BRUTE_FORCE_MAX_PHONEMES = 4


def brute_force_align(grid: PosteriorGrid, phonemes) -> AlignmentPath:
    """Exhaustive-enumeration oracle for tiny instances. Scores every legal
    monotone state sequence with the same emission/transition terms as the
    DP and returns the best; ties resolve exactly as the DP backtrace does.
    """
    L = len(phonemes)
    T = grid.n_frames
    if T > BRUTE_FORCE_MAX_FRAMES or L > BRUTE_FORCE_MAX_PHONEMES:
        raise ValueError(
            f"instance too large for enumeration (T={T}, L={L}); "
            f"bound is T<={BRUTE_FORCE_MAX_FRAMES}, L<={BRUTE_FORCE_MAX_PHONEMES}"
        )
    if L < 1 or T < L:
        raise ValueError("infeasible instance")

    emis_ph, emis_sil, log_bd, log_not_bd, skip_ok = _prepared_scores(grid, phonemes)
    S = 2 * L + 1

    def emis(t, k):
        return emis_ph[t, (k - 1) // 2] if k % 2 else emis_sil[t]

    best_key = None
    best_path = None

    stack = [(0, [0], emis(0, 0)), (0, [1], emis(0, 1))]
    while stack:
        t, path, score = stack.pop()
        k = path[-1]
        if t == T - 1:
            if k not in (S - 2, S - 1):
                continue
            # mirror the DP preferences: phoneme end state beats the blank,
            # then later transitions (larger states earlier in the
            # right-to-left reading) win
            key = (score, 1 if k == S - 2 else 0, tuple(reversed(path[:-1])))
            if best_key is None or key > best_key:
                best_key = key
                best_path = path
            continue
        for code, nxt in ((0, k), (1, k + 1), (2, k + 2)):
            if nxt >= S:
                continue
            if code == 2 and not skip_ok[nxt]:
                continue
            gate = log_not_bd[t + 1] if code == 0 else log_bd[t + 1]
            stack.append((t + 1, path + [nxt], score + gate + emis(t + 1, nxt)))

    if best_path is None:
        raise ValueError("no feasible alignment path")
    return AlignmentPath(states=np.array(best_path, dtype=np.int32), score=float(best_key[0]))


def path_runs(path: AlignmentPath) -> list[tuple[int, int, int]]:
    """Collapse the per-frame states into (state, start_frame, end_frame)
    runs with end exclusive."""
    states = path.states
    runs = []
    start = 0
    for t in range(1, len(states)):
        if states[t] != states[t - 1]:
            runs.append((int(states[t - 1]), start, t))
            start = t
    runs.append((int(states[-1]), start, len(states)))
    return runs


def path_segments(path: AlignmentPath, phonemes) -> list[tuple[int | None, int, int]]:
    """(token_index, start_frame, end_frame) per decoded segment, with None
    marking a standalone blank run.

    Blank runs bordering an explicit silence token are absorbed into that
    token's segment: both emit the silence posterior, so splitting them
    would manufacture a phantom segment that no annotation distinguishes.
    Blank runs between two speech phonemes stay standalone.
    """
    labels = list(phonemes)

    def silent(tok: int | None) -> bool:
        return tok is not None and is_silence(labels[tok])

    raw = [
        ((state - 1) // 2 if state % 2 else None, start, end)
        for state, start, end in path_runs(path)
    ]
    merged: list[list] = []
    pending_start: int | None = None
    for j, (tok, start, end) in enumerate(raw):
        if pending_start is not None:
            start = pending_start
            pending_start = None
        if tok is None:
            if merged and silent(merged[-1][0]):
                merged[-1][2] = end
                continue
            nxt = raw[j + 1][0] if j + 1 < len(raw) else None
            if silent(nxt):
                pending_start = start
                continue
        merged.append([tok, start, end])
    return [(tok, start, end) for tok, start, end in merged]


def derive_boundaries(
    path: AlignmentPath,
    phonemes,
    word_indices,
    spec: FrameSpec,
    silence_label: str = "<SP>",
) -> tuple[list[PhonemeSegment], list[tuple[float, float]]]:
    """Convert a path into phoneme segments and word spans.

    Standalone blank runs become silence segments labelled
    `silence_label`. Word spans are the union of their member phonemes,
    returned in word order as (onset, offset) seconds.
    """
    labels = list(phonemes)
    word_of = list(word_indices)
    segments: list[PhonemeSegment] = []
    word_lo: dict[int, float] = {}
    word_hi: dict[int, float] = {}

    for tok, start, end in path_segments(path, phonemes):
        onset, offset = frame_to_time(start, spec), frame_to_time(end, spec)
        if tok is None:
            segments.append(PhonemeSegment(silence_label, onset, offset, None))
            continue
        widx = None if is_silence(labels[tok]) else word_of[tok]
        segments.append(PhonemeSegment(labels[tok], onset, offset, widx))
        if widx is not None:
            word_lo[widx] = min(word_lo.get(widx, onset), onset)
            word_hi[widx] = max(word_hi.get(widx, offset), offset)

    word_spans = [(word_lo[w], word_hi[w]) for w in sorted(word_lo)]
    return segments, word_spans
