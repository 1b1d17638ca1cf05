#!/usr/bin/env python3
"""Time the forced aligner on long synthetic utterances and report the DP
buffer sizes. The default setting is five minutes of audio at the toolkit
frame rate with 600 phonemes."""

import argparse
import time

import numpy as np

from singanno.align import viterbi_align
from singanno.annotation import (
    DEFAULT_STYLE_VOCABS,
    N_PITCH_CLASSES,
    STYLE_ATTRIBUTES,
    FrameSpec,
)
from singanno.posterior import PosteriorGrid


def random_grid(T, vocab, n_phonemes, rng):
    V = len(vocab)
    return PosteriorGrid(
        spec=FrameSpec(),
        phoneme_vocab=vocab,
        phoneme_logprob=np.log(rng.dirichlet(np.ones(V), size=T)).astype(np.float32),
        silence_logprob=np.log(rng.uniform(0.001, 1.0, size=T)).astype(np.float32),
        boundary_prob=rng.uniform(size=T).astype(np.float32),
        note_boundary_prob=rng.uniform(size=T).astype(np.float32),
        pitch_logprob=np.full(
            (T, N_PITCH_CLASSES), -np.log(N_PITCH_CLASSES), np.float32
        ),
        technique_prob=rng.uniform(size=(n_phonemes, 9)).astype(np.float32),
        style_prob={
            a: rng.dirichlet(np.ones(len(DEFAULT_STYLE_VOCABS[a]))).astype(np.float32)
            for a in STYLE_ATTRIBUTES
        },
    )


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--frames", type=int, default=56250)
    parser.add_argument("--phones", type=int, default=600)
    parser.add_argument("--vocab-size", type=int, default=30)
    parser.add_argument("--repeats", type=int, default=3)
    parser.add_argument("--seed", type=int, default=7)
    args = parser.parse_args()

    rng = np.random.default_rng(args.seed)
    vocab = tuple(f"p{i}" for i in range(args.vocab_size))
    grid = random_grid(args.frames, vocab, args.phones, rng)
    tokens = [vocab[i] for i in rng.integers(0, args.vocab_size, size=args.phones)]

    # first call includes the JIT compile; report it separately
    t0 = time.perf_counter()
    viterbi_align(grid, tokens)
    print(f"first call (with JIT compile): {time.perf_counter() - t0:.3f}s")

    times = []
    for _ in range(args.repeats):
        t0 = time.perf_counter()
        path = viterbi_align(grid, tokens)
        times.append(time.perf_counter() - t0)
    n_states = 2 * args.phones + 1
    buffers_mb = (args.frames * n_states + args.frames * args.phones * 4) / 1e6
    print(f"T={args.frames} L={args.phones}: best {min(times):.3f}s over {args.repeats} runs")
    print(f"DP buffers (int8 backtrack + float32 emissions): {buffers_mb:.0f} MB")
    print(f"path covers states 0..{int(path.states.max())}, score {path.score:.1f}")


if __name__ == "__main__":
    main()
