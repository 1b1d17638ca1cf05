import numpy as np
import pytest

from singanno.annotation import (
    DEFAULT_STYLE_VOCABS,
    N_PITCH_CLASSES,
    STYLE_ATTRIBUTES,
    FrameSpec,
)
from singanno.posterior import PosteriorGrid


@pytest.fixture
def spec():
    return FrameSpec()


def make_random_grid(T, vocab, rng, n_phonemes=3):
    """Uniformly random but well-formed posterior grid for DP tests."""
    V = len(vocab)
    return PosteriorGrid(
        spec=FrameSpec(),
        phoneme_vocab=tuple(vocab),
        phoneme_logprob=np.log(rng.dirichlet(np.ones(V), size=T)).astype(np.float32),
        silence_logprob=np.log(rng.uniform(0.001, 1.0, size=T)).astype(np.float32),
        boundary_prob=rng.uniform(0.0, 1.0, size=T).astype(np.float32),
        note_boundary_prob=rng.uniform(0.0, 1.0, size=T).astype(np.float32),
        pitch_logprob=np.log(rng.dirichlet(np.ones(N_PITCH_CLASSES), size=T)).astype(
            np.float32
        ),
        technique_prob=rng.uniform(size=(n_phonemes, 9)).astype(np.float32),
        style_prob={
            a: rng.dirichlet(np.ones(len(DEFAULT_STYLE_VOCABS[a]))).astype(np.float32)
            for a in STYLE_ATTRIBUTES
        },
    )
