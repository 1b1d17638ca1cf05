import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from singanno.annotation import DEFAULT_STYLE_VOCABS, GlobalStyle, FrameSpec
from singanno.oracle import GeneratorConfig, OracleConfig, random_annotation, synthesize
from singanno.style import (
    cross_attention_pool,
    decode_global_style,
    decode_techniques,
    render_caption,
)


class TestDecodeTechniques:
    def test_threshold(self):
        prob = np.zeros((2, 9))
        prob[0, 0] = 0.7
        prob[1, 0] = 0.3
        flags = decode_techniques(prob, ["a", "b"]).flags
        assert flags[0, 0] == 1 and flags[1, 0] == 0

    def test_silence_forced_zero(self):
        prob = np.full((1, 9), 0.9)
        flags = decode_techniques(prob, ["<SP>"]).flags
        assert not flags.any()

    def test_wrong_column_count(self):
        with pytest.raises(ValueError):
            decode_techniques(np.zeros((2, 5)), ["a", "b"])

    def test_noiseless_oracle_round_trip(self):
        a = random_annotation(GeneratorConfig(n_phones=12, seed=2))
        grid = synthesize(a, FrameSpec(), OracleConfig(seed=2))
        out = decode_techniques(grid.technique_prob, [s.label for s in a.phonemes])
        assert out == a.techniques

    @given(arrays(np.float64, (3, 9), elements=st.floats(0, 1)))
    @settings(max_examples=60)
    def test_monotone_in_probability(self, prob):
        base = decode_techniques(prob, ["a", "b", "c"]).flags
        raised = decode_techniques(np.minimum(prob + 0.2, 1.0), ["a", "b", "c"]).flags
        assert np.all(raised >= base)


class TestCrossAttention:
    def test_single_key_identity(self):
        kv = np.array([[3.0, -1.0, 2.0]])
        q = np.random.default_rng(0).normal(size=(4, 3))
        out = cross_attention_pool(q, kv)
        assert np.array_equal(out, np.tile(kv, (4, 1)))

    def test_identical_keys(self):
        kv = np.tile([[1.0, 2.0]], (6, 1))
        out = cross_attention_pool(np.zeros((2, 2)), kv)
        assert np.allclose(out, [[1.0, 2.0], [1.0, 2.0]])

    def test_hand_computed_combination(self):
        q = np.array([[1.0, 0.0]])
        kv = np.array([[1.0, 0.0], [0.0, 1.0]])
        logits = (q @ kv.T / np.sqrt(2.0))[0]
        w = np.exp(logits - logits.max())
        w /= w.sum()
        expected = w @ kv
        assert np.allclose(cross_attention_pool(q, kv)[0], expected, atol=1e-9)

    def test_empty_keys_rejected(self):
        with pytest.raises(ValueError, match="empty"):
            cross_attention_pool(np.ones((1, 2)), np.ones((0, 2)))

    @given(
        arrays(np.float64, (2, 3), elements=st.floats(-4, 4)),
        arrays(np.float64, (5, 3), elements=st.floats(-4, 4)),
    )
    @settings(max_examples=60)
    def test_rows_in_value_hull_bounds(self, q, kv):
        out = cross_attention_pool(q, kv)
        assert np.all(out >= kv.min(axis=0) - 1e-12)
        assert np.all(out <= kv.max(axis=0) + 1e-12)


class TestGlobalStyle:
    def test_one_hot(self):
        probs = {
            "language": np.array([0.0, 1.0]),
            "gender": np.array([1.0, 0.0]),
            "emotion": np.array([0.0, 1.0]),
            "pace": np.array([0.0, 0.0, 1.0]),
            "range": np.array([0.0, 1.0, 0.0]),
        }
        style = decode_global_style(probs)
        assert style == GlobalStyle(language=1, gender=0, emotion=1, pace=2, range=1)

    def test_uniform_ties_to_zero(self):
        probs = {a: np.full(len(v), 1.0 / len(v)) for a, v in DEFAULT_STYLE_VOCABS.items()}
        assert decode_global_style(probs) == GlobalStyle()

    def test_shift_invariance(self):
        rng = np.random.default_rng(0)
        probs = {a: rng.uniform(size=len(v)) for a, v in DEFAULT_STYLE_VOCABS.items()}
        base = decode_global_style(probs)
        shifted = decode_global_style({a: p + 3.0 for a, p in probs.items()})
        assert base == shifted

    def test_length_mismatch(self):
        probs = {a: np.full(len(v), 0.5) for a, v in DEFAULT_STYLE_VOCABS.items()}
        probs["pace"] = np.array([0.5, 0.5])
        with pytest.raises(ValueError, match="pace"):
            decode_global_style(probs)

    def test_noiseless_round_trip(self):
        a = random_annotation(GeneratorConfig(n_phones=5, seed=9))
        grid = synthesize(a, FrameSpec(), OracleConfig(seed=9))
        assert decode_global_style(grid.style_prob, grid.style_vocabs) == a.style

    def test_caption(self):
        text = render_caption(GlobalStyle(language=1, gender=0, emotion=1, pace=2, range=0))
        assert text == "a female en singer, sad, fast pace, low range"
