import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from singanno.annotation import FrameSpec, REST_CLASS
from singanno.notes import (
    NoteDecoderConfig,
    cif_aggregate,
    decode_note_boundaries,
    decode_pitch,
    hz_to_midi,
    midi_to_hz,
)
from singanno.oracle import GeneratorConfig, OracleConfig, random_annotation, synthesize
from singanno.pipeline import Lyric, decode_annotation

SPEC = FrameSpec()


class TestBoundaryDecode:
    def test_words_only(self):
        seg = decode_note_boundaries(np.zeros(100), [0, 50, 100])
        assert seg.boundaries == (0, 50, 100)

    def test_single_peak(self):
        prob = np.zeros(100)
        prob[30] = 0.9
        seg = decode_note_boundaries(prob, [0, 100])
        assert seg.boundaries == (0, 30, 100)

    def test_nms_keeps_higher_peak(self):
        prob = np.zeros(100)
        prob[30] = 0.7
        prob[33] = 0.9
        cfg = NoteDecoderConfig(threshold=0.5, min_gap_frames=8)
        seg = decode_note_boundaries(prob, [0, 100], cfg)
        assert 33 in seg.boundaries and 30 not in seg.boundaries

    def test_word_boundaries_always_present(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            prob = rng.uniform(size=80)
            words = sorted({0, 80} | set(rng.integers(1, 80, size=3).tolist()))
            seg = decode_note_boundaries(prob, words)
            assert set(words) <= set(seg.boundaries)
            assert seg.boundaries[0] == 0 and seg.boundaries[-1] == 80

    def test_short_segment_merged_by_weaker_edge(self):
        prob = np.zeros(100)
        prob[40] = 0.6
        prob[42] = 0.8  # 2 apart < min_gap 4: weaker 40 must go
        seg = decode_note_boundaries(prob, [0, 100])
        assert 42 in seg.boundaries and 40 not in seg.boundaries


class TestCifAggregate:
    def test_zero_projection_is_mean(self):
        rng = np.random.default_rng(0)
        x = rng.normal(size=(5, 3))
        assert np.allclose(cif_aggregate(x, np.zeros(3)), x.mean(axis=0))

    def test_single_row_identity(self):
        x = np.array([[2.0, -1.0]])
        assert np.allclose(cif_aggregate(x, np.array([5.0, -3.0])), x[0])

    def test_hand_computed_two_rows(self):
        x = np.array([[1.0, 0.0], [0.0, 1.0]])
        w = np.array([2.0, -1.0])
        logits = x @ w  # [2, -1]
        weights = np.exp(logits - logits.max())
        weights /= weights.sum()
        expected = weights @ x
        assert np.allclose(cif_aggregate(x, w), expected, atol=1e-9)

    @given(
        arrays(np.float64, (4, 2), elements=st.floats(-3, 3)),
        arrays(np.float64, (2,), elements=st.floats(-3, 3)),
    )
    @settings(max_examples=80)
    def test_output_in_convex_hull_bounds(self, x, w):
        out = cif_aggregate(x, w)
        assert np.all(out >= x.min(axis=0) - 1e-12)
        assert np.all(out <= x.max(axis=0) + 1e-12)


class TestPitchDecode:
    def _noiseless(self, seed, n_phones=6):
        a = random_annotation(GeneratorConfig(n_phones=n_phones, seed=seed))
        grid = synthesize(a, SPEC, OracleConfig(seed=seed))
        return a, grid

    def test_single_note_round_trip(self):
        a, grid = self._noiseless(5, n_phones=1)
        d = decode_annotation(grid, Lyric.from_annotation(a))
        assert d.notes == a.notes
        assert len(d.notes) == 1

    def test_two_note_round_trip(self):
        for seed in range(10):
            a, grid = self._noiseless(seed)
            d = decode_annotation(grid, Lyric.from_annotation(a))
            assert d.notes == a.notes

    def test_rest_segments_dropped(self, spec):
        from conftest import make_random_grid

        grid = make_random_grid(20, ("a",), np.random.default_rng(0), 1)
        rest_row = np.full(129, np.log(1e-4), dtype=np.float32)
        rest_row[REST_CLASS] = np.float32(0.0)
        grid.pitch_logprob = np.tile(rest_row, (20, 1))
        from singanno.notes import NoteSegmentation

        seg = NoteSegmentation(boundaries=(0, 10, 20), forced=frozenset({0, 20}))
        assert decode_pitch(grid, seg) == []

    def test_argmax_invariant_to_constant_shift(self, spec):
        from conftest import make_random_grid
        from singanno.notes import NoteSegmentation

        grid = make_random_grid(16, ("a",), np.random.default_rng(3), 1)
        seg = NoteSegmentation(boundaries=(0, 8, 16), forced=frozenset({0, 16}))
        base = decode_pitch(grid, seg)
        grid.pitch_logprob = grid.pitch_logprob + np.float32(2.5)
        shifted = decode_pitch(grid, seg)
        assert base == shifted

    def test_majority_silence_excluded(self, spec):
        from conftest import make_random_grid
        from singanno.notes import NoteSegmentation

        grid = make_random_grid(10, ("a",), np.random.default_rng(4), 1)
        peak = np.full(129, np.log(1e-4), dtype=np.float32)
        peak[60] = np.float32(0.0)
        grid.pitch_logprob = np.tile(peak, (10, 1))
        seg = NoteSegmentation(boundaries=(0, 10), forced=frozenset({0, 10}))
        assert len(decode_pitch(grid, seg, silence_spans=[])) == 1
        assert decode_pitch(grid, seg, silence_spans=[(0, 6)]) == []
        assert len(decode_pitch(grid, seg, silence_spans=[(0, 6)], exclude_silent=False)) == 1


class TestHzToMidi:
    def test_a4(self):
        assert hz_to_midi(440.0) == pytest.approx(69.0, abs=1e-12)

    def test_octave(self):
        assert hz_to_midi(880.0) == pytest.approx(81.0, abs=1e-12)

    def test_semitone_above_a4(self):
        assert hz_to_midi(466.16) == pytest.approx(70.00, abs=0.01)

    def test_rejects_non_positive(self):
        with pytest.raises(ValueError):
            hz_to_midi(0.0)

    @given(st.floats(min_value=20.0, max_value=8000.0))
    def test_inverse(self, f):
        assert midi_to_hz(hz_to_midi(f)) == pytest.approx(f, rel=1e-9)
