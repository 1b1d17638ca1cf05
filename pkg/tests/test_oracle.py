import numpy as np
import pytest

from singanno.annotation import (
    FrameSpec,
    REST_CLASS,
    is_silence,
    time_to_frame,
    validate,
)
from singanno.oracle import (
    GeneratorConfig,
    OracleConfig,
    random_annotation,
    synthesize,
)

SPEC = FrameSpec()


class TestOracleConfig:
    def test_range_checks(self):
        with pytest.raises(ValueError):
            OracleConfig(label_smoothing=1.0)
        with pytest.raises(ValueError):
            OracleConfig(boundary_sharpness=0.0)
        with pytest.raises(ValueError):
            OracleConfig(technique_flip_prob=0.5)
        with pytest.raises(ValueError):
            OracleConfig(boundary_jitter_frames=-1)


class TestSynthesize:
    def test_noiseless_argmax_reproduces_annotation(self):
        a = random_annotation(GeneratorConfig(n_phones=7, seed=1))
        grid = synthesize(a, SPEC, OracleConfig(seed=1))
        vocab = grid.phoneme_vocab
        for seg in a.phonemes:
            for t in range(time_to_frame(seg.onset, SPEC), time_to_frame(seg.offset, SPEC)):
                assert vocab[int(grid.phoneme_logprob[t].argmax())] == seg.label
                assert (np.exp(grid.silence_logprob[t]) > 0.5) == is_silence(seg.label)
        for note in a.notes:
            for t in range(time_to_frame(note.onset, SPEC), time_to_frame(note.offset, SPEC)):
                assert int(grid.pitch_logprob[t].argmax()) == note.pitch
        # frames not inside any note peak on the rest class
        covered = np.zeros(grid.n_frames, dtype=bool)
        for note in a.notes:
            covered[time_to_frame(note.onset, SPEC) : time_to_frame(note.offset, SPEC)] = True
        for t in np.flatnonzero(~covered):
            assert int(grid.pitch_logprob[t].argmax()) == REST_CLASS

    def test_deterministic(self):
        a = random_annotation(GeneratorConfig(n_phones=6, seed=3))
        cfg = OracleConfig(
            label_smoothing=0.4,
            boundary_sharpness=0.9,
            boundary_jitter_frames=3,
            pitch_confusion=0.3,
            technique_flip_prob=0.2,
            style_confusion=0.3,
            seed=12,
        )
        g1 = synthesize(a, SPEC, cfg)
        g2 = synthesize(a, SPEC, cfg)
        assert g1.phoneme_logprob.tobytes() == g2.phoneme_logprob.tobytes()
        assert g1.boundary_prob.tobytes() == g2.boundary_prob.tobytes()
        assert g1.pitch_logprob.tobytes() == g2.pitch_logprob.tobytes()
        assert g1.technique_prob.tobytes() == g2.technique_prob.tobytes()

    def test_smoothing_formula(self):
        eps = 0.3
        a = random_annotation(GeneratorConfig(n_phones=2, seed=4))
        grid = synthesize(a, SPEC, OracleConfig(label_smoothing=eps, seed=4))
        V = len(grid.phoneme_vocab)
        label_id = grid.phoneme_vocab.index(a.phonemes[0].label)
        p = float(np.exp(grid.phoneme_logprob[0, label_id]))
        assert p == pytest.approx(1 - eps + eps / V, abs=1e-6)
        other = (label_id + 1) % V
        assert float(np.exp(grid.phoneme_logprob[0, other])) == pytest.approx(
            eps / V, abs=1e-6
        )

    def test_posterior_rows_are_distributions(self):
        a = random_annotation(GeneratorConfig(n_phones=8, seed=6))
        grid = synthesize(a, SPEC, OracleConfig(label_smoothing=0.25, seed=6))
        grid.check()  # row sums within 1e-4
        sums = np.exp(grid.phoneme_logprob.astype(np.float64)).sum(axis=1)
        assert np.all(np.abs(sums - 1.0) < 1e-6)

    def test_rejects_subframe_phonemes(self):
        a = random_annotation(GeneratorConfig(n_phones=2, seed=7))
        tiny = FrameSpec(sample_rate=24000, hop=24000, win=24000)  # one frame per second
        with pytest.raises(ValueError, match="less than one frame"):
            synthesize(a, tiny, OracleConfig(seed=0))


class TestRandomAnnotation:
    def test_single_phone_single_note(self):
        a = random_annotation(GeneratorConfig(n_phones=1, seed=0))
        assert len(a.phonemes) == 1
        assert len(a.notes) == 1
        assert a.phonemes[0].onset == 0.0
        assert a.phonemes[0].offset == a.duration
        assert a.notes[0].onset == 0.0 and a.notes[0].offset == a.duration

    def test_200_seeds_all_validate(self):
        for seed in range(200):
            a = random_annotation(GeneratorConfig(n_phones=1 + seed % 20, seed=seed))
            assert validate(a) == [], seed

    def test_reproducible(self):
        a = random_annotation(GeneratorConfig(n_phones=9, seed=33))
        b = random_annotation(GeneratorConfig(n_phones=9, seed=33))
        assert a.phonemes == b.phonemes
        assert a.notes == b.notes
        assert a.techniques == b.techniques
        assert a.style == b.style

    def test_no_adjacent_equal_labels(self):
        for seed in range(50):
            a = random_annotation(GeneratorConfig(n_phones=15, seed=seed))
            labels = [s.label for s in a.phonemes]
            assert all(x != y for x, y in zip(labels, labels[1:])), seed

    def test_tempo_scales_durations(self):
        slow = random_annotation(GeneratorConfig(n_phones=20, seed=5, tempo=60))
        fast = random_annotation(GeneratorConfig(n_phones=20, seed=5, tempo=240))
        assert slow.duration > fast.duration
