import numpy as np
import pytest

from singanno.align import (
    AlignmentPath,
    Transition,
    brute_force_align,
    derive_boundaries,
    emission_score,
    forward_lattice,
    path_segments,
    viterbi_align,
)
from singanno.annotation import FrameSpec, frame_to_time
from singanno.oracle import GeneratorConfig, OracleConfig, random_annotation, synthesize

from conftest import make_random_grid

SPEC = FrameSpec()
VOCAB = ("a", "b", "c", "d")


def _feasible_instance(rng, max_T=9, max_L=3):
    L = int(rng.integers(1, max_L + 1))
    tokens = [VOCAB[i] for i in rng.integers(0, len(VOCAB), size=L)]
    repeats = sum(1 for x, y in zip(tokens, tokens[1:]) if x == y)
    T = int(rng.integers(L + repeats, max_T))
    return make_random_grid(T, VOCAB, rng, L), tokens


class TestEmissionScore:
    def test_noiseless_inside_phoneme_is_zero(self):
        a = random_annotation(GeneratorConfig(n_phones=3, seed=0))
        grid = synthesize(a, SPEC, OracleConfig(seed=0))
        tokens = [s.label for s in a.phonemes]
        # first frame belongs to token 0, state 1
        assert emission_score(grid, 0, 1, tokens) == pytest.approx(0.0, abs=1e-6)

    def test_blank_in_silence_is_near_zero(self):
        # annotation with a leading silence exists for seed 1
        for seed in range(20):
            a = random_annotation(GeneratorConfig(n_phones=4, seed=seed))
            if a.phonemes[0].word_index is None:
                grid = synthesize(a, SPEC, OracleConfig(seed=seed))
                tokens = [s.label for s in a.phonemes]
                assert emission_score(grid, 0, 0, tokens) == pytest.approx(0.0, abs=1e-6)
                return
        pytest.fail("no generated annotation with leading silence found")

    def test_wrong_phoneme_under_smoothing(self):
        eps = 0.2
        a = random_annotation(GeneratorConfig(n_phones=3, seed=3))
        grid = synthesize(a, SPEC, OracleConfig(label_smoothing=eps, seed=3))
        tokens = [s.label for s in a.phonemes]
        # frame 0 is inside token 0; score for token 1's state should be eps/|V|
        wrong = emission_score(grid, 0, 3, tokens)
        assert wrong == pytest.approx(np.log(eps / len(grid.phoneme_vocab)), abs=1e-5)

    def test_out_of_range_state(self):
        grid = make_random_grid(4, VOCAB, np.random.default_rng(0), 2)
        with pytest.raises(IndexError):
            emission_score(grid, 0, 5, ["a", "b"])

    def test_unknown_token(self):
        grid = make_random_grid(4, VOCAB, np.random.default_rng(0), 1)
        with pytest.raises(KeyError, match="zz"):
            emission_score(grid, 0, 1, ["zz"])


class TestViterbi:
    def test_single_phoneme_noiseless_spans_everything(self):
        a = random_annotation(GeneratorConfig(n_phones=1, seed=5))
        grid = synthesize(a, SPEC, OracleConfig(seed=5))
        tokens = [s.label for s in a.phonemes]
        path = viterbi_align(grid, tokens)
        assert np.all(path.states == 1)

    def test_matches_brute_force_on_200_instances(self):
        for seed in range(200):
            rng = np.random.default_rng(seed)
            grid, tokens = _feasible_instance(rng)
            v = viterbi_align(grid, tokens)
            b = brute_force_align(grid, tokens)
            assert v.score == pytest.approx(b.score, abs=1e-9), seed
            assert np.array_equal(v.states, b.states), seed

    def test_noiseless_boundaries_recovered_exactly(self):
        a = random_annotation(GeneratorConfig(n_phones=10, seed=11))
        grid = synthesize(a, SPEC, OracleConfig(seed=11))
        tokens = [s.label for s in a.phonemes]
        segments, _ = derive_boundaries(
            viterbi_align(grid, tokens),
            tokens,
            [s.word_index for s in a.phonemes],
            SPEC,
        )
        assert [(s.onset, s.offset) for s in segments] == [
            (s.onset, s.offset) for s in a.phonemes
        ]

    def test_too_few_frames_rejected(self):
        grid = make_random_grid(2, VOCAB, np.random.default_rng(1), 3)
        with pytest.raises(ValueError, match="cannot host"):
            viterbi_align(grid, ["a", "b", "c"])

    def test_repeated_labels_too_tight_unreachable(self):
        grid = make_random_grid(2, VOCAB, np.random.default_rng(1), 2)
        with pytest.raises(ValueError, match="no feasible"):
            viterbi_align(grid, ["a", "a"])

    def test_path_invariants(self):
        for seed in range(60):
            rng = np.random.default_rng(1000 + seed)
            grid, tokens = _feasible_instance(rng)
            path = viterbi_align(grid, tokens)
            steps = np.diff(path.states)
            assert np.all(steps >= 0) and np.all(steps <= 2)
            assert path.states[0] in (0, 1)
            assert path.states[-1] in (2 * len(tokens) - 1, 2 * len(tokens))
            visited = set(path.states.tolist())
            assert all(2 * j + 1 in visited for j in range(len(tokens)))

    def test_uniform_emission_shift_preserves_path(self):
        rng = np.random.default_rng(77)
        grid, tokens = _feasible_instance(rng)
        base = viterbi_align(grid, tokens)
        c = np.float32(1.5)
        # shift all emissions; flooring must not bite, so shift upward
        grid.phoneme_logprob = grid.phoneme_logprob + c
        grid.silence_logprob = grid.silence_logprob + c
        shifted = viterbi_align(grid, tokens)
        assert np.array_equal(shifted.states, base.states)
        assert shifted.score == pytest.approx(
            base.score + grid.n_frames * float(c), abs=1e-6
        )

    def test_determinism(self):
        rng = np.random.default_rng(123)
        grid, tokens = _feasible_instance(rng)
        a = viterbi_align(grid, tokens)
        b = viterbi_align(grid, tokens)
        assert a.score == b.score
        assert np.array_equal(a.states, b.states)


class TestBruteForce:
    def test_single_frame_single_phoneme(self):
        grid = make_random_grid(1, VOCAB, np.random.default_rng(0), 1)
        path = brute_force_align(grid, ["a"])
        assert list(path.states) == [1]

    def test_two_frames_one_phoneme_best_of_three(self):
        grid = make_random_grid(2, VOCAB, np.random.default_rng(4), 1)
        emis = lambda t, k: emission_score(grid, t, k, ["a"])
        bd = np.clip(grid.boundary_prob.astype(np.float64), 1e-10, 1 - 1e-10)
        scores = {
            (0, 1): emis(0, 0) + np.log(bd[1]) + emis(1, 1),
            (1, 1): emis(0, 1) + np.log1p(-bd[1]) + emis(1, 1),
            (1, 2): emis(0, 1) + np.log(bd[1]) + emis(1, 2),
        }
        best = max(scores.values())
        path = brute_force_align(grid, ["a"])
        assert path.score == pytest.approx(best, abs=1e-9)

    def test_oversize_instance_rejected(self):
        grid = make_random_grid(20, VOCAB, np.random.default_rng(0), 2)
        with pytest.raises(ValueError, match="too large"):
            brute_force_align(grid, ["a", "b"])


class TestLattice:
    def test_shapes_and_codes(self):
        rng = np.random.default_rng(9)
        grid, tokens = _feasible_instance(rng)
        lat = forward_lattice(grid, tokens, keep_scores=True)
        S = 2 * len(tokens) + 1
        assert lat.scores.shape == (grid.n_frames, S)
        assert lat.backpointers.shape == (grid.n_frames, S)
        assert set(np.unique(lat.backpointers)) <= {
            int(Transition.STAY),
            int(Transition.STEP),
            int(Transition.SKIP),
        }
        # unreachable init states are -inf, reachable are finite
        assert np.isinf(lat.scores[0, 2:]).all()
        assert np.isfinite(lat.scores[0, :2]).all()

    def test_rolling_and_full_lattice_agree(self):
        rng = np.random.default_rng(10)
        grid, tokens = _feasible_instance(rng)
        full = forward_lattice(grid, tokens, keep_scores=True)
        lean = forward_lattice(grid, tokens, keep_scores=False)
        assert np.allclose(full.final_scores, lean.final_scores, atol=1e-9, equal_nan=True)
        assert np.array_equal(full.backpointers, lean.backpointers)


class TestDeriveBoundaries:
    def test_two_phonemes(self):
        path = AlignmentPath(states=np.array([1, 1, 3, 3], dtype=np.int32), score=0.0)
        segments, words = derive_boundaries(path, ["a", "b"], [0, 0], SPEC)
        assert [(s.label, s.onset, s.offset) for s in segments] == [
            ("a", 0.0, frame_to_time(2, SPEC)),
            ("b", frame_to_time(2, SPEC), frame_to_time(4, SPEC)),
        ]
        assert words == [(0.0, frame_to_time(4, SPEC))]

    def test_blank_run_becomes_silence_segment(self):
        path = AlignmentPath(states=np.array([1, 2, 3], dtype=np.int32), score=0.0)
        segments, _ = derive_boundaries(path, ["a", "b"], [0, 1], SPEC)
        assert [s.label for s in segments] == ["a", "<SP>", "b"]
        assert segments[1].onset == frame_to_time(1, SPEC)
        assert segments[1].offset == frame_to_time(2, SPEC)
        assert segments[1].word_index is None

    def test_blank_next_to_silence_token_is_absorbed(self):
        # token 1 is an explicit silence; a trailing blank leaks after it
        path = AlignmentPath(states=np.array([1, 1, 3, 4, 5, 5], dtype=np.int32), score=0.0)
        segs = path_segments(path, ["a", "<AP>", "b"])
        assert segs == [(0, 0, 2), (1, 2, 4), (2, 4, 6)]
