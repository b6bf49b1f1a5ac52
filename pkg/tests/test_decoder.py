import math

import numpy as np
import pytest

from bruteforce import enumerate_joint, enumerate_single
from instances import random_joint_instance, random_single_instance

from lexbeam.acoustic import OracleAm, TableAm, Utterance
from lexbeam.decoder import (
    Beam,
    DecoderConfig,
    Hypothesis,
    decode_joint,
    decode_single,
    end_detection,
    nbest_lines,
    prune,
    top,
    transcript_line,
)
from lexbeam.lexicon import build_tree, load_lexicon
from lexbeam.lm import LmVocab, train_ngram, uniform_lm
from lexbeam.multilevel import MultiLevelLm
from lexbeam.subword import BpeModel, encode_word
from lexbeam.symbols import EOS, SOS, UNK


# --- primitive ops --------------------------------------------------------

def test_top_excludes_non_finite_and_sos():
    vocab = LmVocab(["a", "b"])
    scores = np.array([5.0, -1.0, -math.inf, 0.5, -math.inf])
    out = top(scores, 10, vocab.units)
    assert all(math.isfinite(s) for s, _ in out)
    assert all(u != SOS for _, u in out)
    assert out == [(0.5, "a"), (-1.0, EOS)]


def test_top_orders_by_score_then_unit():
    units = ["<sos>", "<eos>", "<unk>", "a", "b"]
    scores = np.array([9.0, -2.0, -1.0, -1.0, -1.0])
    out = top(scores, 3, units)
    assert out == [(-1.0, "<unk>"), (-1.0, "a"), (-1.0, "b")]


def test_top_returns_fewer_when_few_finite():
    units = ["<sos>", "<eos>", "<unk>", "a"]
    scores = np.array([0.0, -math.inf, -math.inf, -1.0])
    assert top(scores, 3, units) == [(-1.0, "a")]


def _beam(score, ys1, ws=()):
    return Beam(
        score=score, ws=tuple(ws), sc1=score, ys1=tuple(ys1),
        st1=None, sc2=0.0, ys2=(SOS,), st2=None,
    )


def test_prune_keeps_best_and_breaks_ties_lexicographically():
    beams = [
        _beam(1.0, (SOS, "b")),
        _beam(2.0, (SOS, "c")),
        _beam(1.0, (SOS, "a")),
    ]
    out = prune(beams, 2)
    assert [b.ys1[-1] for b in out] == ["c", "a"]


def test_prune_merges_duplicate_paths():
    beams = [_beam(1.0, (SOS, "a")), _beam(1.0, (SOS, "a"))]
    assert len(prune(beams, 5)) == 1


def test_prune_keeps_all_when_under_beamsize():
    beams = [_beam(1.0, (SOS, "a")), _beam(0.5, (SOS, "b"))]
    out = prune(beams, 10)
    assert [b.score for b in out] == [1.0, 0.5]


def _hyp(score):
    return Hypothesis(words=("w",), score=score, sc1=score, sc2=0.0,
                      ys1=(SOS, EOS), ys2=(SOS,))


def test_end_detection_false_without_completed():
    cfg = DecoderConfig(end_detect_window=3, end_detect_margin=10.0)
    assert end_detection([], [-100.0] * 5, cfg) is False


def test_end_detection_false_when_partials_close():
    cfg = DecoderConfig(end_detect_window=3, end_detect_margin=10.0)
    completed = [_hyp(-5.0)]
    assert end_detection(completed, [-14.0, -14.5, -12.0], cfg) is False


def test_end_detection_true_after_window_of_poor_partials():
    cfg = DecoderConfig(end_detect_window=3, end_detect_margin=10.0)
    completed = [_hyp(-5.0)]
    assert end_detection(completed, [-3.0, -16.0, -17.0, -20.0], cfg) is True


def test_end_detection_needs_full_window():
    cfg = DecoderConfig(end_detect_window=3, end_detect_margin=10.0)
    completed = [_hyp(-5.0)]
    assert end_detection(completed, [-30.0, -40.0], cfg) is False


# --- single-system decoding ----------------------------------------------

def _fixture_system(alpha=0.5, word_corpus=None):
    lexicon = load_lexicon("hi HH IY\nhigh HH IY\nthe DH AH")
    bpe = BpeModel(marker="_", base_vocab=["_HH", "IY", "_DH", "AH"])
    tree = build_tree(lexicon, bpe)
    sub_lm = uniform_lm(bpe.units())
    word_lm = train_ngram(
        word_corpus or [["hi", "the"], ["hi"], ["the", "hi"]],
        order=2,
        add_k=0.2,
        extra_vocab=lexicon.words(),
    )
    mlm = MultiLevelLm(sub_lm, word_lm, tree, marker="_", alpha=alpha)
    return lexicon, bpe, mlm


@pytest.mark.parametrize("beamsize", [1, 4])
def test_oracle_am_beta_zero_recovers_reference(beamsize):
    lexicon, bpe, mlm = _fixture_system()
    ref_units = encode_word(["HH", "IY"], bpe) + encode_word(["DH", "AH"], bpe)
    am = OracleAm(mlm.vocab, ref_units, mismatch_penalty=-5.0)
    cfg = DecoderConfig(beamsize=beamsize, beta=0.0, max_steps=20)
    result = decode_single(Utterance("u"), am, mlm, cfg)
    best = result.best
    assert best is not None
    assert best.ys1 == (SOS, *ref_units, EOS)
    assert best.words in {("hi", "the"), ("high", "the")}


def test_homophone_ranked_by_word_lm_and_all_closures_present():
    lexicon, bpe, mlm = _fixture_system(
        word_corpus=[["hi"], ["hi"], ["hi"], ["high"]]
    )
    ref_units = encode_word(["HH", "IY"], bpe)
    am = OracleAm(mlm.vocab, ref_units, mismatch_penalty=-5.0)
    cfg = DecoderConfig(beamsize=4, beta=1.0, max_steps=10)
    result = decode_single(Utterance("u"), am, mlm, cfg)
    words = [h.words for h in result.hypotheses]
    assert words[0] == ("hi",)
    assert ("high",) in words
    hi = next(h for h in result.hypotheses if h.words == ("hi",))
    high = next(h for h in result.hypotheses if h.words == ("high",))
    assert hi.score > high.score
    assert hi.ys1 == high.ys1  # same subword path, different closure


def test_truncation_flag_when_nothing_completes():
    lexicon, bpe, mlm = _fixture_system()
    rows = np.zeros((1, len(mlm.vocab)))
    rows[0, mlm.vocab.eos_index] = -np.inf  # eos unreachable
    am = TableAm(mlm.vocab, rows)
    cfg = DecoderConfig(beamsize=2, beta=1.0, max_steps=4)
    result = decode_single(Utterance("u"), am, mlm, cfg)
    assert result.truncated is True
    assert result.hypotheses == []
    assert result.steps <= 4


def test_vocab_mismatch_rejected():
    lexicon, bpe, mlm = _fixture_system()
    other = LmVocab(["x"])
    am = TableAm(other, np.zeros((1, len(other))))
    with pytest.raises(ValueError):
        decode_single(Utterance("u"), am, mlm, DecoderConfig())


def test_monotone_beam_quality():
    rng = np.random.default_rng(11)
    inst = random_single_instance(rng)
    scores = []
    for beamsize in (1, 2, 8):
        cfg = DecoderConfig(
            beamsize=beamsize,
            beta=inst.beta,
            max_steps=inst.cfg.max_steps,
            end_detect_margin=math.inf,
        )
        result = decode_single(inst.x, inst.am, inst.mlm, cfg)
        # a narrow beam may complete nothing at all; rank that lowest
        scores.append(result.best.score if result.best else -math.inf)
    assert scores[0] <= scores[1] <= scores[2]


def test_single_brute_force_parity_smoke():
    for seed in range(4):
        rng = np.random.default_rng(200 + seed)
        inst = random_single_instance(rng)
        result = decode_single(inst.x, inst.am, inst.mlm, inst.cfg)
        expected = enumerate_single(
            inst.x, inst.am, inst.sub_lm, inst.word_lm, inst.tree, "_",
            inst.alpha, inst.beta, inst.oov_penalty, inst.max_len,
        )
        assert expected, "enumeration found no completable hypothesis"
        best = result.best
        assert best.words == expected[0]["words"]
        assert best.score == pytest.approx(expected[0]["score"], abs=1e-9)


def test_decode_is_deterministic_and_schedule_independent():
    rng = np.random.default_rng(33)
    inst = random_single_instance(rng)
    cfg_serial = DecoderConfig(beamsize=6, beta=inst.beta, max_steps=inst.cfg.max_steps)
    cfg_parallel = DecoderConfig(
        beamsize=6, beta=inst.beta, max_steps=inst.cfg.max_steps, parallel=True
    )
    runs = [
        decode_single(inst.x, inst.am, inst.mlm, cfg_serial),
        decode_single(inst.x, inst.am, inst.mlm, cfg_serial),
        decode_single(inst.x, inst.am, inst.mlm, cfg_parallel),
    ]
    lines = [nbest_lines("utt", r) for r in runs]
    assert lines[0] == lines[1] == lines[2]


# --- joint decoding -------------------------------------------------------

def test_joint_gamma_zero_matches_single():
    rng = np.random.default_rng(77)
    joint = random_joint_instance(rng)
    inst = joint.single
    inst.cfg.gamma = 0.0
    joint_result = decode_joint(
        inst.x, inst.am, inst.mlm, joint.am2, joint.lm2, joint.bpe2, inst.cfg
    )
    single_result = decode_single(inst.x, inst.am, inst.mlm, inst.cfg)
    assert [h.words for h in joint_result.hypotheses] == [
        h.words for h in single_result.hypotheses
    ]
    for jh, sh in zip(joint_result.hypotheses, single_result.hypotheses):
        assert jh.score == pytest.approx(sh.score, abs=1e-12)
        assert jh.sc1 == pytest.approx(sh.sc1, abs=1e-12)


def test_joint_synchrony_invariant():
    rng = np.random.default_rng(91)
    joint = random_joint_instance(rng)
    inst = joint.single
    result = decode_joint(
        inst.x, inst.am, inst.mlm, joint.am2, joint.lm2, joint.bpe2, inst.cfg
    )
    for hyp in result.hypotheses:
        expected = (SOS,)
        for w in hyp.words:
            expected += tuple(joint.encode2(w))
        expected += (EOS,)
        assert hyp.ys2 == expected


def test_joint_brute_force_parity_smoke():
    for seed in range(3):
        rng = np.random.default_rng(500 + seed)
        joint = random_joint_instance(rng)
        inst = joint.single
        result = decode_joint(
            inst.x, inst.am, inst.mlm, joint.am2, joint.lm2, joint.bpe2, inst.cfg
        )
        expected = enumerate_joint(
            inst.x, inst.am, inst.sub_lm, inst.word_lm, inst.tree, "_",
            joint.am2, joint.lm2, joint.encode2,
            inst.alpha, inst.beta, joint.gamma, inst.oov_penalty, inst.max_len,
        )
        assert expected
        best = result.best
        assert best.words == expected[0]["words"]
        assert best.score == pytest.approx(expected[0]["score"], abs=1e-9)


def test_joint_score_affine_in_gamma_on_forced_path():
    lexicon, bpe, mlm = _fixture_system()
    ref_units = encode_word(["HH", "IY"], bpe) + encode_word(["DH", "AH"], bpe)
    am1 = OracleAm(mlm.vocab, ref_units, mismatch_penalty=-5.0)

    words = lexicon.words()
    spellings = [list(w) for w in words]
    bpe2 = BpeModel(marker="_", base_vocab=sorted(
        {t for s in spellings for t in ["_" + s[0], *s[1:]]}
    ))
    lm2 = train_ngram(
        [sum((encode_word(list(w), bpe2) for w in ["hi", "the"]), [])],
        order=2, add_k=0.3, extra_vocab=bpe2.units(),
    )
    ref2 = encode_word(list("hi"), bpe2) + encode_word(list("the"), bpe2)
    am2 = OracleAm(lm2.vocab, ref2, mismatch_penalty=-5.0)

    scores = {}
    for gamma in (0.0, 0.25, 0.5, 1.0):
        cfg = DecoderConfig(beamsize=2, beta=0.8, gamma=gamma, max_steps=12)
        result = decode_joint(Utterance("u"), am1, mlm, am2, lm2, bpe2, cfg)
        hyp = next(h for h in result.hypotheses if h.words == ("hi", "the"))
        scores[gamma] = (hyp.score, hyp.sc1, hyp.sc2)
    a = scores[0.0][0]
    b = scores[1.0][0]
    for gamma in (0.25, 0.5):
        predicted = (1 - gamma) * a + gamma * b
        assert scores[gamma][0] == pytest.approx(predicted, abs=1e-9)
    # per-system components do not move with gamma
    assert len({round(s[1], 12) for s in scores.values()}) == 1
    assert len({round(s[2], 12) for s in scores.values()}) == 1


def test_output_formatting():
    lexicon, bpe, mlm = _fixture_system()
    ref_units = encode_word(["HH", "IY"], bpe)
    am = OracleAm(mlm.vocab, ref_units, mismatch_penalty=-5.0)
    cfg = DecoderConfig(beamsize=2, beta=1.0, max_steps=8)
    result = decode_single(Utterance("u1"), am, mlm, cfg)
    line = transcript_line("u1", result)
    assert line.startswith("u1\t")
    records = nbest_lines("u1", result)
    import json

    first = json.loads(records[0])
    assert first["rank"] == 1 and first["utt"] == "u1"
    assert set(first) == {"utt", "rank", "score", "sc1", "sc2", "words", "ys1", "ys2"}
