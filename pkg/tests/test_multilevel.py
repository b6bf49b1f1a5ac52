import math

import numpy as np
import pytest

from lexbeam.lexicon import build_tree, load_lexicon
from lexbeam.lm import score_sequence, train_ngram, uniform_lm
from lexbeam.multilevel import MultiLevelLm
from lexbeam.subword import BpeModel, encode_word
from lexbeam.symbols import EOS, INCOMPLETE, SOS, UNK

HOMOPHONE_LEXICON = "hi HH IY\nhigh HH IY\nthe DH AH\na AH"


def _homophone_mlm(alpha=0.6, oov_penalty=-10.0, premask=False):
    lexicon = load_lexicon(HOMOPHONE_LEXICON)
    # _ZZ is a valid unit that starts no lexicon word
    model = BpeModel(marker="_", base_vocab=["_HH", "IY", "_DH", "AH", "_AH", "_ZZ"])
    tree = build_tree(lexicon, model)
    subword_lm = uniform_lm(model.units())
    word_lm = train_ngram(
        [["hi", "the", "a"], ["high", "the"], ["hi", "a"]], order=2, add_k=0.5
    )
    return MultiLevelLm(
        subword_lm, word_lm, tree, marker="_", alpha=alpha,
        oov_penalty=oov_penalty, premask=premask,
    ), model


def test_init_state_at_root_with_zero_accum():
    mlm, _ = _homophone_mlm()
    state = mlm.init_state()
    assert state.node is mlm.tree.root
    assert state.accum == 0.0


def test_init_state_uniform_logps():
    mlm, _ = _homophone_mlm()
    state = mlm.init_state()
    support = [u for u in mlm.vocab.units if u != SOS]
    expected = math.log(1 / len(support))
    for unit in support:
        assert state.s_logp[mlm.vocab.index(unit)] == pytest.approx(expected)


def test_init_state_deterministic():
    mlm, _ = _homophone_mlm()
    a, b = mlm.init_state(), mlm.init_state()
    assert a.s_state == b.s_state and a.w_state == b.w_state
    np.testing.assert_array_equal(a.s_logp, b.s_logp)
    assert a.accum == b.accum


def _walk(mlm, state, units, words=None):
    """Force the state through units, picking the branch emitting words in order."""
    words = list(words or [])
    prev = SOS
    for unit in units:
        results = mlm.forward(state, prev)
        if len(results) > 1:
            want = words.pop(0)
            results = [r for r in results if r.word == want]
        state = results[0].state
        prev = unit
    results = mlm.forward(state, prev)
    if len(results) > 1 and words:
        results = [r for r in results if r.word == words.pop(0)]
    return results[0].state


def test_homophone_boundary_branches_per_word():
    mlm, _ = _homophone_mlm()
    state = _walk(mlm, mlm.init_state(), ["_HH", "IY"])
    assert state.node.words == ["hi", "high"]
    results = mlm.forward(state, "_DH")
    assert [r.word for r in results] == ["hi", "high"]
    # subword-LM side identical across branches, word-LM side differs
    assert results[0].state.s_state == results[1].state.s_state
    np.testing.assert_array_equal(results[0].state.s_logp, results[1].state.s_logp)
    assert results[0].state.w_state != results[1].state.w_state


def test_boundary_adjust_replaces_accumulated_score():
    alpha = 0.6
    mlm, _ = _homophone_mlm(alpha=alpha)
    init = mlm.init_state()
    state = _walk(mlm, init, ["_HH", "IY"])
    results = mlm.forward(state, "_DH")
    wv = mlm.word_lm.vocab
    for res in results:
        expected_adjust = float(init.w_logp[wv.index(res.word)]) - state.accum
        base = alpha * res.state.s_logp
        np.testing.assert_allclose(res.la_scores, expected_adjust + base)


def test_intra_word_dead_end_leaves_state_unchanged():
    mlm, _ = _homophone_mlm()
    state = _walk(mlm, mlm.init_state(), ["_HH"])
    results = mlm.forward(state, "AH")  # not a continuation of _HH
    assert len(results) == 1
    res = results[0]
    assert res.word == INCOMPLETE
    assert np.all(np.isneginf(res.la_scores))
    assert res.state is state


def test_boundary_unit_with_no_tree_edge_is_dead_end():
    mlm, _ = _homophone_mlm()
    state = _walk(mlm, mlm.init_state(), ["_HH", "IY"])
    results = mlm.forward(state, "_ZZ")  # marker-initial, no root edge
    assert len(results) == 1
    assert results[0].word == INCOMPLETE
    assert np.all(np.isneginf(results[0].la_scores))
    assert results[0].state is state


def test_premask_limits_lookahead_to_valid_continuations():
    mlm, _ = _homophone_mlm(premask=True)
    state = _walk(mlm, mlm.init_state(), ["_HH"])
    res = mlm.forward(state, "IY")[0]
    finite = {
        mlm.vocab.units[i] for i in np.nonzero(np.isfinite(res.la_scores))[0]
    }
    valid = set(mlm.tree.root.children) | {EOS} | set(res.state.node.children)
    assert finite <= valid
    assert "_ZZ" not in finite


def test_alpha_zero_keeps_accum_zero_and_word_scores_only():
    mlm, _ = _homophone_mlm(alpha=0.0)
    init = mlm.init_state()
    state = _walk(mlm, init, ["_HH", "IY"])
    assert state.accum == 0.0
    results = mlm.forward(state, "_DH")
    wv = mlm.word_lm.vocab
    for res in results:
        expected = float(init.w_logp[wv.index(res.word)])
        finite = res.la_scores[np.isfinite(res.la_scores)]
        np.testing.assert_allclose(finite, expected)
        assert res.state.accum == 0.0


def test_unknown_boundary_word_gets_oov_penalty():
    # "the" node (_DH -> AH) has words; craft a pending node without words by
    # stopping at _HH (prefix of hi/high, itself not a word)
    mlm, _ = _homophone_mlm(oov_penalty=-7.0)
    init = mlm.init_state()
    state = _walk(mlm, init, ["_HH"])
    assert state.node.words == []
    results = mlm.forward(state, "_DH")
    assert [r.word for r in results] == [UNK]
    wv = mlm.word_lm.vocab
    expected_adjust = float(init.w_logp[wv.unk_index]) - 7.0
    base = mlm.alpha * results[0].state.s_logp
    np.testing.assert_allclose(results[0].la_scores, expected_adjust + base)


def test_finalize_at_root_scores_eos_only():
    mlm, _ = _homophone_mlm()
    state = mlm.init_state()
    out = mlm.finalize(state)
    wv = mlm.word_lm.vocab
    assert out == [(pytest.approx(float(state.w_logp[wv.eos_index])), None)]


def test_finalize_pending_homophones_split():
    mlm, _ = _homophone_mlm()
    state = _walk(mlm, mlm.init_state(), ["_HH", "IY"])
    out = mlm.finalize(state)
    assert [w for _, w in out] == ["hi", "high"]


def test_finalize_pending_wordless_node_emits_unk():
    mlm, _ = _homophone_mlm(oov_penalty=-5.0)
    init = mlm.init_state()
    state = _walk(mlm, init, ["_HH"])
    out = mlm.finalize(state)
    assert len(out) == 1 and out[0][1] == UNK
    wv = mlm.word_lm.vocab
    _, w_logp_unk = mlm.word_lm.forward(state.w_state, UNK)
    expected = float(init.w_logp[wv.unk_index]) - 5.0 + float(w_logp_unk[wv.eos_index])
    assert out[0][0] == pytest.approx(expected)


def test_sos_forward_returns_initial_lookahead_without_advancing():
    mlm, _ = _homophone_mlm(alpha=0.5)
    state = mlm.init_state()
    results = mlm.forward(state, SOS)
    assert len(results) == 1
    assert results[0].state is state
    np.testing.assert_allclose(results[0].la_scores, 0.5 * state.s_logp)


# --- the central algebraic property --------------------------------------

WORDS_LEXICON = """\
bay B EY
cat K AE T
dog D AO G
sun S AH N
moon M UW N
tree T R IY
"""


def _system(alpha, subword_corpus_seed):
    lexicon = load_lexicon(WORDS_LEXICON)
    corpus = [lexicon.entries[w] for w in lexicon.words()]
    model = __import__("lexbeam.subword", fromlist=["train_merges"]).train_merges(
        corpus, k=len({t for w in corpus for t in ["_" + w[0], *w[1:]]}) + subword_corpus_seed,
        marker="_",
    )
    tree = build_tree(lexicon, model)
    rng = np.random.default_rng(subword_corpus_seed)
    words = lexicon.words()
    sentences = [
        [words[i] for i in rng.integers(0, len(words), size=rng.integers(1, 4))]
        for _ in range(20)
    ]
    encoded = [
        sum((encode_word(lexicon.entries[w], model) for w in sent), [])
        for sent in sentences
    ]
    subword_lm = train_ngram(encoded, order=2, add_k=0.2, extra_vocab=model.units())
    word_lm = train_ngram(sentences, order=2, add_k=0.3)
    mlm = MultiLevelLm(subword_lm, word_lm, tree, marker="_", alpha=alpha)
    return mlm, model, lexicon


@pytest.mark.parametrize("alpha", [0.0, 0.3, 0.6, 1.0])
@pytest.mark.parametrize("seed", [1, 4])
def test_word_score_replacement_telescopes(alpha, seed):
    """Selected look-ahead scores plus finalize equal the pure word-LM score."""
    mlm, model, lexicon = _system(alpha, seed)
    rng = np.random.default_rng(100 + seed)
    words = lexicon.words()
    for _ in range(5):
        sentence = [words[i] for i in rng.integers(0, len(words), size=3)]
        units = sum(
            (encode_word(lexicon.entries[w], model) for w in sentence), []
        )
        state = mlm.init_state()
        prev = SOS
        picked = 0.0
        pending = list(sentence)
        for unit in units:
            results = mlm.forward(state, prev)
            if len(results) > 1 or results[0].word != INCOMPLETE:
                results = [r for r in results if r.word == pending[0]]
                pending.pop(0)
            res = results[0]
            picked += float(res.la_scores[mlm.vocab.index(unit)])
            state = res.state
            prev = unit
        results = mlm.forward(state, prev)
        if results[0].word != INCOMPLETE:
            results = [r for r in results if r.word == pending[0]]
            pending.pop(0)
        state = results[0].state
        finals = mlm.finalize(state)
        finals = [f for f in finals if f[1] == sentence[-1]]
        total = picked + finals[0][0]
        expected = score_sequence(mlm.word_lm, sentence)
        assert total == pytest.approx(expected, abs=1e-9)
