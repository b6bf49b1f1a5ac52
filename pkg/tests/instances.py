"""Randomized tiny decoding instances shared by decoder and acceptance tests."""

from __future__ import annotations

import math
from dataclasses import dataclass

from lexbeam.acoustic import TableAm, Utterance
from lexbeam.decoder import DecoderConfig
from lexbeam.lexicon import Lexicon, PrefixTree, build_tree
from lexbeam.lm import NGramLm, train_ngram
from lexbeam.multilevel import MultiLevelLm
from lexbeam.subword import BpeModel, encode_word, train_merges
from lexbeam.symbols import UNK

LETTERS = "abc"


@dataclass
class SingleInstance:
    x: Utterance
    am: TableAm
    mlm: MultiLevelLm
    cfg: DecoderConfig
    # raw parts for the independent enumerator
    sub_lm: NGramLm
    word_lm: NGramLm
    tree: PrefixTree
    lexicon: Lexicon
    bpe: BpeModel
    alpha: float
    beta: float
    oov_penalty: float
    max_len: int


@dataclass
class JointInstance:
    single: SingleInstance
    am2: TableAm
    lm2: NGramLm
    bpe2: BpeModel
    gamma: float

    def encode2(self, word: str) -> list[str]:
        if word == UNK:
            return [UNK]
        return encode_word(list(word), self.bpe2)


def _random_word(rng) -> str:
    return "".join(LETTERS[rng.integers(0, len(LETTERS))] for _ in range(rng.integers(2, 4)))


def _random_lexicon(rng, n_words: int, phones: list[str]) -> Lexicon:
    lexicon = Lexicon()
    while len(lexicon) < n_words:
        word = _random_word(rng)
        pron = [phones[rng.integers(0, len(phones))] for _ in range(rng.integers(1, 3))]
        lexicon.add(word, pron)
    return lexicon


def _sentences(rng, words: list[str], count: int, max_words: int = 3) -> list[list[str]]:
    return [
        [words[rng.integers(0, len(words))] for _ in range(rng.integers(1, max_words + 1))]
        for _ in range(count)
    ]


def _bpe_over(corpus: list[list[str]], rng, unit_cap: int) -> BpeModel:
    base = {tok for word in corpus for tok in ["_" + word[0], *word[1:]]}
    k = max(min(len(base) + int(rng.integers(0, 3)), unit_cap), len(base))
    return train_merges(corpus, k=k, marker="_")


def random_single_instance(
    rng,
    tiny: bool = False,
    n_words: int | None = None,
) -> SingleInstance:
    """A decodable instance small enough for exhaustive enumeration.

    ``tiny`` instances use beta=0 (pure AM decoding), where no branch
    dies early, so the search space is kept extra small.
    """
    if tiny:
        phones = ["P", "T"]
    else:
        phones = [["P", "T"], ["P", "T", "K"]][rng.integers(0, 2)]
    if n_words is None:
        n_words = 2 if tiny else int(rng.integers(2, 5))
    lexicon = _random_lexicon(rng, n_words, phones)
    words = lexicon.words()
    corpus = [lexicon.entries[w] for w in words]
    bpe = _bpe_over(corpus, rng, unit_cap=6 if tiny else 8)
    tree = build_tree(lexicon, bpe)

    sentences = _sentences(rng, words, count=8)
    encoded = [
        sum((encode_word(lexicon.entries[w], bpe) for w in sent), [])
        for sent in sentences
    ]
    sub_lm = train_ngram(encoded, order=2, add_k=0.3, extra_vocab=bpe.units())
    word_lm = train_ngram(
        sentences, order=2, add_k=float(rng.choice([0.2, 0.5])), extra_vocab=words
    )

    alpha = float(rng.choice([0.0, 0.3, 0.7, 1.0]))
    beta = 0.0 if tiny else float(rng.choice([0.5, 1.0]))
    oov_penalty = float(rng.choice([-8.0, -4.0]))
    max_len = 3 if tiny else 4
    mlm = MultiLevelLm(
        sub_lm, word_lm, tree, marker="_", alpha=alpha, oov_penalty=oov_penalty
    )
    rows = rng.uniform(-3.0, 0.0, size=(max_len + 2, len(sub_lm.vocab)))
    am = TableAm(sub_lm.vocab, rows)
    cfg = DecoderConfig(
        beamsize=10**6,
        beta=beta,
        max_steps=max_len + 1,
        end_detect_margin=math.inf,
    )
    return SingleInstance(
        x=Utterance("utt"),
        am=am,
        mlm=mlm,
        cfg=cfg,
        sub_lm=sub_lm,
        word_lm=word_lm,
        tree=tree,
        lexicon=lexicon,
        bpe=bpe,
        alpha=alpha,
        beta=beta,
        oov_penalty=oov_penalty,
        max_len=max_len,
    )


def random_joint_instance(rng) -> JointInstance:
    # criterion regime: five-word lexicon on the proposing side
    single = random_single_instance(rng, n_words=5)
    words = single.lexicon.words()

    spellings = [list(w) for w in words]
    bpe2 = _bpe_over(spellings, rng, unit_cap=10)
    sentences2 = _sentences(rng, words, count=8)
    encoded2 = [
        sum((encode_word(list(w), bpe2) for w in sent), []) for sent in sentences2
    ]
    lm2 = train_ngram(encoded2, order=2, add_k=0.3, extra_vocab=bpe2.units())
    rows2 = rng.uniform(-3.0, 0.0, size=(3 * single.max_len + 2, len(lm2.vocab)))
    am2 = TableAm(lm2.vocab, rows2)
    gamma = float(rng.choice([0.2, 0.4, 0.7]))
    single.cfg.gamma = gamma
    return JointInstance(single=single, am2=am2, lm2=lm2, bpe2=bpe2, gamma=gamma)
