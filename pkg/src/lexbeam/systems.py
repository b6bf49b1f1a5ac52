"""Assemble decodable systems from model files.

A "system" bundles the pieces one decoding side needs: BPE model, the
lexicon it decodes against (pronunciations for phone systems, spellings
for character systems), the compiled prefix tree and both LMs.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

from .acoustic import OracleAm, TableAm, Utterance, load_table_am
from .errors import MissingFileError
from .lexicon import Lexicon, PrefixTree, build_tree, load_lexicon, spelling_lexicon
from .lm import SPECIALS, NGramLm, load_arpa
from .multilevel import MultiLevelLm
from .subword import BpeModel, encode_corpus, load_model


def _require(path: str, what: str) -> str:
    if not os.path.exists(path):
        raise MissingFileError(f"{what} not found: {path}", path=path)
    return path


@dataclass
class System:
    bpe: BpeModel
    lexicon: Lexicon
    tree: PrefixTree
    subword_lm: NGramLm
    word_lm: NGramLm
    mlm: MultiLevelLm

    def reference_units(self, words: list[str]) -> list[str]:
        return encode_corpus([words], self.lexicon, self.bpe)[0]


def load_system(
    bpe_path: str,
    subword_lm_path: str,
    word_lm_path: str,
    lexicon_path: str | None = None,
    mode: str = "phone",
    words_path: str | None = None,
    alpha: float = 0.6,
    oov_penalty: float = -10.0,
    premask: bool = False,
) -> System:
    """Load one decoding system.

    Phone mode requires a pronunciation lexicon. Char mode decodes over
    spellings: the lexicon is synthesized from ``words_path`` if given,
    otherwise from the word LM's vocabulary.
    """
    bpe = load_model(_require(bpe_path, "BPE model"))
    subword_lm = load_arpa(_require(subword_lm_path, "subword LM"))
    word_lm = load_arpa(_require(word_lm_path, "word LM"))

    if mode == "phone":
        if lexicon_path is None:
            raise ValueError("phone mode requires a lexicon")
        with open(_require(lexicon_path, "lexicon"), encoding="utf-8") as fh:
            lexicon = load_lexicon(fh.read())
    elif mode == "char":
        if words_path is not None:
            with open(_require(words_path, "word list"), encoding="utf-8") as fh:
                words = [w for w in fh.read().split() if w]
        else:
            words = [u for u in word_lm.vocab.units if u not in SPECIALS]
        lexicon = spelling_lexicon(words)
    else:
        raise ValueError(f"unknown mode: {mode!r}")

    tree = build_tree(lexicon, bpe)
    mlm = MultiLevelLm(
        subword_lm,
        word_lm,
        tree,
        marker=bpe.marker,
        alpha=alpha,
        oov_penalty=oov_penalty,
        premask=premask,
    )
    return System(
        bpe=bpe,
        lexicon=lexicon,
        tree=tree,
        subword_lm=subword_lm,
        word_lm=word_lm,
        mlm=mlm,
    )


def load_verifier(bpe_path: str, lm_path: str) -> tuple[BpeModel, NGramLm]:
    """Second (character) side of a joint decode: BPE model plus subword LM."""
    return (
        load_model(_require(bpe_path, "char BPE model")),
        load_arpa(_require(lm_path, "char subword LM")),
    )


def read_utterances(path: str) -> list[tuple[str, list[str]]]:
    """Parse ``id<TAB>words`` lines (words optional), preserving order."""
    out: list[tuple[str, list[str]]] = []
    with open(_require(path, "utterance list"), encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line.strip():
                continue
            utt_id, _, words = line.partition("\t")
            out.append((utt_id.strip(), words.split()))
    return out


def oracle_scorer(
    system: System, words: list[str], mismatch_penalty: float
) -> tuple[OracleAm, list[str]]:
    units = system.reference_units(words)
    return OracleAm(system.mlm.vocab, units, mismatch_penalty), units


def table_scorer(system_vocab, table_dir: str, utt_id: str) -> TableAm:
    path = os.path.join(table_dir, f"{utt_id}.am")
    return load_table_am(_require(path, "AM table"), system_vocab)


def build_utterance(utt_id: str, units: list[str] | None) -> Utterance:
    bound = len(units) + 1 if units is not None else None
    return Utterance(id=utt_id, length_bound=bound)
