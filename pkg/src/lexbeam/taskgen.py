"""Seeded synthetic decoding benchmarks.

Generates everything a desk-scale decode run needs: a random lexicon
(with planted homophone pairs), LM training text, phone and character
BPE models, ARPA LMs, reference transcripts, and per-utterance AM score
tables built by corrupting an oracle with Gaussian noise. Both decoding
systems get independently corrupted tables over the same references,
which is what makes blending them informative.
"""

from __future__ import annotations

import json
import os
import string

import numpy as np

from .lexicon import Lexicon, spelling_lexicon
from .lm import train_ngram, save_arpa
from .subword import encode_corpus, save_model, train_merges
from .acoustic import write_table_am

PHONES = [
    "AA", "AE", "AH", "B", "D", "EH", "ER", "F", "G", "IH",
    "IY", "K", "L", "M", "N", "OW", "P", "R", "S", "T",
]


def _random_words(rng, count: int) -> list[str]:
    words: set[str] = set()
    while len(words) < count:
        length = int(rng.integers(3, 7))
        words.add("".join(string.ascii_lowercase[rng.integers(0, 26)] for _ in range(length)))
    return sorted(words)


def _random_pron(rng) -> list[str]:
    return [PHONES[rng.integers(0, len(PHONES))] for _ in range(rng.integers(2, 5))]


def _weighted_sentences(rng, words, count, min_words, max_words):
    # mildly skewed unigram distribution so the word LM has signal
    weights = 1.0 / np.arange(1, len(words) + 1)
    weights /= weights.sum()
    return [
        list(rng.choice(words, size=rng.integers(min_words, max_words + 1), p=weights))
        for _ in range(count)
    ]


def _noisy_oracle_rows(rng, vocab, units, penalty, noise, extra_rows=4):
    rows = np.full((len(units) + 1 + extra_rows, len(vocab)), penalty)
    for t, unit in enumerate(units):
        rows[t, vocab.index_or_unk(unit)] = 0.0
        # ending early leaves "audio" unexplained: charge for what remains,
        # otherwise one flat penalty always beats the LM cost of continuing
        rows[t, vocab.eos_index] = penalty * (len(units) - t)
    for t in range(len(units), rows.shape[0]):
        rows[t, vocab.eos_index] = 0.0
    rows += rng.normal(0.0, noise, size=rows.shape)
    return rows


def make_task(
    out_dir: str,
    seed: int = 0,
    n_words: int = 50,
    n_utts: int = 200,
    homophone_pairs: int = 4,
    train_sentences: int = 300,
    sentence_words: tuple[int, int] = (3, 6),
    k_extra: int = 30,
    lm_order: int = 2,
    add_k: float = 0.1,
    oracle_penalty: float = -4.0,
    noise: float = 0.9,
    char_noise: float | None = None,
) -> dict:
    """Write a complete benchmark into ``out_dir``; returns its manifest.

    The character system's tables default to noisier corruption than the
    phone system's (phones correspond more tightly to the signal), which
    leaves the phone-led system ahead and the character system with
    complementary evidence worth blending in.
    """
    if char_noise is None:
        char_noise = 1.5 * noise
    rng = np.random.default_rng(seed)
    os.makedirs(out_dir, exist_ok=True)

    words = _random_words(rng, n_words)
    prons = {w: _random_pron(rng) for w in words}
    for _ in range(homophone_pairs):
        a, b = rng.choice(len(words), size=2, replace=False)
        prons[words[b]] = list(prons[words[a]])
    lexicon = Lexicon(prons)
    lexicon_path = os.path.join(out_dir, "lexicon.txt")
    with open(lexicon_path, "w", encoding="utf-8") as fh:
        for w in words:
            fh.write(f"{w} {' '.join(prons[w])}\n")

    words_path = os.path.join(out_dir, "words.txt")
    with open(words_path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(words) + "\n")

    lo, hi = sentence_words
    train_text = _weighted_sentences(rng, words, train_sentences, lo, hi)
    text_path = os.path.join(out_dir, "train_text.txt")
    with open(text_path, "w", encoding="utf-8") as fh:
        for sent in train_text:
            fh.write(" ".join(sent) + "\n")

    # subword extraction sees each word occurrence in the training text
    occurrences = [w for sent in train_text for w in sent]
    phone_corpus = [prons[w] for w in occurrences]
    char_corpus = [list(w) for w in occurrences]
    phone_base = {t for w in phone_corpus for t in ["_" + w[0], *w[1:]]}
    char_base = {t for w in char_corpus for t in ["_" + w[0], *w[1:]]}
    phone_bpe = train_merges(phone_corpus, k=len(phone_base) + k_extra, marker="_")
    char_bpe = train_merges(char_corpus, k=len(char_base) + k_extra, marker="_")
    phone_bpe_path = os.path.join(out_dir, "phone.bpe")
    char_bpe_path = os.path.join(out_dir, "char.bpe")
    save_model(phone_bpe, phone_bpe_path)
    save_model(char_bpe, char_bpe_path)

    char_lexicon = spelling_lexicon(words)
    phone_units = encode_corpus(train_text, lexicon, phone_bpe)
    char_units = encode_corpus(train_text, char_lexicon, char_bpe)
    phone_sub_lm = train_ngram(
        phone_units, order=lm_order, add_k=add_k, extra_vocab=phone_bpe.units()
    )
    char_sub_lm = train_ngram(
        char_units, order=lm_order, add_k=add_k, extra_vocab=char_bpe.units()
    )
    word_lm = train_ngram(train_text, order=lm_order, add_k=add_k, extra_vocab=words)
    phone_sub_path = os.path.join(out_dir, "phone_sub.arpa")
    char_sub_path = os.path.join(out_dir, "char_sub.arpa")
    word_lm_path = os.path.join(out_dir, "words.arpa")
    save_arpa(phone_sub_lm, phone_sub_path)
    save_arpa(char_sub_lm, char_sub_path)
    save_arpa(word_lm, word_lm_path)

    test_text = _weighted_sentences(rng, words, n_utts, lo, hi)
    ref_path = os.path.join(out_dir, "ref.trn")
    with open(ref_path, "w", encoding="utf-8") as fh:
        for i, sent in enumerate(test_text):
            fh.write(f"utt{i:04d}\t{' '.join(sent)}\n")

    am_phone_dir = os.path.join(out_dir, "am_phone")
    am_char_dir = os.path.join(out_dir, "am_char")
    os.makedirs(am_phone_dir, exist_ok=True)
    os.makedirs(am_char_dir, exist_ok=True)
    for i, sent in enumerate(test_text):
        utt_id = f"utt{i:04d}"
        ref_phone = encode_corpus([sent], lexicon, phone_bpe)[0]
        ref_char = encode_corpus([sent], char_lexicon, char_bpe)[0]
        rows1 = _noisy_oracle_rows(
            rng, phone_sub_lm.vocab, ref_phone, oracle_penalty, noise
        )
        rows2 = _noisy_oracle_rows(
            rng, char_sub_lm.vocab, ref_char, oracle_penalty, char_noise
        )
        write_table_am(phone_sub_lm.vocab, rows1, os.path.join(am_phone_dir, f"{utt_id}.am"))
        write_table_am(char_sub_lm.vocab, rows2, os.path.join(am_char_dir, f"{utt_id}.am"))

    manifest = {
        "seed": seed,
        "n_words": n_words,
        "n_utts": n_utts,
        "homophone_pairs": homophone_pairs,
        "noise": noise,
        "char_noise": char_noise,
        "oracle_penalty": oracle_penalty,
        "lm_order": lm_order,
        "add_k": add_k,
        "paths": {
            "lexicon": lexicon_path,
            "words": words_path,
            "train_text": text_path,
            "phone_bpe": phone_bpe_path,
            "char_bpe": char_bpe_path,
            "phone_subword_lm": phone_sub_path,
            "char_subword_lm": char_sub_path,
            "word_lm": word_lm_path,
            "ref": ref_path,
            "am_phone_dir": am_phone_dir,
            "am_char_dir": am_char_dir,
        },
        "phone_units": phone_bpe.vocab_size,
        "char_units": char_bpe.vocab_size,
    }
    with open(os.path.join(out_dir, "task.json"), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest
