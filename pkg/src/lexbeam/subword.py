"""Byte pair encoding over phone or character token sequences.

Units are plain strings. A base token never contains whitespace; a merged
unit is the space-joined concatenation of the base tokens it covers, so
``"_HH IY"`` is one unit spanning two phones. The word-boundary marker is
attached to the first token of every word before any merging, which keeps
merges strictly within words and makes unit sequences segmentable back
into words without extra bookkeeping.
"""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .errors import (
    EmptyCorpusError,
    InvalidVocabSizeError,
    MalformedModelError,
    MalformedSequenceError,
)
from .symbols import DEFAULT_MARKER, UNK

_HEADER_RE = re.compile(r"^bpe-model v1 marker=(.)$")


def _validate_token(token: str) -> None:
    if not token or token != token.strip() or any(c.isspace() for c in token):
        raise ValueError(f"invalid base token: {token!r}")


@dataclass
class BpeModel:
    """Ordered merge rules plus the base vocabulary they were learned over."""

    marker: str = DEFAULT_MARKER
    merges: list[tuple[str, str]] = field(default_factory=list)
    base_vocab: list[str] = field(default_factory=list)

    def __post_init__(self):
        if len(self.marker) != 1:
            raise ValueError("marker must be a single character")
        self.base_vocab = sorted(set(self.base_vocab))
        self._rebuild()

    def _rebuild(self) -> None:
        units = set(self.base_vocab)
        for left, right in self.merges:
            # each side must be producible from earlier merges or the base
            if left not in units or right not in units:
                missing = left if left not in units else right
                raise ValueError(
                    f"merge operand {missing!r} is not producible at its position"
                )
            units.add(f"{left} {right}")
        self._units = units
        # longest unit in base tokens, bounds the greedy matcher's window
        self._max_span = max((u.count(" ") + 1 for u in units), default=1)

    @property
    def vocab_size(self) -> int:
        return len(self.base_vocab) + len(self.merges)

    def units(self) -> list[str]:
        """All producible units (base plus merge results), sorted."""
        return sorted(self._units)

    def __contains__(self, unit: str) -> bool:
        return unit in self._units


def _marked(tokens: Sequence[str], marker: str) -> list[str]:
    return [marker + tokens[0], *tokens[1:]]


def train_merges(
    corpus: Iterable[Sequence[str]],
    k: int,
    marker: str = DEFAULT_MARKER,
) -> BpeModel:
    """Learn BPE merges from a corpus of per-word token sequences.

    Each corpus element is one word given as its base tokens (a phone
    sequence or a spelling). The most frequent adjacent pair is merged
    until the vocabulary reaches ``k`` units or no pair occurs at least
    twice. Ties are broken by lexicographic order of the pair, so
    training is deterministic and the merge list for a smaller ``k`` is
    a prefix of the list for a larger ``k``.
    """
    word_counts: Counter[tuple[str, ...]] = Counter()
    for word in corpus:
        if not word:
            raise ValueError("corpus contains an empty word")
        for tok in word:
            _validate_token(tok)
        word_counts[tuple(_marked(word, marker))] += 1
    if not word_counts:
        raise EmptyCorpusError("training corpus is empty")

    base_vocab = sorted({tok for word in word_counts for tok in word})
    if k < len(base_vocab):
        raise InvalidVocabSizeError(
            f"vocab size {k} is below the base vocabulary size {len(base_vocab)}",
            base_size=len(base_vocab),
        )

    merges: list[tuple[str, str]] = []
    segmented = dict(word_counts)
    while len(base_vocab) + len(merges) < k:
        pair_counts: Counter[tuple[str, str]] = Counter()
        for word, freq in segmented.items():
            for pair in zip(word, word[1:]):
                pair_counts[pair] += freq
        if not pair_counts:
            break
        best_count = max(pair_counts.values())
        if best_count < 2:
            break
        best = min(p for p, c in pair_counts.items() if c == best_count)
        merges.append(best)
        merged = f"{best[0]} {best[1]}"
        segmented = {
            _apply_merge(word, best, merged): freq for word, freq in segmented.items()
        }

    return BpeModel(marker=marker, merges=merges, base_vocab=base_vocab)


def _apply_merge(
    word: tuple[str, ...], pair: tuple[str, str], merged: str
) -> tuple[str, ...]:
    out: list[str] = []
    i = 0
    while i < len(word):
        if i + 1 < len(word) and word[i] == pair[0] and word[i + 1] == pair[1]:
            out.append(merged)
            i += 2
        else:
            out.append(word[i])
            i += 1
    return tuple(out)


def encode_word(tokens: Sequence[str], model: BpeModel) -> list[str]:
    """Encode one word's token sequence into subword units.

    Greedy and deterministic: at each position the longest unit in the
    model vocabulary matching the (marker-attached) token sequence is
    taken. Tokens that cannot start any unit are emitted as ``<unk>``.
    """
    if not tokens:
        raise ValueError("cannot encode an empty word")
    marked = _marked(tokens, model.marker)
    out: list[str] = []
    i = 0
    while i < len(marked):
        span = min(model._max_span, len(marked) - i)
        while span > 0:
            candidate = " ".join(marked[i : i + span])
            if candidate in model:
                out.append(candidate)
                i += span
                break
            span -= 1
        else:
            out.append(UNK)
            i += 1
    return out


def encode_corpus(
    text: Iterable[Sequence[str]],
    lexicon,
    model: BpeModel,
) -> list[list[str]]:
    """Encode sentences (lists of words) into subword unit sequences.

    With a lexicon, each word is looked up and its pronunciation encoded
    (phone mode); with ``lexicon=None`` the word is spelled into its
    characters first (char mode). Words without a pronunciation encode
    to a single ``<unk>``.
    """
    encoded: list[list[str]] = []
    for sentence in text:
        units: list[str] = []
        for word in sentence:
            if lexicon is None:
                tokens: Sequence[str] | None = list(word)
            else:
                tokens = lexicon.pronunciation(word)
            if not tokens:
                units.append(UNK)
            else:
                units.extend(encode_word(tokens, model))
        encoded.append(units)
    return encoded


def decode_tokens(units: Sequence[str], marker: str = DEFAULT_MARKER) -> list[list[str]]:
    """Split a unit sequence back into per-word base token sequences.

    Inverse of :func:`encode_word` for in-vocabulary tokens: markers are
    stripped and merged units are split at their internal spaces.
    """
    if not units or not units[0].startswith(marker):
        raise MalformedSequenceError(
            "unit sequence does not start with a word-boundary unit",
            units=list(units[:3]),
        )
    words: list[list[str]] = []
    current: list[str] = []
    for unit in units:
        if unit.startswith(marker):
            if current:
                words.append(current)
            current = unit[1:].split(" ")
        else:
            current.extend(unit.split(" "))
    words.append(current)
    return words


def save_model(model: BpeModel, path: str) -> None:
    """Write a model file: header, base tokens, then merges in order."""
    lines = [f"bpe-model v1 marker={model.marker}", "base:"]
    lines.extend(model.base_vocab)
    lines.append("merges:")
    lines.extend(f"{left}\t{right}" for left, right in model.merges)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def load_model(path: str) -> BpeModel:
    with open(path, encoding="utf-8") as fh:
        lines = [line.rstrip("\n") for line in fh]
    lines = [line for line in lines if line]
    if not lines:
        raise MalformedModelError("empty model file", path=path)
    match = _HEADER_RE.match(lines[0])
    if not match:
        raise MalformedModelError(f"bad model header: {lines[0]!r}", path=path)
    if len(lines) < 2 or lines[1] != "base:":
        raise MalformedModelError("missing 'base:' section", path=path)
    base: list[str] = []
    merges: list[tuple[str, str]] = []
    section = "base"
    for line in lines[2:]:
        if line == "merges:":
            section = "merges"
            continue
        if section == "base":
            base.append(line)
        else:
            left, sep, right = line.partition("\t")
            if not sep:
                raise MalformedModelError(f"bad merge line: {line!r}", path=path)
            merges.append((left, right))
    try:
        return BpeModel(marker=match.group(1), merges=merges, base_vocab=base)
    except ValueError as exc:
        raise MalformedModelError(str(exc), path=path) from exc
