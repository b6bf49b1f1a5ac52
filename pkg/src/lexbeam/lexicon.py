"""Pronunciation dictionary loading and prefix-tree compilation.

The tree's edges are subword units (from a trained BPE model) and its
nodes carry the words whose full pronunciation decomposition ends there.
Homophones therefore share a single node and are all listed on it.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable

from .errors import EmptyLexiconError, MalformedEntryError
from .subword import BpeModel, encode_word
from .symbols import UNK

_ALT_PRON_RE = re.compile(r"^(.*)\(\d+\)$")


class Lexicon:
    """Word to pronunciation mapping with exactly one pronunciation per word."""

    def __init__(self, entries: dict[str, list[str]] | None = None):
        self.entries: dict[str, list[str]] = {}
        for word, phones in (entries or {}).items():
            self.add(word, phones)

    def add(self, word: str, phones: Iterable[str]) -> bool:
        """Add an entry unless the word already has one. Returns True if added."""
        phones = list(phones)
        if not word or not phones:
            raise ValueError(f"invalid lexicon entry for {word!r}")
        if word in self.entries:
            return False
        self.entries[word] = phones
        return True

    def pronunciation(self, word: str) -> list[str] | None:
        return self.entries.get(word.lower())

    def words(self) -> list[str]:
        return sorted(self.entries)

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, word: str) -> bool:
        return word.lower() in self.entries


def load_lexicon(source: str | Iterable[str]) -> Lexicon:
    """Parse cmudict-style lines ``word phone phone ...``.

    Words are lowercased, phones uppercased. Alternate-pronunciation
    suffixes like ``word(2)`` are dropped; the first listed pronunciation
    of a word wins. Lines starting with ';' or '#' are comments.
    """
    if isinstance(source, str):
        lines: Iterable[str] = source.splitlines()
    else:
        lines = source
    lexicon = Lexicon()
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line[0] in ";#":
            continue
        parts = line.split()
        if len(parts) < 2:
            raise MalformedEntryError(
                f"line {lineno}: entry has no phones: {line!r}", line=lineno
            )
        word = parts[0]
        match = _ALT_PRON_RE.match(word)
        if match:
            word = match.group(1)
        word = word.lower()
        phones = [p.upper() for p in parts[1:]]
        lexicon.add(word, phones)
    if not len(lexicon):
        raise EmptyLexiconError("lexicon has no entries")
    return lexicon


def spelling_lexicon(words: Iterable[str]) -> Lexicon:
    """Lexicon whose 'pronunciations' are character spellings (char-BPE systems)."""
    lexicon = Lexicon()
    for word in words:
        lexicon.add(word.lower(), list(word.lower()))
    return lexicon


@dataclass
class TreeNode:
    children: dict[str, "TreeNode"] = field(default_factory=dict)
    words: list[str] = field(default_factory=list)

    def branch(self, unit: str) -> "TreeNode | None":
        """Child reached by accepting ``unit``, or None if no such edge."""
        return self.children.get(unit)

    def tokens(self) -> list[str]:
        """Edge units branching out of this node, lexicographically sorted."""
        return sorted(self.children)


@dataclass
class PrefixTree:
    root: TreeNode
    token_inventory: set[str]
    skipped: list[str] = field(default_factory=list)

    @property
    def skipped_count(self) -> int:
        return len(self.skipped)


def build_tree(lexicon: Lexicon, model: BpeModel) -> PrefixTree:
    """Compile the lexicon into a prefix tree over subword units.

    Words whose pronunciation decomposition contains ``<unk>`` cannot be
    placed on a valid path and are skipped (reported, not fatal).
    """
    root = TreeNode()
    inventory: set[str] = set()
    skipped: list[str] = []
    for word in lexicon.words():
        units = encode_word(lexicon.entries[word], model)
        if UNK in units:
            skipped.append(word)
            continue
        node = root
        for unit in units:
            inventory.add(unit)
            node = node.children.setdefault(unit, TreeNode())
        node.words.append(word)
    _sort_words(root)
    return PrefixTree(root=root, token_inventory=inventory, skipped=skipped)


def _sort_words(node: TreeNode) -> None:
    node.words.sort()
    for child in node.children.values():
        _sort_words(child)
