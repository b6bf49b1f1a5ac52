"""Back-off n-gram language models behind a stateful forwarding contract.

The contract the rest of the toolkit depends on is
``forward(state, symbol) -> (new_state, logp_vector)`` where the vector
is the natural-log conditional distribution over the vocabulary given
the history including ``symbol``. Anything honoring that contract (an
external neural LM included) can substitute for :class:`NGramLm`.

Scores are natural log everywhere in memory; ARPA's log10 is converted
only at the file boundary. ``<sos>`` is part of the vocabulary (it can
appear in histories) but never receives probability mass.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import EmptyCorpusError, MalformedArpaError
from .symbols import EOS, SOS, UNK

LN10 = math.log(10.0)

SPECIALS = (SOS, EOS, UNK)

LogpVector = np.ndarray


class LmVocab:
    """Ordered symbol inventory with the reserved symbols always present."""

    def __init__(self, symbols: Iterable[str]):
        rest = sorted(set(symbols) - set(SPECIALS))
        self.units: list[str] = list(SPECIALS) + rest
        self._index = {u: i for i, u in enumerate(self.units)}
        self.sos_index = self._index[SOS]
        self.eos_index = self._index[EOS]
        self.unk_index = self._index[UNK]

    def index(self, symbol: str) -> int:
        return self._index[symbol]

    def index_or_unk(self, symbol: str) -> int:
        return self._index.get(symbol, self.unk_index)

    def score(self, vector: LogpVector, symbol: str) -> float:
        """Value of ``vector`` at ``symbol``, OOV symbols read at ``<unk>``."""
        return float(vector[self.index_or_unk(symbol)])

    def __len__(self) -> int:
        return len(self.units)

    def __contains__(self, symbol: str) -> bool:
        return symbol in self._index

    def __eq__(self, other) -> bool:
        return isinstance(other, LmVocab) and self.units == other.units


@dataclass(frozen=True)
class LmState:
    """Bounded history of recent symbols (length < model order)."""

    history: tuple[str, ...] = ()


class NGramLm:
    """Add-k smoothed back-off n-gram model.

    Contexts seen in training store a dense conditional distribution
    (add-k over the full support), so back-off only triggers for unseen
    contexts, where the weight is 1. Generic ARPA files with real
    back-off weights evaluate through the same path.
    """

    def __init__(
        self,
        order: int,
        vocab: LmVocab,
        tables: list[dict[tuple[str, ...], dict[int, float]]],
        backoff: dict[tuple[str, ...], float] | None = None,
    ):
        if order < 1:
            raise ValueError("order must be >= 1")
        if len(tables) != order or () not in tables[0]:
            raise ValueError("tables must cover orders 1..order with a unigram entry")
        self.order = order
        self.vocab = vocab
        self.tables = tables
        self.backoff = backoff or {}
        self._dist_cache: dict[tuple[str, ...], np.ndarray] = {}

    def initial_state(self) -> LmState:
        return LmState()

    def forward(self, state: LmState, symbol: str) -> tuple[LmState, LogpVector]:
        """Advance the history by ``symbol`` (OOV becomes ``<unk>``).

        Returns the new state and the distribution over the next symbol.
        Pure: equal inputs give equal outputs.
        """
        mapped = symbol if symbol in self.vocab else UNK
        if self.order == 1:
            history: tuple[str, ...] = ()
        else:
            history = (state.history + (mapped,))[-(self.order - 1) :]
        return LmState(history), self._dist(history)

    def _dist(self, ctx: tuple[str, ...]) -> np.ndarray:
        cached = self._dist_cache.get(ctx)
        if cached is not None:
            return cached
        if not ctx:
            vec = self._dense_unigram()
        else:
            stored = self.tables[len(ctx)].get(ctx) if len(ctx) < self.order else None
            bow = self.backoff.get(ctx)
            if stored is None and bow is None:
                vec = self._dist(ctx[1:])
            else:
                vec = self._dist(ctx[1:]) + (bow or 0.0)
                for idx, logp in (stored or {}).items():
                    vec[idx] = logp
                vec.setflags(write=False)
        self._dist_cache[ctx] = vec
        return vec

    def _dense_unigram(self) -> np.ndarray:
        vec = np.full(len(self.vocab), -np.inf)
        for idx, logp in self.tables[0][()].items():
            vec[idx] = logp
        vec[self.vocab.sos_index] = -np.inf
        vec.setflags(write=False)
        return vec

    def reachable_contexts(self) -> list[tuple[str, ...]]:
        """All training-time contexts, longest first (test/inspection aid)."""
        out: list[tuple[str, ...]] = []
        for table in reversed(self.tables):
            out.extend(sorted(table))
        return out


def train_ngram(
    corpus: Iterable[Sequence[str]],
    order: int,
    add_k: float = 0.1,
    extra_vocab: Iterable[str] = (),
) -> NGramLm:
    """Estimate an add-k n-gram model from symbol sequences.

    Sequences are padded with ``<sos>`` and closed with ``<eos>``.
    ``extra_vocab`` closes the vocabulary over symbols that may be absent
    from the corpus (for example the full BPE unit inventory), which get
    smoothed mass only.
    """
    if order < 1:
        raise ValueError("order must be >= 1")
    if add_k <= 0:
        raise ValueError("add-k constant must be > 0")
    sentences = [list(s) for s in corpus]
    if not sentences:
        raise EmptyCorpusError("LM training corpus is empty")

    symbols = {sym for sent in sentences for sym in sent}
    symbols.update(extra_vocab)
    vocab = LmVocab(symbols)

    counts: list[dict[tuple[str, ...], dict[str, int]]] = [
        {} for _ in range(order)
    ]
    for sent in sentences:
        tokens = [SOS] * max(order - 1, 1) + sent + [EOS]
        start = max(order - 1, 1)
        for i in range(start, len(tokens)):
            target = tokens[i]
            for n in range(1, order + 1):
                ctx = tuple(tokens[i - n + 1 : i])
                ctx_counts = counts[n - 1].setdefault(ctx, {})
                ctx_counts[target] = ctx_counts.get(target, 0) + 1

    support = [u for u in vocab.units if u != SOS]
    denom_extra = add_k * len(support)
    tables: list[dict[tuple[str, ...], dict[int, float]]] = []
    for n in range(order):
        table: dict[tuple[str, ...], dict[int, float]] = {}
        for ctx, ctx_counts in counts[n].items():
            total = sum(ctx_counts.values())
            dist = {
                vocab.index(sym): math.log(
                    (ctx_counts.get(sym, 0) + add_k) / (total + denom_extra)
                )
                for sym in support
            }
            table[ctx] = dist
        tables.append(table)
    return NGramLm(order=order, vocab=vocab, tables=tables)


def uniform_lm(symbols: Iterable[str]) -> NGramLm:
    """Unigram model assigning equal probability to every non-``<sos>`` symbol."""
    vocab = LmVocab(symbols)
    support = [u for u in vocab.units if u != SOS]
    logp = math.log(1.0 / len(support))
    table = {(): {vocab.index(sym): logp for sym in support}}
    return NGramLm(order=1, vocab=vocab, tables=[table])


def score_sequence(lm: NGramLm, symbols: Sequence[str]) -> float:
    """Total log probability of ``symbols`` followed by ``<eos>``."""
    state, dist = lm.forward(lm.initial_state(), SOS)
    total = 0.0
    for sym in symbols:
        total += vocab_score(lm, dist, sym)
        state, dist = lm.forward(state, sym)
    return total + float(dist[lm.vocab.eos_index])


def vocab_score(lm: NGramLm, dist: LogpVector, symbol: str) -> float:
    return lm.vocab.score(dist, symbol)


# --- ARPA I/O -----------------------------------------------------------

def write_arpa(lm: NGramLm) -> str:
    """Serialize to ARPA text (log10 probabilities, tab-separated fields).

    Fields are tab-separated because subword symbols may contain spaces.
    Stored contexts are dense, so every back-off weight is log10(1) = 0.
    """
    sections: list[list[str]] = []
    counts: list[int] = []
    for n in range(1, lm.order + 1):
        lines: list[str] = []
        table = lm.tables[n - 1]
        for ctx in sorted(table):
            for idx, logp in sorted(
                table[ctx].items(), key=lambda kv: lm.vocab.units[kv[0]]
            ):
                gram = "\t".join(ctx + (lm.vocab.units[idx],))
                fields = [_fmt(logp / LN10), gram]
                if n < lm.order:
                    fields.append(_fmt(0.0))
                lines.append("\t".join(fields))
        sections.append(lines)
        counts.append(len(lines))

    out = ["\\data\\"]
    out.extend(f"ngram {n}={c}" for n, c in enumerate(counts, start=1))
    for n, lines in enumerate(sections, start=1):
        out.append("")
        out.append(f"\\{n}-grams:")
        out.extend(lines)
    out.extend(["", "\\end\\", ""])
    return "\n".join(out)


def _fmt(value: float) -> str:
    return format(value, ".10g")


def read_arpa(text: str) -> NGramLm:
    """Parse ARPA text back into an :class:`NGramLm`.

    Accepts tab-separated fields (this toolkit's writer) and falls back
    to whitespace splitting for conventional files.
    """
    lines = text.splitlines()
    pos = 0
    while pos < len(lines) and lines[pos].strip() != "\\data\\":
        if lines[pos].strip() and lines[pos].lstrip().startswith("\\"):
            raise MalformedArpaError(f"unknown section before \\data\\: {lines[pos]!r}")
        pos += 1
    if pos == len(lines):
        raise MalformedArpaError("missing \\data\\ section")
    pos += 1

    declared: dict[int, int] = {}
    while pos < len(lines):
        line = lines[pos].strip()
        if not line:
            pos += 1
            continue
        if line.startswith("\\"):
            break
        if not line.startswith("ngram "):
            raise MalformedArpaError(f"bad \\data\\ line: {line!r}")
        spec = line[len("ngram "):]
        n_str, _, count_str = spec.partition("=")
        try:
            declared[int(n_str)] = int(count_str)
        except ValueError as exc:
            raise MalformedArpaError(f"bad \\data\\ line: {line!r}") from exc
        pos += 1
    if not declared:
        raise MalformedArpaError("empty \\data\\ section")
    order = max(declared)
    if sorted(declared) != list(range(1, order + 1)):
        raise MalformedArpaError("non-contiguous n-gram orders in \\data\\")

    raw: dict[int, list[tuple[float, tuple[str, ...], float | None]]] = {
        n: [] for n in declared
    }
    current: int | None = None
    while pos < len(lines):
        line = lines[pos].strip()
        pos += 1
        if not line:
            continue
        if line == "\\end\\":
            current = None
            break
        if line.startswith("\\") and line.endswith("-grams:"):
            try:
                current = int(line[1:-len("-grams:")])
            except ValueError as exc:
                raise MalformedArpaError(f"bad section header: {line!r}") from exc
            if current not in declared:
                raise MalformedArpaError(f"section {line!r} not declared in \\data\\")
            continue
        if line.startswith("\\"):
            raise MalformedArpaError(f"unknown section: {line!r}")
        if current is None:
            raise MalformedArpaError(f"entry outside any section: {line!r}")
        fields = line.split("\t")
        if len(fields) == 1:
            fields = line.split()
        if len(fields) == current + 1:
            bow = None
        elif len(fields) == current + 2:
            bow = float(fields[-1]) * LN10
            fields = fields[:-1]
        else:
            raise MalformedArpaError(f"bad {current}-gram line: {line!r}")
        logp = float(fields[0]) * LN10
        raw[current].append((logp, tuple(fields[1:]), bow))

    for n, entries in raw.items():
        if len(entries) != declared[n]:
            raise MalformedArpaError(
                f"\\data\\ declares {declared[n]} {n}-grams, found {len(entries)}",
                order=n,
            )

    vocab = LmVocab(sym for _, gram, _ in raw[1] for sym in gram if sym != SOS)
    tables: list[dict[tuple[str, ...], dict[int, float]]] = [
        {} for _ in range(order)
    ]
    tables[0][()] = {}
    backoff: dict[tuple[str, ...], float] = {}
    for n, entries in raw.items():
        for logp, gram, bow in entries:
            ctx, sym = gram[:-1], gram[-1]
            # symbols missing from the unigram section cannot be indexed;
            # their probability entries are dropped, back-off weights kept
            if sym != SOS and sym in vocab:
                tables[n - 1].setdefault(ctx, {})[vocab.index(sym)] = logp
            if bow is not None and bow != 0.0:
                backoff[gram] = bow
    return NGramLm(order=order, vocab=vocab, tables=tables, backoff=backoff)


def save_arpa(lm: NGramLm, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(write_arpa(lm))


def load_arpa(path: str) -> NGramLm:
    with open(path, encoding="utf-8") as fh:
        return read_arpa(fh.read())
