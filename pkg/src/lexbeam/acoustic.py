"""Acoustic scoring contract and deterministic synthetic scorers.

A scorer maps (utterance, decoded prefix) to a log-score vector over the
subword vocabulary. The neural models this replaces are out of scope;
anything honoring the contract (including host-language callbacks) can
drive the decoder.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import ContractViolationError, MalformedAmTableError
from .lm import LmVocab
from .symbols import EOS


@dataclass
class Utterance:
    """A decodable input: an id plus whatever payload its scorers need.

    ``length_bound`` caps the expected output length; the decoder derives
    its step budget from it when the config does not pin one.
    """

    id: str
    payload: dict = field(default_factory=dict)
    length_bound: int | None = None


class AmScorer:
    """Scoring contract: ``score(x, ys) -> vector`` over ``vocab``.

    ``ys`` is the decoded prefix including ``<sos>``. Implementations
    must be pure in (x, ys); values are finite or -inf.
    """

    vocab: LmVocab

    def score(self, x: Utterance, ys: Sequence[str]) -> np.ndarray:
        raise NotImplementedError


class TableAm(AmScorer):
    """Position-indexed score table: row t scores the t-th output unit.

    Positions past the last row are clamped to it, so short tables
    effectively repeat their final row.
    """

    def __init__(self, vocab: LmVocab, rows: np.ndarray):
        rows = np.asarray(rows, dtype=float)
        if rows.ndim != 2 or rows.shape[1] != len(vocab):
            raise MalformedAmTableError(
                f"table shape {rows.shape} does not match vocab size {len(vocab)}"
            )
        rows.setflags(write=False)
        self.vocab = vocab
        self.rows = rows

    def score(self, x: Utterance, ys: Sequence[str]) -> np.ndarray:
        t = min(len(ys) - 1, len(self.rows) - 1)
        return self.rows[t]


class OracleAm(AmScorer):
    """Scores 0 along one reference unit sequence, a penalty elsewhere.

    With the reference exhausted, ``<eos>`` scores 0. A prefix that has
    diverged from the reference is penalized across the whole vocabulary.
    """

    def __init__(
        self,
        vocab: LmVocab,
        reference: Sequence[str],
        mismatch_penalty: float = -10.0,
    ):
        if mismatch_penalty >= 0:
            raise ValueError("mismatch_penalty must be < 0")
        self.vocab = vocab
        self.reference = tuple(reference)
        self.mismatch_penalty = mismatch_penalty

    def score(self, x: Utterance, ys: Sequence[str]) -> np.ndarray:
        vec = np.full(len(self.vocab), self.mismatch_penalty)
        emitted = tuple(ys[1:])
        if emitted == self.reference[: len(emitted)]:
            if len(emitted) < len(self.reference):
                target = self.reference[len(emitted)]
            else:
                target = EOS
            vec[self.vocab.index_or_unk(target)] = 0.0
        vec.setflags(write=False)
        return vec


class CallbackAm(AmScorer):
    """Adapter for host-language scoring callbacks.

    The callable receives (utterance id, prefix tuple) and must return
    one score per vocabulary unit, using None for -inf. Results are
    memoized per prefix, which the purity contract makes safe and which
    keeps round trips down for remote callbacks.
    """

    def __init__(self, vocab: LmVocab, fn: Callable[[str, tuple[str, ...]], Sequence[float | None]]):
        self.vocab = vocab
        self.fn = fn
        self._memo: dict[tuple[str, tuple[str, ...]], np.ndarray] = {}

    def score(self, x: Utterance, ys: Sequence[str]) -> np.ndarray:
        key = (x.id, tuple(ys))
        cached = self._memo.get(key)
        if cached is not None:
            return cached
        raw = self.fn(x.id, key[1])
        vec = self._validate(raw, key[1])
        self._memo[key] = vec
        return vec

    def _validate(self, raw, prefix: tuple[str, ...]) -> np.ndarray:
        values = list(raw)
        if len(values) != len(self.vocab):
            raise ContractViolationError(
                f"callback returned {len(values)} scores, expected {len(self.vocab)}",
                prefix=list(prefix),
            )
        vec = np.empty(len(self.vocab))
        for i, v in enumerate(values):
            if v is None:
                vec[i] = -math.inf
                continue
            v = float(v)
            if math.isnan(v) or v == math.inf:
                raise ContractViolationError(
                    f"callback returned non-finite score {v!r} at position {i}",
                    prefix=list(prefix),
                )
            vec[i] = v
        vec.setflags(write=False)
        return vec


def write_table_am(vocab: LmVocab, rows: np.ndarray, path: str) -> None:
    """Write a table file: header, tab-joined vocab line, one row per line."""
    lines = ["am-table v1", "\t".join(vocab.units)]
    for row in np.asarray(rows, dtype=float):
        lines.append("\t".join(format(v, ".17g") for v in row))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def load_table_am(path: str, vocab: LmVocab | None = None) -> TableAm:
    """Load a table file; with ``vocab`` given, the file's must match it."""
    with open(path, encoding="utf-8") as fh:
        lines = [line.rstrip("\n") for line in fh if line.strip()]
    if not lines or lines[0] != "am-table v1":
        raise MalformedAmTableError("missing 'am-table v1' header", path=path)
    if len(lines) < 2:
        raise MalformedAmTableError("missing vocab line", path=path)
    units = lines[1].split("\t")
    file_vocab = LmVocab(units)
    if sorted(units) != sorted(file_vocab.units):
        raise MalformedAmTableError(
            "vocab line must list every unit exactly once, "
            "including <sos>/<eos>/<unk>",
            path=path,
        )
    if vocab is not None and file_vocab.units != vocab.units:
        raise MalformedAmTableError(
            "table vocab does not match the system's subword vocab", path=path
        )
    rows = []
    width = len(units)
    for lineno, line in enumerate(lines[2:], start=3):
        values = [float(v) for v in line.split("\t")]
        if len(values) != width:
            raise MalformedAmTableError(
                f"line {lineno}: row has {len(values)} values, expected {width}",
                path=path,
                line=lineno,
            )
        rows.append(values)
    if not rows:
        raise MalformedAmTableError("table has no rows", path=path)
    matrix = np.array(rows)
    if units != file_vocab.units:
        # columns follow the file's unit order; realign to canonical order
        matrix = matrix[:, [units.index(u) for u in file_vocab.units]]
    return TableAm(vocab or file_vocab, matrix)
