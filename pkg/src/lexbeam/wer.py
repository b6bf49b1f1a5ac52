"""Word error rate via Levenshtein alignment with unit costs."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

from .errors import MalformedEntryError


@dataclass
class EditCounts:
    substitutions: int = 0
    deletions: int = 0
    insertions: int = 0
    ref_words: int = 0

    @property
    def errors(self) -> int:
        return self.substitutions + self.deletions + self.insertions

    @property
    def wer(self) -> float:
        """Error rate in percent; empty references with errors rate 100%."""
        if self.ref_words == 0:
            return 0.0 if self.errors == 0 else 100.0
        return 100.0 * self.errors / self.ref_words

    def __iadd__(self, other: "EditCounts") -> "EditCounts":
        self.substitutions += other.substitutions
        self.deletions += other.deletions
        self.insertions += other.insertions
        self.ref_words += other.ref_words
        return self


def align(ref: Sequence[str], hyp: Sequence[str]) -> EditCounts:
    """Minimum-edit alignment of a hypothesis against a reference.

    Uniform substitution/insertion/deletion cost of 1; among equal-cost
    alignments substitutions are preferred over insert+delete pairs.
    """
    n, m = len(ref), len(hyp)
    # dp[i][j] = (cost, subs, dels, ins) for ref[:i] vs hyp[:j]
    dp = [[(0, 0, 0, 0)] * (m + 1) for _ in range(n + 1)]
    for i in range(1, n + 1):
        dp[i][0] = (i, 0, i, 0)
    for j in range(1, m + 1):
        dp[0][j] = (j, 0, 0, j)
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            if ref[i - 1] == hyp[j - 1]:
                dp[i][j] = dp[i - 1][j - 1]
                continue
            c_sub, s, d, k = dp[i - 1][j - 1]
            c_del = dp[i - 1][j][0]
            c_ins = dp[i][j - 1][0]
            best = min(c_sub, c_del, c_ins)
            if best == c_sub:
                dp[i][j] = (c_sub + 1, s + 1, d, k)
            elif best == c_del:
                _, s, d, k = dp[i - 1][j]
                dp[i][j] = (c_del + 1, s, d + 1, k)
            else:
                _, s, d, k = dp[i][j - 1]
                dp[i][j] = (c_ins + 1, s, d, k + 1)
    cost, subs, dels, ins = dp[n][m]
    return EditCounts(
        substitutions=subs, deletions=dels, insertions=ins, ref_words=n
    )


def load_transcript(lines: Iterable[str]) -> dict[str, list[str]]:
    """Parse ``id<TAB>words`` lines; words may be empty but not missing."""
    out: dict[str, list[str]] = {}
    for lineno, raw in enumerate(lines, start=1):
        line = raw.rstrip("\n")
        if not line.strip():
            continue
        utt_id, sep, words = line.partition("\t")
        if not sep:
            raise MalformedEntryError(
                f"line {lineno}: expected 'id<TAB>words': {line!r}", line=lineno
            )
        out[utt_id] = words.split()
    return out


def score_transcripts(
    hyp: dict[str, list[str]], ref: dict[str, list[str]]
) -> tuple[EditCounts, dict[str, EditCounts]]:
    """Aggregate WER over reference utterances, hypothesis matched by id.

    Every reference utterance must be non-empty; a missing hypothesis
    counts as all deletions.
    """
    total = EditCounts()
    per_utt: dict[str, EditCounts] = {}
    for utt_id in sorted(ref):
        ref_words = ref[utt_id]
        if not ref_words:
            raise MalformedEntryError(f"reference for {utt_id!r} is empty", utt=utt_id)
        counts = align(ref_words, hyp.get(utt_id, []))
        per_utt[utt_id] = counts
        total += counts
    return total, per_utt


def format_report(total: EditCounts, sentences: int) -> str:
    return (
        f"WER {total.wer:.2f}% "
        f"(S={total.substitutions} D={total.deletions} I={total.insertions}) "
        f"errors={total.errors} ref_words={total.ref_words} sentences={sentences}"
    )
