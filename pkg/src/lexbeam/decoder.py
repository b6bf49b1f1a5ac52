"""Beam search with multi-level LM fusion, single-system and joint.

In joint mode the phone-side system proposes subword expansions and the
character-side system follows: whenever the phone side emits a word, the
word is decomposed with the character BPE model and the second system is
advanced through those units, its score blended in at the boundary. The
second system never proposes units of its own.

Beams store the LM state that has consumed everything except the last
decoded unit; each expansion forwards that unit first. Results are
deterministic under any expansion schedule: candidates are gathered in
beam order and all selections break ties lexicographically.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .acoustic import AmScorer, Utterance
from .lm import LmState, NGramLm
from .multilevel import MultiLevelLm, MultiLevelState
from .subword import BpeModel, encode_word
from .symbols import EOS, INCOMPLETE, SOS, UNK

DEFAULT_MAX_STEPS = 200


@dataclass
class DecoderConfig:
    beamsize: int = 20
    beta: float = 1.0
    gamma: float = 0.2  # joint mode only: weight of the second system
    nbest: int | None = None
    max_steps: int | None = None
    end_detect_window: int = 3
    end_detect_margin: float = 10.0
    parallel: bool = False

    def __post_init__(self):
        if self.beamsize < 1:
            raise ValueError("beamsize must be >= 1")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must be in [0, 1]")
        if self.beta < 0:
            raise ValueError("beta must be >= 0")


@dataclass(eq=False)
class Beam:
    score: float
    ws: tuple[str, ...]
    sc1: float
    ys1: tuple[str, ...]
    st1: MultiLevelState
    sc2: float
    ys2: tuple[str, ...]
    st2: LmState | None


@dataclass(eq=False)
class Hypothesis:
    words: tuple[str, ...]
    score: float
    sc1: float
    sc2: float
    ys1: tuple[str, ...]
    ys2: tuple[str, ...]


@dataclass
class DecodeResult:
    hypotheses: list[Hypothesis] = field(default_factory=list)
    truncated: bool = False
    steps: int = 0

    @property
    def best(self) -> Hypothesis | None:
        return self.hypotheses[0] if self.hypotheses else None


def top(scores: np.ndarray, beamsize: int, units: Sequence[str]) -> list[tuple[float, str]]:
    """The ``beamsize`` best (score, unit) pairs, ties in unit order.

    Non-finite entries are never returned: a unit scored -inf is not a
    candidate, and ``<sos>`` is excluded as it is never an output.
    """
    pairs = [
        (float(s), u)
        for s, u in zip(scores, units)
        if u != SOS and math.isfinite(s)
    ]
    pairs.sort(key=lambda p: (-p[0], p[1]))
    return pairs[:beamsize]


def prune(beams: list[Beam], beamsize: int) -> list[Beam]:
    """Keep the ``beamsize`` best beams by score.

    Ties break on (ys1, ws) so the outcome is independent of candidate
    arrival order; beams identical in (ys1, ws) are merged, keeping the
    higher score.
    """
    ordered = sorted(beams, key=lambda b: (-b.score, b.ys1, b.ws))
    kept: list[Beam] = []
    seen: set[tuple[tuple[str, ...], tuple[str, ...]]] = set()
    for beam in ordered:
        key = (beam.ys1, beam.ws)
        if key in seen:
            continue
        seen.add(key)
        kept.append(beam)
        if len(kept) == beamsize:
            break
    return kept


def end_detection(
    completed: list[Hypothesis],
    best_by_length: Sequence[float],
    cfg: DecoderConfig,
) -> bool:
    """Stop once recent partial hypotheses all trail the best finished one.

    True iff, for the last ``end_detect_window`` lengths, the best
    partial score fell more than ``end_detect_margin`` below the best
    completed score. Never fires before anything has completed.
    """
    if not completed:
        return False
    if len(best_by_length) < cfg.end_detect_window:
        return False
    threshold = max(h.score for h in completed) - cfg.end_detect_margin
    return all(p < threshold for p in best_by_length[-cfg.end_detect_window :])


class _JointSide:
    """Second (character) system of a joint decode."""

    def __init__(self, am: AmScorer, lm: NGramLm, bpe: BpeModel, beta: float):
        if am.vocab.units != lm.vocab.units:
            raise ValueError("second-system AM and LM vocabularies differ")
        missing = set(bpe.units()) - set(lm.vocab.units)
        if missing:
            raise ValueError(
                f"char BPE units missing from second-system vocab: {sorted(missing)[:5]}"
            )
        self.am = am
        self.lm = lm
        self.bpe = bpe
        self.beta = beta

    def encode(self, word: str) -> list[str]:
        if word == UNK:
            return [UNK]
        return encode_word(list(word), self.bpe)

    def advance(
        self,
        x: Utterance,
        sc2: float,
        ys2: tuple[str, ...],
        st2: LmState,
        units: Sequence[str],
    ) -> tuple[float, tuple[str, ...], LmState]:
        """Run the second system through ``units``, accumulating AM+LM scores."""
        vocab = self.lm.vocab
        for y in units:
            st2, la2 = self.lm.forward(st2, ys2[-1])
            am_row = self.am.score(x, ys2)
            idx = vocab.index_or_unk(y)
            lm_term = self.beta * float(la2[idx]) if self.beta else 0.0
            sc2 += float(am_row[idx]) + lm_term
            ys2 = ys2 + (y,)
        return sc2, ys2, st2


def decode_single(
    x: Utterance,
    am: AmScorer,
    mlm: MultiLevelLm,
    cfg: DecoderConfig,
) -> DecodeResult:
    """Beam decode one utterance with a single system."""
    if am.vocab.units != mlm.vocab.units:
        raise ValueError("AM vocabulary does not match the multi-level LM's")
    return _search(x, am, mlm, cfg, joint=None)


def decode_joint(
    x: Utterance,
    am1: AmScorer,
    mlm1: MultiLevelLm,
    am2: AmScorer,
    lm2: NGramLm,
    bpe2: BpeModel,
    cfg: DecoderConfig,
) -> DecodeResult:
    """One-pass joint decode: system 1 proposes, system 2 verifies.

    System 2 is advanced at every word boundary through the character
    BPE decomposition of the emitted word; the final score blends the
    two systems with weight ``gamma``.
    """
    if am1.vocab.units != mlm1.vocab.units:
        raise ValueError("AM vocabulary does not match the multi-level LM's")
    side2 = _JointSide(am2, lm2, bpe2, cfg.beta)
    return _search(x, am1, mlm1, cfg, joint=side2)


def _search(
    x: Utterance,
    am1: AmScorer,
    mlm1: MultiLevelLm,
    cfg: DecoderConfig,
    joint: _JointSide | None,
) -> DecodeResult:
    max_steps = cfg.max_steps
    if max_steps is None:
        max_steps = 2 * x.length_bound if x.length_bound else DEFAULT_MAX_STEPS

    beams = [
        Beam(
            score=0.0,
            ws=(),
            sc1=0.0,
            ys1=(SOS,),
            st1=mlm1.init_state(),
            sc2=0.0,
            ys2=(SOS,),
            st2=joint.lm.initial_state() if joint else None,
        )
    ]
    completed: list[Hypothesis] = []
    best_by_length: list[float] = []
    units = mlm1.vocab.units

    def expand(beam: Beam) -> list[Beam]:
        candidates: list[Beam] = []
        am_row = am1.score(x, beam.ys1)
        for res in mlm1.forward(beam.st1, beam.ys1[-1]):
            if cfg.beta:
                yscores = am_row + cfg.beta * res.la_scores
            else:
                # beta = 0 disables the LM entirely, -inf entries included
                yscores = am_row
            at_boundary = res.word != INCOMPLETE
            sc2_n, ys2_n, st2_n = beam.sc2, beam.ys2, beam.st2
            if joint and at_boundary:
                sc2_n, ys2_n, st2_n = joint.advance(
                    x, sc2_n, ys2_n, st2_n, joint.encode(res.word)
                )
            ws_n = beam.ws + (res.word,) if at_boundary else beam.ws
            for c, y in top(yscores, cfg.beamsize, units):
                if joint and at_boundary:
                    score_n = (1.0 - cfg.gamma) * beam.sc1 + cfg.gamma * sc2_n + c
                else:
                    score_n = beam.score + c
                candidates.append(
                    Beam(
                        score=score_n,
                        ws=ws_n,
                        sc1=beam.sc1 + c,
                        ys1=beam.ys1 + (y,),
                        st1=res.state,
                        sc2=sc2_n,
                        ys2=ys2_n,
                        st2=st2_n,
                    )
                )
        return candidates

    def finish(beam: Beam) -> list[Hypothesis]:
        hyps = []
        for fadj, word in mlm1.finalize(beam.st1):
            sc1_f = beam.sc1 + (cfg.beta * fadj if cfg.beta else 0.0)
            ws_f = beam.ws + (word,) if word else beam.ws
            if joint:
                closing = (joint.encode(word) if word else []) + [EOS]
                sc2_f, ys2_f, _ = joint.advance(
                    x, beam.sc2, beam.ys2, beam.st2, closing
                )
                score_f = (1.0 - cfg.gamma) * sc1_f + cfg.gamma * sc2_f
            else:
                sc2_f, ys2_f = beam.sc2, beam.ys2
                score_f = sc1_f
            hyps.append(
                Hypothesis(
                    words=ws_f,
                    score=score_f,
                    sc1=sc1_f,
                    sc2=sc2_f,
                    ys1=beam.ys1,
                    ys2=ys2_f,
                )
            )
        return hyps

    steps = 0
    pool = ThreadPoolExecutor(max_workers=8) if cfg.parallel else None
    try:
        while steps < max_steps:
            steps += 1
            if pool is not None:
                expansions = list(pool.map(expand, beams))
            else:
                expansions = [expand(b) for b in beams]
            beams = prune([c for group in expansions for c in group], cfg.beamsize)
            still_open: list[Beam] = []
            for beam in beams:
                if beam.ys1[-1] == EOS:
                    completed.extend(finish(beam))
                else:
                    still_open.append(beam)
            beams = still_open
            if not beams:
                break
            best_by_length.append(max(b.score for b in beams))
            if end_detection(completed, best_by_length, cfg):
                break
    finally:
        if pool is not None:
            pool.shutdown(wait=False)

    completed.sort(key=lambda h: (-h.score, h.words, h.ys1))
    limit = cfg.nbest if cfg.nbest is not None else cfg.beamsize
    return DecodeResult(
        hypotheses=completed[:limit],
        truncated=not completed,
        steps=steps,
    )


# --- batch + output formatting -------------------------------------------

def decode_batch(
    utterances: Sequence[Utterance],
    decode_fn: Callable[[Utterance], DecodeResult],
    jobs: int = 1,
) -> list[DecodeResult]:
    """Decode utterances independently; results follow input order."""
    if jobs <= 1 or len(utterances) <= 1:
        return [decode_fn(x) for x in utterances]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(decode_fn, utterances))


def hypothesis_record(utt_id: str, rank: int, hyp: Hypothesis) -> dict:
    return {
        "utt": utt_id,
        "rank": rank,
        "score": hyp.score,
        "sc1": hyp.sc1,
        "sc2": hyp.sc2,
        "words": list(hyp.words),
        "ys1": list(hyp.ys1),
        "ys2": list(hyp.ys2),
    }


def nbest_lines(utt_id: str, result: DecodeResult) -> list[str]:
    """One JSON record per hypothesis, rank 1 first."""
    return [
        json.dumps(hypothesis_record(utt_id, rank, hyp), ensure_ascii=False)
        for rank, hyp in enumerate(result.hypotheses, start=1)
    ]


def transcript_line(utt_id: str, result: DecodeResult) -> str:
    """Top-1 words as ``id<TAB>words`` (empty words if nothing completed)."""
    words = " ".join(result.best.words) if result.best else ""
    return f"{utt_id}\t{words}"
