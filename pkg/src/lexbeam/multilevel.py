"""Multi-level language model: subword LM fused with a word LM over a prefix tree.

The model walks the pronunciation prefix tree as subword units arrive,
accumulating weighted subword-LM scores. When a unit starting with the
word-boundary marker arrives while a partial word is pending, every word
stored on the current node is emitted as a separate branch, and the
accumulated subword score is replaced by the word LM's score for the
emitted word. Nodes with no words emit ``<unk>`` with a penalty.

States are values and forwarding is pure, so beams can be advanced
concurrently against one shared model.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .lexicon import PrefixTree, TreeNode
from .lm import LmState, LmVocab, LogpVector, NGramLm
from .symbols import EOS, INCOMPLETE, SOS, UNK


@dataclass
class MultiLevelState:
    """Algorithm state: LM states/log-probs for both levels, tree position,
    and the subword score accumulated since the last word boundary."""

    s_state: LmState
    s_logp: LogpVector
    w_state: LmState
    w_logp: LogpVector
    node: TreeNode
    accum: float


@dataclass
class ForwardResult:
    state: MultiLevelState
    la_scores: LogpVector
    word: str  # emitted word, or INCOMPLETE when no boundary was crossed


class MultiLevelLm:
    """Combines a subword LM, a word LM and a pronunciation prefix tree.

    ``alpha`` weighs the subword LM; at ``alpha=0`` no subword-LM value
    reaches the returned scores. ``oov_penalty`` (log domain, <= 0) is
    added when a word boundary closes over a node with no words.
    """

    def __init__(
        self,
        subword_lm: NGramLm,
        word_lm: NGramLm,
        tree: PrefixTree,
        marker: str,
        alpha: float = 0.6,
        oov_penalty: float = -10.0,
        premask: bool = False,
    ):
        if alpha < 0:
            raise ValueError("alpha must be >= 0")
        if oov_penalty > 0:
            raise ValueError("oov_penalty must be <= 0 (log domain)")
        self.subword_lm = subword_lm
        self.word_lm = word_lm
        self.tree = tree
        self.marker = marker
        self.alpha = alpha
        self.oov_penalty = oov_penalty
        self.premask = premask
        missing = tree.token_inventory - set(subword_lm.vocab.units)
        if missing:
            raise ValueError(
                f"tree edges missing from subword LM vocab: {sorted(missing)[:5]}"
            )

    @property
    def vocab(self) -> LmVocab:
        """Subword vocabulary; look-ahead vectors are indexed by it."""
        return self.subword_lm.vocab

    def init_state(self) -> MultiLevelState:
        """State after accepting ``<sos>`` in both LMs, positioned at the root."""
        s_state, s_logp = self.subword_lm.forward(self.subword_lm.initial_state(), SOS)
        w_state, w_logp = self.word_lm.forward(self.word_lm.initial_state(), SOS)
        return MultiLevelState(
            s_state=s_state,
            s_logp=s_logp,
            w_state=w_state,
            w_logp=w_logp,
            node=self.tree.root,
            accum=0.0,
        )

    def forward(self, state: MultiLevelState, s: str) -> list[ForwardResult]:
        """Accept subword ``s``; return one result per emitted word branch.

        Forwarding ``<sos>`` returns the initial look-ahead without
        advancing (``init_state`` has already consumed it), which lets
        callers uniformly forward on the last decoded unit.
        """
        if s == SOS:
            return [ForwardResult(state, self._mask(state, self._weighted(state.s_logp)), INCOMPLETE)]

        if s.startswith(self.marker) and state.node is not self.tree.root:
            return self._boundary(state, s)
        return [self._intra_word(state, s)]

    def _boundary(self, state: MultiLevelState, s: str) -> list[ForwardResult]:
        node_new = self.tree.root.branch(s)
        if node_new is None:
            # marker-initial unit that starts no lexicon word: dead end
            return [ForwardResult(state, self._neg_inf(), INCOMPLETE)]
        wordlist = state.node.words or [UNK]
        s_score = float(state.s_logp[self.vocab.index(s)])
        s_state_new, s_logp_new = self.subword_lm.forward(state.s_state, s)
        accum_new = self.alpha * s_score if self.alpha else 0.0
        base_la = self._weighted(s_logp_new)

        results = []
        for w in wordlist:
            if w == UNK:
                adjust = self.word_lm.vocab.score(state.w_logp, UNK) + self.oov_penalty
            else:
                adjust = self.word_lm.vocab.score(state.w_logp, w) - state.accum
            w_state_new, w_logp_new = self.word_lm.forward(state.w_state, w)
            state_new = MultiLevelState(
                s_state=s_state_new,
                s_logp=s_logp_new,
                w_state=w_state_new,
                w_logp=w_logp_new,
                node=node_new,
                accum=accum_new,
            )
            results.append(
                ForwardResult(state_new, self._mask(state_new, adjust + base_la), w)
            )
        return results

    def _intra_word(self, state: MultiLevelState, s: str) -> ForwardResult:
        node_new = state.node.branch(s)
        if node_new is None:
            return ForwardResult(state, self._neg_inf(), INCOMPLETE)
        s_score = float(state.s_logp[self.vocab.index(s)])
        s_state_new, s_logp_new = self.subword_lm.forward(state.s_state, s)
        state_new = replace(
            state,
            s_state=s_state_new,
            s_logp=s_logp_new,
            node=node_new,
            accum=state.accum + (self.alpha * s_score if self.alpha else 0.0),
        )
        return ForwardResult(state_new, self._mask(state_new, self._weighted(s_logp_new)), INCOMPLETE)

    def finalize(self, state: MultiLevelState) -> list[tuple[float, str | None]]:
        """Close the hypothesis on ``<eos>``.

        At the root there is no pending word: the word LM just scores
        ``<eos>``. Otherwise each pending word (or ``<unk>``) is emitted
        exactly as at a boundary, followed by the word LM's ``<eos>``
        score in the updated context.
        """
        wv = self.word_lm.vocab
        if state.node is self.tree.root:
            return [(float(state.w_logp[wv.eos_index]), None)]
        results: list[tuple[float, str | None]] = []
        for w in state.node.words or [UNK]:
            if w == UNK:
                adjust = wv.score(state.w_logp, UNK) + self.oov_penalty
            else:
                adjust = wv.score(state.w_logp, w) - state.accum
            _, w_logp_new = self.word_lm.forward(state.w_state, w)
            results.append((adjust + float(w_logp_new[wv.eos_index]), w))
        return results

    def _weighted(self, s_logp: np.ndarray) -> np.ndarray:
        # alpha = 0 must contribute exact zeros; 0 * -inf would be NaN
        if self.alpha == 0.0:
            return np.zeros(len(self.vocab))
        return self.alpha * s_logp

    def _neg_inf(self) -> np.ndarray:
        vec = np.full(len(self.vocab), -np.inf)
        vec.setflags(write=False)
        return vec

    def _mask(self, state: MultiLevelState, la: np.ndarray) -> np.ndarray:
        """Optionally pre-mask continuations the tree cannot accept.

        Off by default: invalid units are then killed on the next forward
        instead, at the cost of wasted beam slots.
        """
        if not self.premask:
            return la
        valid = set(state.node.children)
        valid.update(self.tree.root.children)
        valid.add(EOS)
        masked = np.full(len(self.vocab), -np.inf)
        for unit in valid:
            idx = self.vocab.index(unit)
            masked[idx] = la[idx]
        return masked
