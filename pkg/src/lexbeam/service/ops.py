"""Operation layer: every endpoint (and CLI subcommand) maps onto one
function here taking a request model and returning a response model."""

from __future__ import annotations

import itertools
import os
import queue
import threading
import uuid
from dataclasses import dataclass, field

from .. import __version__
from ..acoustic import AmScorer, CallbackAm
from ..decoder import (
    DecoderConfig,
    decode_batch,
    decode_joint,
    decode_single,
    nbest_lines,
    transcript_line,
)
from ..errors import (
    ContractViolationError,
    EmptyCorpusError,
    LexbeamError,
    MissingFileError,
    NotFoundError,
)
from ..lexicon import load_lexicon
from ..lm import load_arpa, save_arpa, train_ngram
from ..subword import encode_corpus, load_model, save_model, train_merges
from ..systems import (
    System,
    build_utterance,
    load_system,
    load_verifier,
    oracle_scorer,
    read_utterances,
    table_scorer,
)
from ..taskgen import make_task
from ..wer import format_report, load_transcript, score_transcripts
from . import schemas

CALLBACK_WAIT_S = 300.0


def _require_path(path: str, what: str) -> str:
    if not path or not os.path.exists(path):
        raise MissingFileError(f"{what} not found: {path}", path=path)
    return path


def _read_text(path: str, what: str) -> str:
    with open(_require_path(path, what), encoding="utf-8") as fh:
        return fh.read()


def op_health() -> schemas.HealthResponse:
    return schemas.HealthResponse(version=__version__)


def op_bpe_train(req: schemas.BpeTrainRequest) -> schemas.BpeTrainResponse:
    text = _read_text(req.input_path, "training text")
    sentences = [line.split() for line in text.splitlines() if line.strip()]
    if not sentences:
        raise EmptyCorpusError("training text is empty", path=req.input_path)

    warnings: list[str] = []
    corpus: list[list[str]] = []
    if req.mode == "phone":
        if req.lexicon_path is None:
            raise ValueError("phone mode requires --lexicon")
        lexicon = load_lexicon(_read_text(req.lexicon_path, "lexicon"))
        skipped = 0
        for sent in sentences:
            for word in sent:
                pron = lexicon.pronunciation(word)
                if pron is None:
                    skipped += 1
                else:
                    corpus.append(pron)
        if skipped:
            warnings.append(f"{skipped} word occurrences not in lexicon were skipped")
    else:
        if req.lexicon_path is not None:
            warnings.append("char mode ignores the lexicon")
        corpus = [list(word) for sent in sentences for word in sent]

    model = train_merges(corpus, k=req.vocab_size, marker=req.marker)
    save_model(model, req.out_path)
    return schemas.BpeTrainResponse(
        out_path=req.out_path,
        base_size=len(model.base_vocab),
        merges=len(model.merges),
        vocab_size=model.vocab_size,
        warnings=warnings,
    )


def op_bpe_encode(req: schemas.BpeEncodeRequest) -> schemas.BpeEncodeResponse:
    model = load_model(_require_path(req.bpe_path, "BPE model"))
    lexicon = None
    if req.mode == "phone":
        if req.lexicon_path is None:
            raise ValueError("phone mode requires a lexicon")
        lexicon = load_lexicon(_read_text(req.lexicon_path, "lexicon"))
    sentences = [line.split() for line in req.text]
    return schemas.BpeEncodeResponse(units=encode_corpus(sentences, lexicon, model))


def op_lm_train(req: schemas.LmTrainRequest) -> schemas.LmTrainResponse:
    text = _read_text(req.input_path, "LM training text")
    corpus: list[list[str]] = []
    for line in text.splitlines():
        if not line.strip():
            continue
        if req.delimiter == "tab" or (req.delimiter == "auto" and "\t" in line):
            corpus.append([s for s in line.split("\t") if s])
        else:
            corpus.append(line.split())
    extra: list[str] = []
    if req.vocab_file:
        extra.extend(
            line.strip() for line in _read_text(req.vocab_file, "vocab file").splitlines()
            if line.strip()
        )
    if req.vocab_from_bpe:
        extra.extend(load_model(req.vocab_from_bpe).units())
    lm = train_ngram(corpus, order=req.order, add_k=req.add_k, extra_vocab=extra)
    save_arpa(lm, req.out_path)
    return schemas.LmTrainResponse(
        out_path=req.out_path,
        order=lm.order,
        vocab_size=len(lm.vocab),
        sentences=len(corpus),
    )


def _decoder_config(req: schemas.DecodeRequest, gamma: float = 0.2) -> DecoderConfig:
    return DecoderConfig(
        beamsize=req.beamsize,
        beta=req.beta,
        gamma=gamma,
        nbest=req.nbest,
        max_steps=req.max_steps,
        end_detect_window=req.end_detect_window,
        end_detect_margin=req.end_detect_margin,
        parallel=req.parallel,
    )


def _make_scorer(
    spec: schemas.AmSpec,
    system_vocab,
    system: System | None,
    words: list[str],
    utt_id: str,
    callback: AmScorer | None,
) -> tuple[AmScorer, list[str] | None]:
    """Scorer plus the reference units (when derivable) for one utterance."""
    units = system.reference_units(words) if (system and words) else None
    if spec.kind == "oracle":
        if units is None:
            raise ValueError(f"oracle AM needs reference words for {utt_id}")
        am, _ = oracle_scorer(system, words, spec.mismatch_penalty)
        return am, units
    if spec.kind == "table":
        if not spec.table_dir:
            raise ValueError("table AM needs table_dir")
        return table_scorer(system_vocab, spec.table_dir, utt_id), units
    if spec.kind == "callback":
        if callback is None:
            raise ValueError("callback AM is only valid in a callback session")
        return callback, units
    raise ValueError(f"unknown AM kind: {spec.kind}")


def _format_outputs(
    req: schemas.DecodeRequest,
    utt_ids: list[str],
    results,
) -> schemas.DecodeResponse:
    transcript = [transcript_line(u, r) for u, r in zip(utt_ids, results)]
    nbest: list[str] = []
    for u, r in zip(utt_ids, results):
        nbest.extend(nbest_lines(u, r))
    transcript_path = nbest_path = None
    if req.out_dir:
        os.makedirs(req.out_dir, exist_ok=True)
        transcript_path = os.path.join(req.out_dir, f"{req.out_prefix}.trn")
        nbest_path = os.path.join(req.out_dir, f"{req.out_prefix}.nbest.jsonl")
        with open(transcript_path, "w", encoding="utf-8") as fh:
            fh.write("\n".join(transcript) + "\n")
        with open(nbest_path, "w", encoding="utf-8") as fh:
            fh.write("\n".join(nbest) + ("\n" if nbest else ""))
    return schemas.DecodeResponse(
        utterances=len(utt_ids),
        truncated=sum(1 for r in results if r.truncated),
        transcript=transcript,
        nbest=nbest,
        transcript_path=transcript_path,
        nbest_path=nbest_path,
    )


def op_decode(
    req: schemas.DecodeRequest,
    callback: AmScorer | None = None,
) -> schemas.DecodeResponse:
    system = load_system(
        req.bpe_path,
        req.subword_lm_path,
        req.word_lm_path,
        lexicon_path=req.lexicon_path,
        mode=req.mode,
        words_path=req.words_path,
        alpha=req.alpha,
        oov_penalty=req.oov_penalty,
        premask=req.premask,
    )
    utts = read_utterances(req.utterances_path)
    cfg = _decoder_config(req)

    def decode_one(item):
        utt_id, words = item
        am, units = _make_scorer(
            req.am, system.mlm.vocab, system, words, utt_id, callback
        )
        x = build_utterance(utt_id, units)
        return decode_single(x, am, system.mlm, cfg)

    results = decode_batch(utts, decode_one, jobs=req.jobs)
    return _format_outputs(req, [u for u, _ in utts], results)


def op_decode_joint(
    req: schemas.JointDecodeRequest,
    callback1: AmScorer | None = None,
    callback2: AmScorer | None = None,
) -> schemas.DecodeResponse:
    if not req.bpe2_path or not req.lm2_path or req.am2 is None:
        raise ValueError("joint decoding requires bpe2_path, lm2_path and am2")
    system1 = load_system(
        req.bpe_path,
        req.subword_lm_path,
        req.word_lm_path,
        lexicon_path=req.lexicon_path,
        mode=req.mode,
        words_path=req.words_path,
        alpha=req.alpha,
        oov_penalty=req.oov_penalty,
        premask=req.premask,
    )
    bpe2, lm2 = load_verifier(req.bpe2_path, req.lm2_path)
    utts = read_utterances(req.utterances_path)
    cfg = _decoder_config(req, gamma=req.gamma)

    def decode_one(item):
        utt_id, words = item
        am1, units = _make_scorer(
            req.am, system1.mlm.vocab, system1, words, utt_id, callback1
        )
        am2, _ = _make_scorer(req.am2, lm2.vocab, None, words, utt_id, callback2)
        x = build_utterance(utt_id, units)
        return decode_joint(x, am1, system1.mlm, am2, lm2, bpe2, cfg)

    results = decode_batch(utts, decode_one, jobs=req.jobs)
    return _format_outputs(req, [u for u, _ in utts], results)


def op_score(req: schemas.ScoreRequest) -> schemas.ScoreResponse:
    hyp = load_transcript(_read_text(req.hyp_path, "hypothesis transcript").splitlines())
    ref = load_transcript(_read_text(req.ref_path, "reference transcript").splitlines())
    total, per_utt = score_transcripts(hyp, ref)
    return schemas.ScoreResponse(
        wer=total.wer,
        substitutions=total.substitutions,
        deletions=total.deletions,
        insertions=total.insertions,
        errors=total.errors,
        ref_words=total.ref_words,
        sentences=len(per_utt),
        report=format_report(total, sentences=len(per_utt)),
    )


def op_make_task(req: schemas.TaskRequest) -> schemas.TaskResponse:
    manifest = make_task(
        req.out_dir,
        seed=req.seed,
        n_words=req.n_words,
        n_utts=req.n_utts,
        homophone_pairs=req.homophone_pairs,
        train_sentences=req.train_sentences,
        k_extra=req.k_extra,
        lm_order=req.lm_order,
        add_k=req.add_k,
        oracle_penalty=req.oracle_penalty,
        noise=req.noise,
        char_noise=req.char_noise,
    )
    return schemas.TaskResponse(manifest=manifest)


# --- callback decode sessions ---------------------------------------------

@dataclass
class _PendingItem:
    req_id: int
    system: str
    utt: str
    prefix: tuple[str, ...]
    event: threading.Event = field(default_factory=threading.Event)
    scores: list[float | None] | None = None
    error: str | None = None


class CallbackSession:
    """One decode running in a worker thread, its AM scores supplied over
    the API. Score requests queue up while the client is between steps;
    parallel beam expansion lets one round trip carry a whole step."""

    def __init__(self, session_id: str):
        self.id = session_id
        self.queue: "queue.Queue[_PendingItem]" = queue.Queue()
        self.items: dict[int, _PendingItem] = {}
        self.done = threading.Event()
        self.result: schemas.DecodeResponse | None = None
        self.error: Exception | None = None
        self.vocab1: list[str] | None = None
        self.vocab2: list[str] | None = None
        self._ids = itertools.count()
        self._lock = threading.Lock()

    def scorer_fn(self, system: str):
        def request(utt_id: str, prefix: tuple[str, ...]):
            item = _PendingItem(next(self._ids), system, utt_id, prefix)
            with self._lock:
                self.items[item.req_id] = item
            self.queue.put(item)
            if not item.event.wait(CALLBACK_WAIT_S):
                raise ContractViolationError(
                    "callback scores not supplied in time", utt=utt_id
                )
            if item.error:
                raise ContractViolationError(item.error, utt=utt_id)
            return item.scores

        return request

    def collect(self, max_wait: float = 30.0, batch_window: float = 0.02):
        """Pending score requests; drains briefly so one step batches."""
        items: list[_PendingItem] = []
        waited = 0.0
        while waited < max_wait:
            timeout = batch_window if items else 0.1
            try:
                items.append(self.queue.get(timeout=timeout))
                continue
            except queue.Empty:
                waited += timeout
                if items or self.done.is_set():
                    return items
        return items

    def answer(self, answers: list[schemas.ScoreAnswer]) -> None:
        for ans in answers:
            with self._lock:
                item = self.items.pop(ans.req_id, None)
            if item is None:
                raise ContractViolationError(
                    f"unknown or already-answered request id {ans.req_id}"
                )
            item.scores = ans.scores
            item.event.set()

    def fail_pending(self, message: str) -> None:
        with self._lock:
            items = list(self.items.values())
            self.items.clear()
        for item in items:
            item.error = message
            item.event.set()


class SessionManager:
    MAX_SESSIONS = 32

    def __init__(self):
        self._sessions: dict[str, CallbackSession] = {}
        self._lock = threading.Lock()

    def create(self, req: schemas.CallbackSessionRequest) -> schemas.SessionState:
        if (req.decode is None) == (req.joint is None):
            raise ValueError("provide exactly one of 'decode' or 'joint'")
        with self._lock:
            if len(self._sessions) >= self.MAX_SESSIONS:
                raise LexbeamError("too many active callback sessions")
            session = CallbackSession(uuid.uuid4().hex)
            self._sessions[session.id] = session

        # callbacks (and the vocabularies mirrors align to) are built before
        # the worker starts, so the first response already carries them.
        # parallel beam expansion is forced on: blocked score calls from one
        # step (and, with jobs > 1, several utterances) batch per round trip
        if req.decode is not None:
            spec = req.decode.model_copy(update={"parallel": True})
            cb1 = _maybe_callback(session, spec.am, spec.subword_lm_path, "am1")
            worker = lambda: op_decode(spec, callback=cb1)
        else:
            spec = req.joint.model_copy(update={"parallel": True})
            cb1 = _maybe_callback(session, spec.am, spec.subword_lm_path, "am1")
            cb2 = None
            if spec.am2 is not None:
                cb2 = _maybe_callback(session, spec.am2, spec.lm2_path, "am2")
            worker = lambda: op_decode_joint(spec, callback1=cb1, callback2=cb2)

        def run():
            try:
                session.result = worker()
            except Exception as exc:  # surfaced via the session state
                session.error = exc
                session.fail_pending(str(exc))
            finally:
                session.done.set()

        threading.Thread(target=run, name=f"decode-session-{session.id}", daemon=True).start()
        return self._state(session)

    def step(self, session_id: str, answers: list[schemas.ScoreAnswer]) -> schemas.SessionState:
        session = self._get(session_id)
        if answers:
            session.answer(answers)
        return self._state(session)

    def delete(self, session_id: str) -> None:
        session = self._get(session_id)
        session.fail_pending("session cancelled")
        with self._lock:
            self._sessions.pop(session_id, None)

    def _get(self, session_id: str) -> CallbackSession:
        with self._lock:
            session = self._sessions.get(session_id)
        if session is None:
            raise NotFoundError(f"no such session: {session_id}", session=session_id)
        return session

    def _state(self, session: CallbackSession) -> schemas.SessionState:
        pending = session.collect()
        if session.error is not None and not pending:
            with self._lock:
                self._sessions.pop(session.id, None)
            raise session.error
        done = session.done.is_set() and not pending
        state = schemas.SessionState(
            session_id=session.id,
            done=done,
            pending=[
                schemas.PendingScore(
                    req_id=i.req_id, system=i.system, utt=i.utt, prefix=list(i.prefix)
                )
                for i in pending
            ],
            vocab1=session.vocab1,
            vocab2=session.vocab2,
            result=session.result if done else None,
        )
        if done:
            with self._lock:
                self._sessions.pop(session.id, None)
        return state


def _maybe_callback(
    session: CallbackSession, spec: schemas.AmSpec, lm_path: str, system: str
) -> CallbackAm | None:
    if spec.kind != "callback":
        return None
    # the system's look-ahead vectors are indexed by its subword LM's
    # vocabulary, so that file alone pins the vector layout mirrors use
    vocab = load_arpa(_require_path(lm_path, "subword LM")).vocab
    units = list(vocab.units)
    if system == "am1":
        session.vocab1 = units
    else:
        session.vocab2 = units
    return CallbackAm(vocab, session.scorer_fn(system))


sessions = SessionManager()

