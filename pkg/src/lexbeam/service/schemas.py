"""Request/response models for the service API (and the thin CLI client).

Paths refer to the server's filesystem; this is a localhost tool server,
so CLI and service share files directly.
"""

from __future__ import annotations

from typing import Literal

from pydantic import BaseModel, Field


class HealthResponse(BaseModel):
    status: str = "ok"
    version: str


class BpeTrainRequest(BaseModel):
    input_path: str
    vocab_size: int
    out_path: str
    marker: str = "_"
    mode: Literal["phone", "char"] = "phone"
    lexicon_path: str | None = None


class BpeTrainResponse(BaseModel):
    out_path: str
    base_size: int
    merges: int
    vocab_size: int
    warnings: list[str] = Field(default_factory=list)


class BpeEncodeRequest(BaseModel):
    bpe_path: str
    text: list[str]  # one sentence per entry
    mode: Literal["phone", "char"] = "phone"
    lexicon_path: str | None = None


class BpeEncodeResponse(BaseModel):
    units: list[list[str]]


class LmTrainRequest(BaseModel):
    input_path: str
    out_path: str
    order: int = 2
    add_k: float = 0.1
    delimiter: Literal["auto", "tab", "space"] = "auto"
    vocab_file: str | None = None
    vocab_from_bpe: str | None = None


class LmTrainResponse(BaseModel):
    out_path: str
    order: int
    vocab_size: int
    sentences: int


class AmSpec(BaseModel):
    kind: Literal["oracle", "table", "callback"]
    table_dir: str | None = None
    mismatch_penalty: float = -10.0


class DecodeRequest(BaseModel):
    utterances_path: str
    bpe_path: str
    subword_lm_path: str
    word_lm_path: str
    am: AmSpec
    lexicon_path: str | None = None
    mode: Literal["phone", "char"] = "phone"
    words_path: str | None = None
    alpha: float = 0.6
    beta: float = 1.0
    oov_penalty: float = -10.0
    beamsize: int = 20
    nbest: int | None = None
    max_steps: int | None = None
    end_detect_window: int = 3
    end_detect_margin: float = 10.0
    premask: bool = False
    parallel: bool = False
    jobs: int = 1
    out_dir: str | None = None
    out_prefix: str = "decode"


class JointDecodeRequest(DecodeRequest):
    bpe2_path: str = ""
    lm2_path: str = ""
    am2: AmSpec | None = None
    gamma: float = 0.2


class DecodeResponse(BaseModel):
    utterances: int
    truncated: int
    transcript: list[str]
    nbest: list[str]
    transcript_path: str | None = None
    nbest_path: str | None = None


class ScoreRequest(BaseModel):
    hyp_path: str
    ref_path: str


class ScoreResponse(BaseModel):
    wer: float
    substitutions: int
    deletions: int
    insertions: int
    errors: int
    ref_words: int
    sentences: int
    report: str


class TaskRequest(BaseModel):
    out_dir: str
    seed: int = 0
    n_words: int = 50
    n_utts: int = 200
    homophone_pairs: int = 4
    train_sentences: int = 300
    k_extra: int = 30
    lm_order: int = 2
    add_k: float = 0.1
    oracle_penalty: float = -4.0
    noise: float = 0.9
    char_noise: float | None = None


class TaskResponse(BaseModel):
    manifest: dict


# --- callback decode sessions ---------------------------------------------

class CallbackSessionRequest(BaseModel):
    """Start a decode whose AM scores come from the client.

    ``single`` requests must set ``am.kind`` to "callback" for the
    callback side; joint requests may use callbacks on either system.
    """

    decode: DecodeRequest | None = None
    joint: JointDecodeRequest | None = None


class PendingScore(BaseModel):
    req_id: int
    system: Literal["am1", "am2"]
    utt: str
    prefix: list[str]


class SessionState(BaseModel):
    session_id: str
    done: bool
    pending: list[PendingScore]
    vocab1: list[str] | None = None
    vocab2: list[str] | None = None
    result: DecodeResponse | None = None


class ScoreAnswer(BaseModel):
    req_id: int
    scores: list[float | None]


class SessionScoresRequest(BaseModel):
    answers: list[ScoreAnswer]


class ErrorBody(BaseModel):
    code: str
    message: str
    context: dict = Field(default_factory=dict)
