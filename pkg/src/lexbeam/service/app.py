"""FastAPI application wiring the operation layer to HTTP endpoints."""

from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import __version__
from ..errors import LexbeamError, NotFoundError
from . import ops, schemas

app = FastAPI(
    title="lexbeam",
    version=__version__,
    description=(
        "Phone/char BPE subword extraction, prefix-tree multi-level LM "
        "decoding and one-pass joint beam search over HTTP."
    ),
)


@app.exception_handler(LexbeamError)
async def lexbeam_error_handler(request: Request, exc: LexbeamError):
    status = 404 if isinstance(exc, NotFoundError) else 400
    return JSONResponse(status_code=status, content=exc.to_dict())


@app.exception_handler(ValueError)
async def value_error_handler(request: Request, exc: ValueError):
    return JSONResponse(
        status_code=400,
        content={"code": "invalid-argument", "message": str(exc), "context": {}},
    )


@app.get("/health", response_model=schemas.HealthResponse)
def health():
    return ops.op_health()


@app.post("/bpe/train", response_model=schemas.BpeTrainResponse)
def bpe_train(req: schemas.BpeTrainRequest):
    return ops.op_bpe_train(req)


@app.post("/bpe/encode", response_model=schemas.BpeEncodeResponse)
def bpe_encode(req: schemas.BpeEncodeRequest):
    return ops.op_bpe_encode(req)


@app.post("/lm/train", response_model=schemas.LmTrainResponse)
def lm_train(req: schemas.LmTrainRequest):
    return ops.op_lm_train(req)


@app.post("/decode", response_model=schemas.DecodeResponse)
def decode(req: schemas.DecodeRequest):
    return ops.op_decode(req)


@app.post("/decode/joint", response_model=schemas.DecodeResponse)
def decode_joint(req: schemas.JointDecodeRequest):
    return ops.op_decode_joint(req)


@app.post("/score", response_model=schemas.ScoreResponse)
def score(req: schemas.ScoreRequest):
    return ops.op_score(req)


@app.post("/task/make", response_model=schemas.TaskResponse)
def make_task(req: schemas.TaskRequest):
    return ops.op_make_task(req)


@app.post("/callback/sessions", response_model=schemas.SessionState)
def create_session(req: schemas.CallbackSessionRequest):
    return ops.sessions.create(req)


@app.post("/callback/sessions/{session_id}/scores", response_model=schemas.SessionState)
def session_scores(session_id: str, req: schemas.SessionScoresRequest):
    return ops.sessions.step(session_id, req.answers)


@app.delete("/callback/sessions/{session_id}")
def delete_session(session_id: str):
    ops.sessions.delete(session_id)
    return {"deleted": session_id}
