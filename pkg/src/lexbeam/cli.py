"""Command-line client for the decoding toolkit.

Every subcommand builds a request model and executes it through the
operation layer: in-process by default, or against a running service
when --server is given. Flags override values from an optional TOML
config file.
"""

from __future__ import annotations

import sys
from typing import Any

import click

try:
    import tomllib  # py311+
except ModuleNotFoundError:  # pragma: no cover - depends on interpreter
    import tomli as tomllib

from .errors import LexbeamError
from .service import ops, schemas

_ROUTES = {
    "bpe_train": ("/bpe/train", schemas.BpeTrainRequest, schemas.BpeTrainResponse, ops.op_bpe_train),
    "bpe_encode": ("/bpe/encode", schemas.BpeEncodeRequest, schemas.BpeEncodeResponse, ops.op_bpe_encode),
    "lm_train": ("/lm/train", schemas.LmTrainRequest, schemas.LmTrainResponse, ops.op_lm_train),
    "decode": ("/decode", schemas.DecodeRequest, schemas.DecodeResponse, ops.op_decode),
    "decode_joint": ("/decode/joint", schemas.JointDecodeRequest, schemas.DecodeResponse, ops.op_decode_joint),
    "score": ("/score", schemas.ScoreRequest, schemas.ScoreResponse, ops.op_score),
    "make_task": ("/task/make", schemas.TaskRequest, schemas.TaskResponse, ops.op_make_task),
}


class Client:
    """Executes operations locally or over HTTP; the CLI never decodes itself."""

    def __init__(self, server: str | None):
        self.server = server.rstrip("/") if server else None

    def call(self, name: str, request):
        path, _, response_model, local = _ROUTES[name]
        if self.server is None:
            return local(request)
        import httpx

        reply = httpx.post(
            f"{self.server}{path}", json=request.model_dump(), timeout=600.0
        )
        if reply.status_code >= 400:
            body = reply.json()
            error = LexbeamError(
                body.get("message", reply.text), **body.get("context", {})
            )
            error.code = body.get("code", "error")
            raise error
        return response_model.model_validate(reply.json())


def _fail(exc: Exception) -> None:
    code = getattr(exc, "code", "error")
    click.echo(f"error: {code}: {exc}", err=True)
    sys.exit(1)


def _config_default(ctx: click.Context, name: str, value: Any) -> Any:
    """Use the config-file value unless the flag was given explicitly."""
    config = ctx.obj.get("config") or {}
    source = ctx.get_parameter_source(name)
    if source == click.core.ParameterSource.DEFAULT and name in config:
        return config[name]
    return value


@click.group()
@click.option("--server", default=None, help="Service URL; default runs in-process.")
@click.option(
    "--config",
    "config_path",
    type=click.Path(exists=True, dir_okay=False),
    default=None,
    help="TOML file with default decoding weights.",
)
@click.pass_context
def main(ctx, server, config_path):
    """Lexicon-constrained subword decoding toolkit."""
    config = {}
    if config_path:
        with open(config_path, "rb") as fh:
            config = tomllib.load(fh)
    ctx.obj = {"client": Client(server), "config": config}


def _run(ctx, name, request):
    try:
        return ctx.obj["client"].call(name, request)
    except LexbeamError as exc:
        _fail(exc)
    except (ValueError, OSError) as exc:
        _fail(exc)


@main.command("bpe-train")
@click.option("--input", "input_path", required=True, type=click.Path())
@click.option("--vocab-size", required=True, type=int)
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--marker", default="_", show_default=True)
@click.option("--mode", type=click.Choice(["phone", "char"]), default="phone", show_default=True)
@click.option("--lexicon", "lexicon_path", type=click.Path(), default=None)
@click.pass_context
def bpe_train(ctx, input_path, vocab_size, out_path, marker, mode, lexicon_path):
    """Train BPE merges over pronunciations (phone) or spellings (char)."""
    req = schemas.BpeTrainRequest(
        input_path=input_path,
        vocab_size=vocab_size,
        out_path=out_path,
        marker=marker,
        mode=mode,
        lexicon_path=lexicon_path,
    )
    resp = _run(ctx, "bpe_train", req)
    for warning in resp.warnings:
        click.echo(f"warning: {warning}", err=True)
    click.echo(
        f"wrote {resp.out_path}: {resp.base_size} base units + "
        f"{resp.merges} merges = {resp.vocab_size}"
    )


@main.command("bpe-encode")
@click.option("--input", "input_path", required=True, type=click.Path())
@click.option("--bpe", "bpe_path", required=True, type=click.Path())
@click.option("--mode", type=click.Choice(["phone", "char"]), default="phone", show_default=True)
@click.option("--lexicon", "lexicon_path", type=click.Path(), default=None)
@click.option("--out", "out_path", type=click.Path(), default=None,
              help="Output file; stdout if omitted. Units are tab-separated.")
@click.pass_context
def bpe_encode(ctx, input_path, bpe_path, mode, lexicon_path, out_path):
    """Encode text into subword units (one tab-separated line per sentence)."""
    try:
        with open(input_path, encoding="utf-8") as fh:
            text = [line.rstrip("\n") for line in fh if line.strip()]
    except OSError as exc:
        _fail(exc)
    req = schemas.BpeEncodeRequest(
        bpe_path=bpe_path, text=text, mode=mode, lexicon_path=lexicon_path
    )
    resp = _run(ctx, "bpe_encode", req)
    lines = ["\t".join(units) for units in resp.units]
    if out_path:
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write("\n".join(lines) + "\n")
    else:
        for line in lines:
            click.echo(line)


@main.command("lm-train")
@click.option("--input", "input_path", required=True, type=click.Path())
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--order", default=2, show_default=True, type=int)
@click.option("--add-k", default=0.1, show_default=True, type=float)
@click.option("--delimiter", type=click.Choice(["auto", "tab", "space"]), default="auto", show_default=True)
@click.option("--vocab-file", type=click.Path(), default=None,
              help="Extra vocabulary, one symbol per line.")
@click.option("--vocab-from-bpe", type=click.Path(), default=None,
              help="Close the vocabulary over a BPE model's units.")
@click.pass_context
def lm_train(ctx, input_path, out_path, order, add_k, delimiter, vocab_file, vocab_from_bpe):
    """Train an add-k n-gram LM and write it as ARPA."""
    req = schemas.LmTrainRequest(
        input_path=input_path,
        out_path=out_path,
        order=order,
        add_k=add_k,
        delimiter=delimiter,
        vocab_file=vocab_file,
        vocab_from_bpe=vocab_from_bpe,
    )
    resp = _run(ctx, "lm_train", req)
    click.echo(
        f"wrote {resp.out_path}: order {resp.order}, vocab {resp.vocab_size}, "
        f"{resp.sentences} sentences"
    )


def _decode_options(fn):
    opts = [
        click.option("--input", "utterances_path", required=True, type=click.Path(),
                     help="Utterance list: id<TAB>words per line."),
        click.option("--bpe", "bpe_path", required=True, type=click.Path()),
        click.option("--subword-lm", "subword_lm_path", required=True, type=click.Path()),
        click.option("--word-lm", "word_lm_path", required=True, type=click.Path()),
        click.option("--lexicon", "lexicon_path", type=click.Path(), default=None),
        click.option("--mode", type=click.Choice(["phone", "char"]), default="phone", show_default=True),
        click.option("--words-file", "words_path", type=click.Path(), default=None),
        click.option("--am", "am_kind", type=click.Choice(["oracle", "table"]), default="oracle", show_default=True),
        click.option("--am-dir", type=click.Path(), default=None),
        click.option("--mismatch-penalty", default=-10.0, show_default=True, type=float),
        click.option("--alpha", default=0.6, show_default=True, type=float),
        click.option("--beta", default=1.0, show_default=True, type=float),
        click.option("--oov-penalty", default=-10.0, show_default=True, type=float),
        click.option("--beamsize", default=20, show_default=True, type=int),
        click.option("--nbest", default=None, type=int),
        click.option("--max-steps", default=None, type=int),
        click.option("--jobs", default=1, show_default=True, type=int),
        click.option("--parallel/--no-parallel", default=False),
        click.option("--out-dir", type=click.Path(), default=None),
        click.option("--out-prefix", default="decode", show_default=True),
    ]
    for opt in reversed(opts):
        fn = opt(fn)
    return fn


def _decode_request(ctx, kwargs, cls=schemas.DecodeRequest, **extra):
    for knob in ("alpha", "beta", "oov_penalty", "beamsize", "gamma"):
        if knob in kwargs:
            kwargs[knob] = _config_default(ctx, knob, kwargs[knob])
    am = schemas.AmSpec(
        kind=kwargs.pop("am_kind"),
        table_dir=kwargs.pop("am_dir"),
        mismatch_penalty=kwargs.pop("mismatch_penalty"),
    )
    if am.kind == "table" and not am.table_dir:
        raise click.UsageError("--am table requires --am-dir")
    return cls(am=am, **kwargs, **extra)


def _emit_decode(resp: schemas.DecodeResponse) -> None:
    for line in resp.transcript:
        click.echo(line)
    if resp.truncated:
        click.echo(f"warning: {resp.truncated} utterances truncated", err=True)
    if resp.transcript_path:
        click.echo(
            f"wrote {resp.transcript_path} and {resp.nbest_path}", err=True
        )


@main.command("decode")
@_decode_options
@click.pass_context
def decode(ctx, **kwargs):
    """Single-system beam decoding with multi-level LM fusion."""
    try:
        req = _decode_request(ctx, kwargs)
    except click.UsageError:
        raise
    resp = _run(ctx, "decode", req)
    _emit_decode(resp)


@main.command("decode-joint")
@_decode_options
@click.option("--bpe2", "bpe2_path", required=True, type=click.Path())
@click.option("--lm2", "lm2_path", required=True, type=click.Path())
@click.option("--am2", "am2_kind", type=click.Choice(["oracle", "table"]), default="oracle", show_default=True)
@click.option("--am2-dir", type=click.Path(), default=None)
@click.option("--gamma", default=0.2, show_default=True, type=float)
@click.pass_context
def decode_joint_cmd(ctx, **kwargs):
    """One-pass joint decoding: phone system proposes, char system verifies."""
    gamma = kwargs.pop("gamma")
    if not 0.0 <= gamma <= 1.0:
        raise click.UsageError("--gamma must be in [0, 1]")
    am2 = schemas.AmSpec(
        kind=kwargs.pop("am2_kind"),
        table_dir=kwargs.pop("am2_dir"),
        mismatch_penalty=kwargs["mismatch_penalty"],
    )
    if am2.kind == "table" and not am2.table_dir:
        raise click.UsageError("--am2 table requires --am2-dir")
    bpe2_path = kwargs.pop("bpe2_path")
    lm2_path = kwargs.pop("lm2_path")
    req = _decode_request(
        ctx,
        kwargs,
        cls=schemas.JointDecodeRequest,
        bpe2_path=bpe2_path,
        lm2_path=lm2_path,
        am2=am2,
        gamma=gamma,
    )
    resp = _run(ctx, "decode_joint", req)
    _emit_decode(resp)


@main.command("score")
@click.option("--hyp", "hyp_path", required=True, type=click.Path())
@click.option("--ref", "ref_path", required=True, type=click.Path())
@click.pass_context
def score(ctx, hyp_path, ref_path):
    """Word error rate of a hypothesis transcript against a reference."""
    resp = _run(ctx, "score", schemas.ScoreRequest(hyp_path=hyp_path, ref_path=ref_path))
    click.echo(resp.report)


@main.command("make-task")
@click.option("--out-dir", required=True, type=click.Path())
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--words", "n_words", default=50, show_default=True, type=int)
@click.option("--utts", "n_utts", default=200, show_default=True, type=int)
@click.option("--noise", default=0.9, show_default=True, type=float)
@click.option("--char-noise", default=None, type=float)
@click.option("--oracle-penalty", default=-4.0, show_default=True, type=float)
@click.option("--k-extra", default=30, show_default=True, type=int)
@click.pass_context
def make_task_cmd(ctx, out_dir, seed, n_words, n_utts, noise, char_noise, oracle_penalty, k_extra):
    """Generate a seeded synthetic decoding benchmark."""
    req = schemas.TaskRequest(
        out_dir=out_dir,
        seed=seed,
        n_words=n_words,
        n_utts=n_utts,
        noise=noise,
        char_noise=char_noise,
        oracle_penalty=oracle_penalty,
        k_extra=k_extra,
    )
    resp = _run(ctx, "make_task", req)
    click.echo(f"task written to {out_dir} (seed {resp.manifest['seed']})")


@main.command("serve")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8710, show_default=True, type=int)
def serve(host, port):
    """Run the HTTP service."""
    import uvicorn

    uvicorn.run("lexbeam.service.app:app", host=host, port=port, log_level="info")


if __name__ == "__main__":
    main()
