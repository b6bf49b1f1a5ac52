import type {
  BpeEncodeRequest,
  BpeEncodeResponse,
  CallbackScorer,
  DecodeRequest,
  DecodeResponse,
  ErrorBody,
  JointDecodeRequest,
  ScoreRequest,
  ScoreResponse,
  SessionState,
  TaskManifest,
  TaskRequest,
} from "./types.js";

export class LexbeamApiError extends Error {
  readonly code: string;
  readonly context: Record<string, unknown>;

  constructor(body: ErrorBody, status: number) {
    super(`${body.code}: ${body.message} (HTTP ${status})`);
    this.code = body.code;
    this.context = body.context ?? {};
  }
}

export class LexbeamClient {
  constructor(readonly baseUrl: string) {
    this.baseUrl = baseUrl.replace(/\/+$/, "");
  }

  private async post<T>(path: string, body: unknown): Promise<T> {
    const reply = await fetch(`${this.baseUrl}${path}`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
    if (!reply.ok) {
      const parsed = (await reply.json().catch(() => null)) as ErrorBody | null;
      throw new LexbeamApiError(
        parsed ?? { code: "http-error", message: await reply.text(), context: {} },
        reply.status,
      );
    }
    return (await reply.json()) as T;
  }

  async health(): Promise<{ status: string; version: string }> {
    const reply = await fetch(`${this.baseUrl}/health`);
    if (!reply.ok) throw new Error(`health check failed: ${reply.status}`);
    return (await reply.json()) as { status: string; version: string };
  }

  makeTask(req: TaskRequest): Promise<TaskManifest> {
    return this.post("/task/make", req);
  }

  bpeEncode(req: BpeEncodeRequest): Promise<BpeEncodeResponse> {
    return this.post("/bpe/encode", req);
  }

  decode(req: DecodeRequest): Promise<DecodeResponse> {
    return this.post("/decode", req);
  }

  decodeJoint(req: JointDecodeRequest): Promise<DecodeResponse> {
    return this.post("/decode/joint", req);
  }

  score(req: ScoreRequest): Promise<ScoreResponse> {
    return this.post("/score", req);
  }

  /**
   * Run a decode whose acoustic scores come from client-side scorers.
   *
   * The service streams pending (utterance, prefix) score requests; the
   * scorers are called serially, in request order, and the answers are
   * posted back until the session completes. The returned result is
   * exactly what the native decode endpoints produce for equivalent
   * scorers.
   */
  async callbackDecode(
    request: { decode: DecodeRequest } | { joint: JointDecodeRequest },
    scorers: { am1?: CallbackScorer; am2?: CallbackScorer },
    onVocab?: (vocab1: string[] | null, vocab2: string[] | null) => void,
  ): Promise<DecodeResponse> {
    let state = await this.post<SessionState>("/callback/sessions", request);
    onVocab?.(state.vocab1, state.vocab2);
    while (!state.done) {
      const answers = state.pending.map((p) => {
        const scorer = scorers[p.system];
        if (!scorer) {
          throw new Error(`no scorer supplied for system ${p.system}`);
        }
        return { req_id: p.req_id, scores: scorer(p.utt, p.prefix) };
      });
      state = await this.post<SessionState>(
        `/callback/sessions/${state.session_id}/scores`,
        { answers },
      );
    }
    if (!state.result) {
      throw new Error("session finished without a result");
    }
    return state.result;
  }
}
