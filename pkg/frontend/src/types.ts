/** Request/response shapes of the lexbeam service API. */

export interface AmSpec {
  kind: "oracle" | "table" | "callback";
  table_dir?: string | null;
  mismatch_penalty?: number;
}

export interface DecodeRequest {
  utterances_path: string;
  bpe_path: string;
  subword_lm_path: string;
  word_lm_path: string;
  am: AmSpec;
  lexicon_path?: string | null;
  mode?: "phone" | "char";
  words_path?: string | null;
  alpha?: number;
  beta?: number;
  oov_penalty?: number;
  beamsize?: number;
  nbest?: number | null;
  max_steps?: number | null;
  end_detect_window?: number;
  end_detect_margin?: number;
  premask?: boolean;
  parallel?: boolean;
  jobs?: number;
  out_dir?: string | null;
  out_prefix?: string;
}

export interface JointDecodeRequest extends DecodeRequest {
  bpe2_path: string;
  lm2_path: string;
  am2: AmSpec;
  gamma?: number;
}

export interface DecodeResponse {
  utterances: number;
  truncated: number;
  transcript: string[];
  nbest: string[];
  transcript_path: string | null;
  nbest_path: string | null;
}

export interface BpeEncodeRequest {
  bpe_path: string;
  text: string[];
  mode?: "phone" | "char";
  lexicon_path?: string | null;
}

export interface BpeEncodeResponse {
  units: string[][];
}

export interface ScoreRequest {
  hyp_path: string;
  ref_path: string;
}

export interface ScoreResponse {
  wer: number;
  substitutions: number;
  deletions: number;
  insertions: number;
  errors: number;
  ref_words: number;
  sentences: number;
  report: string;
}

export interface TaskRequest {
  out_dir: string;
  seed?: number;
  n_words?: number;
  n_utts?: number;
  homophone_pairs?: number;
  train_sentences?: number;
  noise?: number;
  char_noise?: number | null;
  oracle_penalty?: number;
}

export interface TaskManifest {
  manifest: {
    seed: number;
    n_utts: number;
    paths: Record<string, string>;
    [key: string]: unknown;
  };
}

export interface PendingScore {
  req_id: number;
  system: "am1" | "am2";
  utt: string;
  prefix: string[];
}

export interface SessionState {
  session_id: string;
  done: boolean;
  pending: PendingScore[];
  vocab1: string[] | null;
  vocab2: string[] | null;
  result: DecodeResponse | null;
}

export interface ErrorBody {
  code: string;
  message: string;
  context: Record<string, unknown>;
}

/**
 * Client-side acoustic scorer: one score per vocabulary unit for the
 * given decoded prefix (which starts with "<sos>"). Use null for -inf.
 * Must be pure: the decoder memoizes and re-orders freely.
 */
export type CallbackScorer = (utt: string, prefix: string[]) => (number | null)[];
