import type { CallbackScorer } from "./types.js";

const EOS = "<eos>";

/**
 * Mirror of the service's built-in oracle scorer: 0 along one reference
 * unit sequence per utterance (then <eos>), a flat penalty elsewhere,
 * and the whole vocabulary penalized once the prefix has diverged.
 *
 * Feeding this through a callback session must reproduce the native
 * oracle decode byte for byte.
 */
export function oracleScorer(
  vocab: string[],
  references: Map<string, string[]>,
  mismatchPenalty = -10.0,
): CallbackScorer {
  if (mismatchPenalty >= 0) {
    throw new Error("mismatchPenalty must be < 0");
  }
  const index = new Map(vocab.map((u, i) => [u, i]));
  const eosIndex = index.get(EOS);
  if (eosIndex === undefined) {
    throw new Error("vocabulary has no <eos>");
  }
  return (utt, prefix) => {
    const reference = references.get(utt);
    if (!reference) {
      throw new Error(`no reference units for utterance ${utt}`);
    }
    const emitted = prefix.slice(1);
    const vec: (number | null)[] = new Array(vocab.length).fill(mismatchPenalty);
    const onPath = emitted.every((u, i) => reference[i] === u);
    if (onPath) {
      const target =
        emitted.length < reference.length ? reference[emitted.length] : EOS;
      const at = index.get(target);
      if (at !== undefined) {
        vec[at] = 0.0;
      }
    }
    return vec;
  };
}
