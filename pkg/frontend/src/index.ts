export { LexbeamClient, LexbeamApiError } from "./client.js";
export { oracleScorer } from "./oracle.js";
export type * from "./types.js";
