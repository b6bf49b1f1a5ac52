"""HTTP service exposing the decoding pipeline, plus its operation layer."""
