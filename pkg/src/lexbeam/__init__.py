"""Lexicon-constrained subword beam decoding toolkit.

Subpackages cover BPE subword extraction over pronunciations or
spellings, prefix-tree compilation of a pronunciation dictionary,
back-off n-gram LMs, multi-level (subword + word) LM forwarding, and
single/joint beam search decoding. The ``service`` package exposes the
pipeline over HTTP; the CLI is a thin client of the same operations.
"""

__version__ = "0.1.0"
