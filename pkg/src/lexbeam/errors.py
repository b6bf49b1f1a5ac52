"""Exception hierarchy shared by the library, service and CLI.

Every error carries a stable machine-readable ``code`` so the HTTP layer
and the CLI can report failures uniformly.
"""

from __future__ import annotations

from typing import Any


class LexbeamError(Exception):
    """Base class for all toolkit errors."""

    code = "error"

    def __init__(self, message: str, **context: Any):
        super().__init__(message)
        self.message = message
        self.context = context

    def to_dict(self) -> dict[str, Any]:
        return {"code": self.code, "message": self.message, "context": self.context}


class InvalidVocabSizeError(LexbeamError):
    code = "invalid-vocab-size"


class EmptyCorpusError(LexbeamError):
    code = "empty-corpus"


class MalformedEntryError(LexbeamError):
    code = "malformed-entry"


class EmptyLexiconError(LexbeamError):
    code = "empty-lexicon"


class MalformedArpaError(LexbeamError):
    code = "malformed-arpa"


class MalformedAmTableError(LexbeamError):
    code = "malformed-am-table"


class MalformedSequenceError(LexbeamError):
    code = "malformed-sequence"


class MalformedModelError(LexbeamError):
    code = "malformed-model"


class ContractViolationError(LexbeamError):
    code = "contract-violation"


class MissingFileError(LexbeamError):
    code = "missing-file"


class NotFoundError(LexbeamError):
    code = "not-found"
