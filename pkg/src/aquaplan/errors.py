"""Coded pipeline errors, mapped to HTTP 400s and CLI exit codes."""

from __future__ import annotations

CODE_CONFIG_INVALID = "CONFIG_INVALID"
CODE_TOO_FEW_SITES = "TOO_FEW_SITES"
CODE_NO_SITES = "NO_SITES"
CODE_SINGLE_CLASS = "SINGLE_CLASS"
CODE_BUDGET_EXCEEDED = "BUDGET_EXCEEDED"
CODE_MISSING_ARTIFACT = "MISSING_ARTIFACT"
CODE_BAD_ARTIFACT = "BAD_ARTIFACT"
CODE_DOMAIN = "DOMAIN"


class AquaplanError(Exception):
    """A pipeline failure with a stable machine-parsable code."""

    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code
        self.message = message
