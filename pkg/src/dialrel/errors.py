"""Common error base so the CLI can emit machine-readable failure codes."""

from __future__ import annotations


class DialrelError(Exception):
    """Base class for all package errors; ``code`` is the wire-format name."""

    code = "error"


class UnknownDialogue(DialrelError):
    code = "unknown_dialogue"


class IOFailure(DialrelError):
    code = "io_failure"
