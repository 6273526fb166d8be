"""Exception hierarchy shared by every layer of the brain.

Each error carries a machine-readable ``code`` and the HTTP status the
server maps it to, so the transport layer never has to guess.
"""

from __future__ import annotations

from typing import Optional


class BrainError(Exception):
    code = "internal_error"
    http_status = 500

    def __init__(self, message: str, field: Optional[str] = None):
        super().__init__(message)
        self.message = message
        self.field = field


class ParseError(BrainError, ValueError):
    code = "parse_error"
    http_status = 400


class ValidationError(BrainError, ValueError):
    code = "validation_error"
    http_status = 400

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}", field=field)


class DomainError(BrainError, ValueError):
    code = "domain_error"
    http_status = 400


class NoDataError(BrainError, ValueError):
    code = "no_data"
    http_status = 400


class SchemaError(BrainError, KeyError):
    code = "schema_error"
    http_status = 400

    def __str__(self) -> str:
        return self.message


class ShapeError(BrainError, ValueError):
    code = "shape_error"
    http_status = 400


class ConflictError(BrainError):
    code = "conflict"
    http_status = 409


class ProtocolOrderError(BrainError):
    code = "protocol_order"
    http_status = 409


class SessionStateError(BrainError):
    code = "session_state"
    http_status = 409


class NotFoundError(BrainError, LookupError):
    code = "not_found"
    http_status = 404


class NoInputError(BrainError, ValueError):
    code = "no_input"
    http_status = 400


class TranscriptionError(BrainError):
    code = "transcription_failed"
    http_status = 422


class ConfigurationError(BrainError):
    code = "configuration_error"
    http_status = 500


class StorageError(BrainError):
    code = "storage_error"
    http_status = 500


class StoreLoadError(StorageError):
    """A store file line could not be parsed or validated."""

    code = "store_load_error"

    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line
