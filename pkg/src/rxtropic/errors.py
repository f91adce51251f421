"""Error types shared across the service.

Every error carries a stable machine-readable ``code`` and the HTTP status
the API layer maps it to. Errors raised below the API layer never know about
HTTP; the mapping lives here so it stays total and fixed.
"""

from __future__ import annotations

from typing import Any


class RxError(Exception):
    """Base class for all service errors."""

    code = "ERROR"
    http_status = 500

    def __init__(self, message: str = "", *, findings: list[Any] | None = None):
        super().__init__(message or self.code)
        self.message = message or self.code
        self.findings = findings or []


class UnauthenticatedError(RxError):
    """Missing, unknown, or expired session token."""

    code = "UNAUTHENTICATED"
    http_status = 401


class InvalidCredentialsError(RxError):
    """Login failed. Deliberately does not say why."""

    code = "INVALID_CREDENTIALS"
    http_status = 401


class ForbiddenError(RxError):
    """Live session, but the role-permission matrix denies the action."""

    code = "FORBIDDEN"
    http_status = 403


class NotPrescriberError(RxError):
    """Caller is a doctor but not the one who wrote this prescription."""

    code = "NOT_PRESCRIBER"
    http_status = 403


class NotAcknowledgingPharmacistError(RxError):
    """Caller is a pharmacist but did not acknowledge this prescription."""

    code = "NOT_ACKNOWLEDGING_PHARMACIST"
    http_status = 403


class NotFoundError(RxError):
    code = "NOT_FOUND"
    http_status = 404


class UnknownPatientError(NotFoundError):
    code = "UNKNOWN_PATIENT"


class UnknownDrugError(NotFoundError):
    code = "UNKNOWN_DRUG"


class UnknownDiseaseError(NotFoundError):
    code = "UNKNOWN_DISEASE"


class ConflictError(RxError):
    """Atomic compare-and-set lost: stored state no longer matches."""

    code = "CONFLICT"
    http_status = 409


class WrongStateError(RxError):
    """Operation not legal in the prescription's current status."""

    code = "WRONG_STATE"
    http_status = 409


class UniqueViolationError(RxError):
    """Natural key already taken (license number, drug name, disease name)."""

    code = "UNIQUE_VIOLATION"
    http_status = 409


class BlockedError(RxError):
    """Send refused: at least one BLOCK finding. Findings attached."""

    code = "BLOCKED"
    http_status = 409


class OverridesRequiredError(RxError):
    """Send refused: warning findings lack override reasons. Findings attached."""

    code = "OVERRIDES_REQUIRED"
    http_status = 409


class ValidationFailedError(RxError):
    """Domain invariant violations; one message per violation."""

    code = "VALIDATION"
    http_status = 422

    def __init__(self, violations: list[str]):
        super().__init__("; ".join(violations) or "validation failed")
        self.violations = violations


class WeakPasswordError(RxError):
    code = "WEAK_PASSWORD"
    http_status = 422


class AlreadyBootstrappedError(RxError):
    """The store already has an administrator account."""

    code = "ALREADY_BOOTSTRAPPED"
    http_status = 409


class StoreLockedError(RxError):
    """Another process currently holds the store."""

    code = "STORE_LOCKED"
    http_status = 409
