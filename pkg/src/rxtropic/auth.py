"""Authentication and role-based authorization.

Login is by license number plus password. Login failures are deliberately
indistinguishable to the caller (one INVALID_CREDENTIALS for unknown user,
wrong password, and deactivated account); the audit log records the true
cause. Password digests use salted scrypt, so digesting the same password
twice yields different digests.

The permission matrix is total over Role x Permission and fixed at import
time; every API route authorizes against it before doing anything else.
"""

from __future__ import annotations

import hashlib
import hmac
import secrets
import threading
from dataclasses import dataclass
from datetime import datetime, timedelta
from enum import Enum
from typing import Callable

from .domain import PractitionerAccount, Role, utcnow
from .errors import (
    ForbiddenError,
    InvalidCredentialsError,
    UnauthenticatedError,
    WeakPasswordError,
)
from .store import Store

MIN_PASSWORD_LENGTH = 8
DEFAULT_SESSION_TTL = timedelta(hours=8)  # one clinical shift, no sliding expiry

_SCRYPT_N = 2**14
_SCRYPT_R = 8
_SCRYPT_P = 1


class Permission(str, Enum):
    MANAGE_USERS = "MANAGE_USERS"
    MANAGE_DRUGS = "MANAGE_DRUGS"
    MANAGE_DISEASES = "MANAGE_DISEASES"
    MANAGE_PATIENTS = "MANAGE_PATIENTS"
    MANAGE_INTERACTIONS = "MANAGE_INTERACTIONS"
    VIEW_PATIENT_RECORD = "VIEW_PATIENT_RECORD"
    VIEW_DRUG_DETAIL = "VIEW_DRUG_DETAIL"
    COMPOSE_RX = "COMPOSE_RX"
    SEND_RX = "SEND_RX"
    CANCEL_RX = "CANCEL_RX"
    LIST_PENDING = "LIST_PENDING"
    ACKNOWLEDGE_RX = "ACKNOWLEDGE_RX"
    DISPENSE_RX = "DISPENSE_RX"
    PRINT_RX = "PRINT_RX"


# Administrators run the registry but never touch the clinical workflow.
# Doctors also hold MANAGE_DRUGS: building the formulary is a physician task
# here, shared with the administrator console.
PERMISSION_MATRIX: dict[Role, frozenset[Permission]] = {
    Role.ADMINISTRATOR: frozenset(
        {
            Permission.MANAGE_USERS,
            Permission.MANAGE_DRUGS,
            Permission.MANAGE_DISEASES,
            Permission.MANAGE_PATIENTS,
            Permission.MANAGE_INTERACTIONS,
            Permission.VIEW_PATIENT_RECORD,
            Permission.VIEW_DRUG_DETAIL,
        }
    ),
    Role.DOCTOR: frozenset(
        {
            Permission.VIEW_PATIENT_RECORD,
            Permission.VIEW_DRUG_DETAIL,
            Permission.COMPOSE_RX,
            Permission.SEND_RX,
            Permission.CANCEL_RX,
            Permission.MANAGE_DRUGS,
        }
    ),
    Role.PHARMACIST: frozenset(
        {
            Permission.LIST_PENDING,
            Permission.ACKNOWLEDGE_RX,
            Permission.DISPENSE_RX,
            Permission.PRINT_RX,
            Permission.VIEW_DRUG_DETAIL,
            Permission.VIEW_PATIENT_RECORD,
        }
    ),
}


def is_granted(role: Role, permission: Permission) -> bool:
    return permission in PERMISSION_MATRIX[role]


def hash_password(password: str) -> str:
    """Salted scrypt digest; two calls for the same password differ."""
    salt = secrets.token_bytes(16)
    key = hashlib.scrypt(
        password.encode("utf-8"), salt=salt, n=_SCRYPT_N, r=_SCRYPT_R, p=_SCRYPT_P
    )
    return f"scrypt${_SCRYPT_N}${_SCRYPT_R}${_SCRYPT_P}${salt.hex()}${key.hex()}"


def verify_password(digest: str, password: str) -> bool:
    try:
        scheme, n, r, p, salt_hex, key_hex = digest.split("$")
        if scheme != "scrypt":
            return False
        key = hashlib.scrypt(
            password.encode("utf-8"),
            salt=bytes.fromhex(salt_hex),
            n=int(n),
            r=int(r),
            p=int(p),
        )
        return hmac.compare_digest(key, bytes.fromhex(key_hex))
    except (ValueError, TypeError):
        return False


def check_password_strength(password: str) -> None:
    if len(password) < MIN_PASSWORD_LENGTH:
        raise WeakPasswordError(f"password must be at least {MIN_PASSWORD_LENGTH} characters")


@dataclass(frozen=True)
class Session:
    token: str
    account_id: str
    role: Role
    issued_at: datetime
    expires_at: datetime


@dataclass(frozen=True)
class AccountContext:
    """What authorize() hands to the operation: who, and as which role."""

    account_id: str
    role: Role


class AuthService:
    """Session table plus the fixed permission matrix.

    Sessions live in process memory behind a lock; authorize is read-mostly
    and never hits the store.
    """

    def __init__(
        self,
        store: Store,
        session_ttl: timedelta = DEFAULT_SESSION_TTL,
        clock: Callable[[], datetime] = utcnow,
    ):
        self._store = store
        self._ttl = session_ttl
        self._clock = clock
        self._sessions: dict[str, Session] = {}
        self._guard = threading.Lock()

    def login(self, license_number: str, password: str) -> Session:
        account = self._store.find_practitioner_by_license(license_number)
        if account is None:
            self._audit_failure(license_number, "unknown license")
            raise InvalidCredentialsError("invalid credentials")
        if not account.active:
            self._audit_failure(license_number, "account deactivated")
            raise InvalidCredentialsError("invalid credentials")
        if not verify_password(account.password_digest, password):
            self._audit_failure(license_number, "wrong password")
            raise InvalidCredentialsError("invalid credentials")

        now = self._clock()
        session = Session(
            token=secrets.token_hex(32),
            account_id=account.id,
            role=account.role,
            issued_at=now,
            expires_at=now + self._ttl,
        )
        with self._guard:
            self._sessions[session.token] = session
        self._store.audit_append(
            account.id, "auth.login", "practitioner", account.id,
            {"license_number": account.license_number},
        )
        return session

    def _audit_failure(self, license_number: str, cause: str) -> None:
        self._store.audit_append(
            "SYSTEM", "auth.login_failed", "practitioner", license_number, {"cause": cause}
        )

    def logout(self, token: str) -> None:
        """Idempotent: a dead or never-issued token is a successful no-op."""
        with self._guard:
            session = self._sessions.pop(token, None)
        if session is not None:
            self._store.audit_append(
                session.account_id, "auth.logout", "practitioner", session.account_id, None
            )

    def authorize(self, token: str | None, permission: Permission) -> AccountContext:
        if not token:
            raise UnauthenticatedError("missing bearer token")
        with self._guard:
            session = self._sessions.get(token)
        if session is None or self._clock() >= session.expires_at:
            raise UnauthenticatedError("unknown or expired token")
        if not is_granted(session.role, permission):
            raise ForbiddenError(f"{session.role.value} may not {permission.value}")
        return AccountContext(account_id=session.account_id, role=session.role)

    def change_password(self, token: str, old: str, new: str) -> None:
        with self._guard:
            session = self._sessions.get(token)
        if session is None or self._clock() >= session.expires_at:
            raise UnauthenticatedError("unknown or expired token")
        account = self._store.get_practitioner(session.account_id)
        if not verify_password(account.password_digest, old):
            raise InvalidCredentialsError("invalid credentials")
        check_password_strength(new)
        updated = account.to_dict()
        updated["password_digest"] = hash_password(new)
        self._store.put_practitioner(
            PractitionerAccount.from_dict(updated),
            actor_id=account.id,
            detail={"event": "password_change"},
        )
        # Every other session of this account is revoked.
        with self._guard:
            for tok, sess in list(self._sessions.items()):
                if sess.account_id == account.id and tok != token:
                    del self._sessions[tok]

    def revoke_account_sessions(self, account_id: str) -> None:
        """Drop all live sessions for an account (used on deactivation)."""
        with self._guard:
            for tok, sess in list(self._sessions.items()):
                if sess.account_id == account_id:
                    del self._sessions[tok]
