"""Core domain types for the e-prescribing service.

All types are immutable value objects; they are safe to share between
concurrent request handlers. Mutation happens only through the persistence
layer. ``validate_entity`` is the single registry-free invariant checker:
it is total (never raises) and returns one message per violated invariant.

Invariants that need a registry (does this drug id exist? is the prescriber
a doctor?) are enforced where the registry lives: in the store and in the
workflow operations.
"""

from __future__ import annotations

import secrets
from dataclasses import dataclass, field, replace
from datetime import date, datetime, timezone
from enum import Enum


def new_id() -> str:
    """128-bit random identifier, lowercase hex."""
    return secrets.token_hex(16)


def utcnow() -> datetime:
    return datetime.now(timezone.utc)


def normalize_code(text: str) -> str:
    """Case/whitespace-insensitive form used for substance and name matching."""
    return " ".join(text.lower().split())


class Role(str, Enum):
    ADMINISTRATOR = "ADMINISTRATOR"
    DOCTOR = "DOCTOR"
    PHARMACIST = "PHARMACIST"


class Sex(str, Enum):
    M = "M"
    F = "F"
    OTHER = "OTHER"


class PrescriptionStatus(str, Enum):
    DRAFT = "DRAFT"
    SENT = "SENT"
    ACKNOWLEDGED = "ACKNOWLEDGED"
    DISPENSED = "DISPENSED"
    CANCELLED = "CANCELLED"


# The only legal lifecycle edges. DISPENSED and CANCELLED are terminal.
LEGAL_TRANSITIONS: frozenset[tuple[PrescriptionStatus, PrescriptionStatus]] = frozenset(
    {
        (PrescriptionStatus.DRAFT, PrescriptionStatus.SENT),
        (PrescriptionStatus.DRAFT, PrescriptionStatus.CANCELLED),
        (PrescriptionStatus.SENT, PrescriptionStatus.ACKNOWLEDGED),
        (PrescriptionStatus.SENT, PrescriptionStatus.CANCELLED),
        (PrescriptionStatus.ACKNOWLEDGED, PrescriptionStatus.DISPENSED),
    }
)

TERMINAL_STATUSES = frozenset({PrescriptionStatus.DISPENSED, PrescriptionStatus.CANCELLED})


def is_legal_transition(current: PrescriptionStatus, new: PrescriptionStatus) -> bool:
    return (current, new) in LEGAL_TRANSITIONS


class InteractionSeverity(str, Enum):
    MAJOR = "MAJOR"
    MODERATE = "MODERATE"
    MINOR = "MINOR"


class FindingKind(str, Enum):
    ALLERGY = "ALLERGY"
    INTERACTION = "INTERACTION"
    INDICATION = "INDICATION"
    DUPLICATE = "DUPLICATE"


class FindingSeverity(str, Enum):
    BLOCK = "BLOCK"
    WARN = "WARN"


@dataclass(frozen=True)
class PractitionerAccount:
    """A system user: administrator, doctor, or pharmacist.

    The license number is the login username and is globally unique,
    case-insensitively. The password digest never reveals the plaintext.
    """

    id: str
    full_name: str
    role: Role
    license_number: str
    password_digest: str
    active: bool = True
    created_at: datetime = field(default_factory=utcnow)

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "full_name": self.full_name,
            "role": self.role.value,
            "license_number": self.license_number,
            "password_digest": self.password_digest,
            "active": self.active,
            "created_at": self.created_at.isoformat(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PractitionerAccount":
        return cls(
            id=d["id"],
            full_name=d["full_name"],
            role=Role(d["role"]),
            license_number=d["license_number"],
            password_digest=d["password_digest"],
            active=d["active"],
            created_at=datetime.fromisoformat(d["created_at"]),
        )


@dataclass(frozen=True)
class Patient:
    """Demographic record plus allergy list; patients are never users."""

    id: str
    full_name: str
    date_of_birth: date
    sex: Sex
    allergies: frozenset[str] = frozenset()
    active: bool = True

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "full_name": self.full_name,
            "date_of_birth": self.date_of_birth.isoformat(),
            "sex": self.sex.value,
            "allergies": sorted(self.allergies),
            "active": self.active,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Patient":
        return cls(
            id=d["id"],
            full_name=d["full_name"],
            date_of_birth=date.fromisoformat(d["date_of_birth"]),
            sex=Sex(d["sex"]),
            allergies=frozenset(d["allergies"]),
            active=d["active"],
        )


@dataclass(frozen=True)
class Disease:
    id: str
    name: str
    description: str = ""

    def to_dict(self) -> dict:
        return {"id": self.id, "name": self.name, "description": self.description}

    @classmethod
    def from_dict(cls, d: dict) -> "Disease":
        return cls(id=d["id"], name=d["name"], description=d["description"])


@dataclass(frozen=True)
class Drug:
    """Formulary entry.

    ``indications`` holds Disease ids. ``substance_codes`` is the
    admin-maintained list used for allergy screening; the normalized drug
    name always counts as a substance of the drug as well.
    """

    id: str
    name: str
    pharmaceutical_class: str = ""
    generic_description: str = ""
    indications: frozenset[str] = frozenset()
    adverse_reactions: str = ""
    strength: str = ""
    substance_codes: frozenset[str] = frozenset()
    active: bool = True

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "name": self.name,
            "pharmaceutical_class": self.pharmaceutical_class,
            "generic_description": self.generic_description,
            "indications": sorted(self.indications),
            "adverse_reactions": self.adverse_reactions,
            "strength": self.strength,
            "substance_codes": sorted(self.substance_codes),
            "active": self.active,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Drug":
        return cls(
            id=d["id"],
            name=d["name"],
            pharmaceutical_class=d["pharmaceutical_class"],
            generic_description=d["generic_description"],
            indications=frozenset(d["indications"]),
            adverse_reactions=d["adverse_reactions"],
            strength=d["strength"],
            substance_codes=frozenset(d["substance_codes"]),
            active=d["active"],
        )


def rule_pair_key(drug_a: str, drug_b: str) -> tuple[str, str]:
    """Canonical ordering for an unordered drug pair."""
    return (drug_a, drug_b) if drug_a <= drug_b else (drug_b, drug_a)


@dataclass(frozen=True)
class InteractionRule:
    """One rule per unordered pair of distinct drugs: rule(A,B) == rule(B,A)."""

    drug_pair: frozenset[str]
    severity: InteractionSeverity
    note: str = ""

    @classmethod
    def of(cls, drug_a: str, drug_b: str, severity: InteractionSeverity, note: str = "") -> "InteractionRule":
        return cls(drug_pair=frozenset({drug_a, drug_b}), severity=severity, note=note)

    @property
    def pair_key(self) -> tuple[str, str]:
        a, b = sorted(self.drug_pair) if len(self.drug_pair) == 2 else (list(self.drug_pair) + [""])[:2]
        return (a, b)

    def to_dict(self) -> dict:
        a, b = self.pair_key
        return {"drug_a": a, "drug_b": b, "severity": self.severity.value, "note": self.note}

    @classmethod
    def from_dict(cls, d: dict) -> "InteractionRule":
        return cls.of(d["drug_a"], d["drug_b"], InteractionSeverity(d["severity"]), d["note"])


@dataclass(frozen=True)
class PrescriptionItem:
    drug_id: str
    dose: str
    frequency: str
    duration_days: int
    instructions: str = ""

    def to_dict(self) -> dict:
        return {
            "drug_id": self.drug_id,
            "dose": self.dose,
            "frequency": self.frequency,
            "duration_days": self.duration_days,
            "instructions": self.instructions,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PrescriptionItem":
        return cls(
            drug_id=d["drug_id"],
            dose=d["dose"],
            frequency=d["frequency"],
            duration_days=d["duration_days"],
            instructions=d["instructions"],
        )


@dataclass(frozen=True)
class OverrideRecord:
    """A prescriber's recorded justification for proceeding past a warning."""

    finding_kind: FindingKind
    reason: str
    actor_id: str
    at: datetime

    def to_dict(self) -> dict:
        return {
            "finding_kind": self.finding_kind.value,
            "reason": self.reason,
            "actor_id": self.actor_id,
            "at": self.at.isoformat(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "OverrideRecord":
        return cls(
            finding_kind=FindingKind(d["finding_kind"]),
            reason=d["reason"],
            actor_id=d["actor_id"],
            at=datetime.fromisoformat(d["at"]),
        )


@dataclass(frozen=True)
class ValidationFinding:
    """One screening result. Allergy findings are always BLOCK."""

    kind: FindingKind
    severity: FindingSeverity
    message: str
    subject_drug_ids: frozenset[str]

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "severity": self.severity.value,
            "message": self.message,
            "subject_drug_ids": sorted(self.subject_drug_ids),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ValidationFinding":
        return cls(
            kind=FindingKind(d["kind"]),
            severity=FindingSeverity(d["severity"]),
            message=d["message"],
            subject_drug_ids=frozenset(d["subject_drug_ids"]),
        )


@dataclass(frozen=True)
class Prescription:
    """The central workflow object.

    ``rev`` is an internal revision counter used for optimistic concurrency
    in the store; it is not part of the API surface.
    """

    id: str
    patient_id: str
    prescriber_id: str
    diagnosis_id: str
    items: tuple[PrescriptionItem, ...]
    status: PrescriptionStatus = PrescriptionStatus.DRAFT
    overrides: tuple[OverrideRecord, ...] = ()
    created_at: datetime = field(default_factory=utcnow)
    sent_at: datetime | None = None
    acknowledged_at: datetime | None = None
    dispensed_at: datetime | None = None
    cancelled_at: datetime | None = None
    pharmacist_id: str | None = None
    rev: int = 0

    def with_changes(self, **kw) -> "Prescription":
        return replace(self, **kw)

    def to_dict(self) -> dict:
        opt = lambda ts: ts.isoformat() if ts else None
        return {
            "id": self.id,
            "patient_id": self.patient_id,
            "prescriber_id": self.prescriber_id,
            "diagnosis_id": self.diagnosis_id,
            "items": [i.to_dict() for i in self.items],
            "status": self.status.value,
            "overrides": [o.to_dict() for o in self.overrides],
            "created_at": self.created_at.isoformat(),
            "sent_at": opt(self.sent_at),
            "acknowledged_at": opt(self.acknowledged_at),
            "dispensed_at": opt(self.dispensed_at),
            "cancelled_at": opt(self.cancelled_at),
            "pharmacist_id": self.pharmacist_id,
            "rev": self.rev,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Prescription":
        opt = lambda s: datetime.fromisoformat(s) if s else None
        return cls(
            id=d["id"],
            patient_id=d["patient_id"],
            prescriber_id=d["prescriber_id"],
            diagnosis_id=d["diagnosis_id"],
            items=tuple(PrescriptionItem.from_dict(i) for i in d["items"]),
            status=PrescriptionStatus(d["status"]),
            overrides=tuple(OverrideRecord.from_dict(o) for o in d["overrides"]),
            created_at=datetime.fromisoformat(d["created_at"]),
            sent_at=opt(d["sent_at"]),
            acknowledged_at=opt(d["acknowledged_at"]),
            dispensed_at=opt(d["dispensed_at"]),
            cancelled_at=opt(d["cancelled_at"]),
            pharmacist_id=d["pharmacist_id"],
            rev=d.get("rev", 0),
        )


def _validate_practitioner(acc: PractitionerAccount) -> list[str]:
    problems = []
    if not acc.full_name.strip():
        problems.append("full_name must be nonempty")
    if not acc.license_number.strip():
        problems.append("license_number must be nonempty")
    if not isinstance(acc.role, Role):
        problems.append("role must be one of ADMINISTRATOR, DOCTOR, PHARMACIST")
    if not acc.password_digest:
        problems.append("password_digest must be nonempty")
    return problems


def _validate_patient(p: Patient, today: date) -> list[str]:
    problems = []
    if not p.full_name.strip():
        problems.append("full_name must be nonempty")
    if p.date_of_birth > today:
        problems.append("date_of_birth must not be in the future")
    if not isinstance(p.sex, Sex):
        problems.append("sex must be one of M, F, OTHER")
    return problems


def _validate_disease(d: Disease) -> list[str]:
    return [] if d.name.strip() else ["name must be nonempty"]


def _validate_drug(d: Drug) -> list[str]:
    return [] if d.name.strip() else ["name must be nonempty"]


def _validate_rule(r: InteractionRule) -> list[str]:
    problems = []
    if len(r.drug_pair) != 2:
        problems.append("pair drugs must be distinct")
    if not isinstance(r.severity, InteractionSeverity):
        problems.append("severity must be one of MAJOR, MODERATE, MINOR")
    return problems


def _validate_item(i: PrescriptionItem) -> list[str]:
    problems = []
    if not i.drug_id:
        problems.append("item drug_id must be nonempty")
    if not isinstance(i.duration_days, int) or i.duration_days < 1:
        problems.append("duration_days must be >= 1")
    return problems


def _validate_override(o: OverrideRecord) -> list[str]:
    return [] if o.reason.strip() else ["override reason must be nonempty"]


def _validate_finding(f: ValidationFinding) -> list[str]:
    problems = []
    if f.kind == FindingKind.ALLERGY and f.severity != FindingSeverity.BLOCK:
        problems.append("allergy findings must be BLOCK")
    if not f.subject_drug_ids:
        problems.append("subject_drug_ids must be nonempty")
    return problems


def _validate_prescription(rx: Prescription) -> list[str]:
    problems = []
    if not rx.items:
        problems.append("items must be nonempty")
    drug_ids = [i.drug_id for i in rx.items]
    if len(drug_ids) != len(set(drug_ids)):
        problems.append("items must not repeat a drug")
    for item in rx.items:
        problems.extend(_validate_item(item))
    for override in rx.overrides:
        problems.extend(_validate_override(override))

    # Lifecycle timestamps, where present, never run backwards.
    stamps = [rx.created_at, rx.sent_at, rx.acknowledged_at, rx.dispensed_at]
    present = [t for t in stamps if t is not None]
    if any(a > b for a, b in zip(present, present[1:])):
        problems.append("timestamps must be monotone in lifecycle order")

    needs_pharmacist = rx.status in (PrescriptionStatus.ACKNOWLEDGED, PrescriptionStatus.DISPENSED)
    if needs_pharmacist and rx.pharmacist_id is None:
        problems.append("pharmacist_id required for acknowledged or dispensed prescriptions")
    if not needs_pharmacist and rx.pharmacist_id is not None:
        problems.append("pharmacist_id only allowed for acknowledged or dispensed prescriptions")
    return problems


def validate_entity(entity: object, *, today: date | None = None) -> list[str]:
    """Return one message per violated invariant; empty list when clean.

    Total function: unknown entity kinds validate to []. ``today`` pins the
    date-of-birth check for deterministic tests.
    """
    today = today or utcnow().date()
    if isinstance(entity, PractitionerAccount):
        return _validate_practitioner(entity)
    if isinstance(entity, Patient):
        return _validate_patient(entity, today)
    if isinstance(entity, Disease):
        return _validate_disease(entity)
    if isinstance(entity, Drug):
        return _validate_drug(entity)
    if isinstance(entity, InteractionRule):
        return _validate_rule(entity)
    if isinstance(entity, PrescriptionItem):
        return _validate_item(entity)
    if isinstance(entity, OverrideRecord):
        return _validate_override(entity)
    if isinstance(entity, ValidationFinding):
        return _validate_finding(entity)
    if isinstance(entity, Prescription):
        return _validate_prescription(entity)
    return []
