"""Clinical decision support: screens a proposed prescription against the
patient's allergies, active medications, interaction rules, and diagnosis.

Every check is a pure function over immutable snapshots, so results are
deterministic and safe to evaluate in parallel. Output order is fixed:
ALLERGY findings first, then INTERACTION, INDICATION, DUPLICATE; within a
check, findings follow prescription item order.

Severity policy: allergy conflicts BLOCK and cannot be overridden; all
other findings WARN and require a recorded override reason to proceed.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime, timedelta
from typing import Mapping, Sequence

from .domain import (
    Disease,
    Drug,
    FindingKind,
    FindingSeverity,
    InteractionRule,
    Prescription,
    PrescriptionItem,
    PrescriptionStatus,
    ValidationFinding,
    normalize_code,
    utcnow,
)
from .errors import UnknownDiseaseError, UnknownDrugError

DEFAULT_DUPLICATE_WINDOW_DAYS = 30


@dataclass(frozen=True)
class PatientClinicalContext:
    """Derived view of one patient's history at evaluation time; never stored.

    ``active_medications`` holds drug ids from prescriptions that are SENT or
    ACKNOWLEDGED (regardless of dates) plus DISPENSED ones whose dispense
    date plus item duration still covers today. ``recent_prescriptions`` are
    (drug id, sent_at) pairs from non-cancelled prescriptions.
    """

    allergies: frozenset[str]
    active_medications: frozenset[str]
    recent_prescriptions: tuple[tuple[str, datetime], ...]


@dataclass(frozen=True)
class ClinicalRegistries:
    """Consistent registry snapshot the checks run against."""

    drugs: Mapping[str, Drug]
    diseases: Mapping[str, Disease]
    rules: Mapping[frozenset, InteractionRule]


def effective_substances(drug: Drug) -> frozenset[str]:
    """Substances a drug carries: its normalized name plus the
    admin-maintained substance codes."""
    codes = {normalize_code(c) for c in drug.substance_codes}
    codes.add(normalize_code(drug.name))
    return frozenset(codes)


def _require_drug(drug_registry: Mapping[str, Drug], drug_id: str) -> Drug:
    drug = drug_registry.get(drug_id)
    if drug is None:
        raise UnknownDrugError(f"drug {drug_id} not in registry")
    return drug


def check_allergy(
    items: Sequence[PrescriptionItem],
    allergies: frozenset[str] | set[str],
    drug_registry: Mapping[str, Drug],
) -> list[ValidationFinding]:
    """One BLOCK finding per item whose drug carries a substance the patient
    is allergic to."""
    normalized_allergies = {normalize_code(a) for a in allergies}
    findings = []
    for item in items:
        drug = _require_drug(drug_registry, item.drug_id)
        matched = effective_substances(drug) & normalized_allergies
        if matched:
            findings.append(
                ValidationFinding(
                    kind=FindingKind.ALLERGY,
                    severity=FindingSeverity.BLOCK,
                    message=f"{drug.name} matches patient allergy: {', '.join(sorted(matched))}",
                    subject_drug_ids=frozenset({drug.id}),
                )
            )
    return findings


def check_interactions(
    items: Sequence[PrescriptionItem],
    active_medications: frozenset[str] | set[str],
    rules: Mapping[frozenset, InteractionRule],
    drug_registry: Mapping[str, Drug] | None = None,
) -> list[ValidationFinding]:
    """One WARN finding per unordered interacting pair that involves at least
    one prescribed item. Pairs wholly inside the active medications are the
    previous prescriber's problem and are not reported."""

    def label(drug_id: str) -> str:
        if drug_registry and drug_id in drug_registry:
            return drug_registry[drug_id].name
        return drug_id

    item_ids = [i.drug_id for i in items]
    outside = sorted(set(active_medications) - set(item_ids))
    findings = []
    seen: set[frozenset] = set()
    for idx, a in enumerate(item_ids):
        for b in item_ids[idx + 1 :] + outside:
            pair = frozenset({a, b})
            if len(pair) != 2 or pair in seen:
                continue
            rule = rules.get(pair)
            if rule is None:
                continue
            seen.add(pair)
            note = f": {rule.note}" if rule.note else ""
            findings.append(
                ValidationFinding(
                    kind=FindingKind.INTERACTION,
                    severity=FindingSeverity.WARN,
                    message=f"{label(a)} interacts with {label(b)} ({rule.severity.value}){note}",
                    subject_drug_ids=pair,
                )
            )
    return findings


def check_indication(
    items: Sequence[PrescriptionItem],
    diagnosis_id: str,
    drug_registry: Mapping[str, Drug],
    disease_registry: Mapping[str, Disease],
) -> list[ValidationFinding]:
    """One WARN finding per item whose drug is not indicated for the
    diagnosis; drugs with no recorded indications always warn."""
    disease = disease_registry.get(diagnosis_id)
    if disease is None:
        raise UnknownDiseaseError(f"disease {diagnosis_id} not in registry")
    findings = []
    for item in items:
        drug = _require_drug(drug_registry, item.drug_id)
        if diagnosis_id in drug.indications:
            continue
        if drug.indications:
            message = f"{drug.name} is not indicated for {disease.name}"
        else:
            message = f"{drug.name} has no recorded indications"
        findings.append(
            ValidationFinding(
                kind=FindingKind.INDICATION,
                severity=FindingSeverity.WARN,
                message=message,
                subject_drug_ids=frozenset({drug.id}),
            )
        )
    return findings


def check_duplicate(
    items: Sequence[PrescriptionItem],
    recent_prescriptions: Sequence[tuple[str, datetime]],
    window_days: int = DEFAULT_DUPLICATE_WINDOW_DAYS,
    now: datetime | None = None,
    drug_registry: Mapping[str, Drug] | None = None,
) -> list[ValidationFinding]:
    """One WARN finding per item whose drug was already sent to this patient
    within the window."""
    now = now or utcnow()
    cutoff = now - timedelta(days=window_days)
    findings = []
    for item in items:
        hits = [sent_at for drug_id, sent_at in recent_prescriptions
                if drug_id == item.drug_id and sent_at >= cutoff]
        if not hits:
            continue
        if drug_registry and item.drug_id in drug_registry:
            name = drug_registry[item.drug_id].name
        else:
            name = item.drug_id
        latest = max(hits)
        days_ago = max((now - latest).days, 0)
        findings.append(
            ValidationFinding(
                kind=FindingKind.DUPLICATE,
                severity=FindingSeverity.WARN,
                message=f"{name} was already prescribed {days_ago} days ago",
                subject_drug_ids=frozenset({item.drug_id}),
            )
        )
    return findings


def validate(
    prescription: Prescription,
    context: PatientClinicalContext,
    registries: ClinicalRegistries,
    window_days: int = DEFAULT_DUPLICATE_WINDOW_DAYS,
    now: datetime | None = None,
) -> list[ValidationFinding]:
    """All four checks, concatenated in stable kind order."""
    now = now or utcnow()
    findings = check_allergy(prescription.items, context.allergies, registries.drugs)
    findings += check_interactions(
        prescription.items, context.active_medications, registries.rules, registries.drugs
    )
    findings += check_indication(
        prescription.items, prescription.diagnosis_id, registries.drugs, registries.diseases
    )
    findings += check_duplicate(
        prescription.items, context.recent_prescriptions, window_days, now, registries.drugs
    )
    return findings


def suggest_drugs(
    diagnosis_id: str,
    drug_registry: Mapping[str, Drug],
    disease_registry: Mapping[str, Disease],
) -> list[Drug]:
    """Active drugs indicated for the diagnosis, name-sorted; feeds the
    compose screen's selection menu."""
    if diagnosis_id not in disease_registry:
        raise UnknownDiseaseError(f"disease {diagnosis_id} not in registry")
    indicated = [
        d for d in drug_registry.values() if d.active and diagnosis_id in d.indications
    ]
    return sorted(indicated, key=lambda d: (d.name.lower(), d.id))


def build_patient_context(
    view,
    patient_id: str,
    now: datetime | None = None,
    window_days: int = DEFAULT_DUPLICATE_WINDOW_DAYS,
) -> PatientClinicalContext:
    """Assemble the patient's clinical context from a consistent store view."""
    now = now or utcnow()
    patient = view.get_patient(patient_id)
    prescriptions = view.list_prescriptions(patient_id=patient_id)

    active: set[str] = set()
    recent: list[tuple[str, datetime]] = []
    cutoff = now - timedelta(days=window_days)
    for rx in prescriptions:
        if rx.status in (PrescriptionStatus.SENT, PrescriptionStatus.ACKNOWLEDGED):
            active.update(i.drug_id for i in rx.items)
        elif rx.status == PrescriptionStatus.DISPENSED and rx.dispensed_at is not None:
            for item in rx.items:
                if rx.dispensed_at + timedelta(days=item.duration_days) >= now:
                    active.add(item.drug_id)
        if rx.status != PrescriptionStatus.CANCELLED and rx.sent_at is not None:
            if rx.sent_at >= cutoff:
                recent.extend((i.drug_id, rx.sent_at) for i in rx.items)

    recent.sort(key=lambda pair: (pair[1], pair[0]))
    return PatientClinicalContext(
        allergies=patient.allergies,
        active_medications=frozenset(active),
        recent_prescriptions=tuple(recent),
    )
