"""Prescription lifecycle: compose, screen, send, acknowledge, dispense,
cancel, and printed-copy export.

Authorization against the permission matrix happens at the API layer;
this module enforces the identity rules that the matrix cannot express
(only the prescribing doctor may touch a draft, only the acknowledging
pharmacist may dispense) and drives every status change through the
store's compare-and-set so transitions are linearizable per prescription.
"""

from __future__ import annotations

from datetime import datetime
from typing import Callable, Sequence

from . import rules
from .auth import AccountContext
from .domain import (
    FindingKind,
    FindingSeverity,
    OverrideRecord,
    Prescription,
    PrescriptionItem,
    PrescriptionStatus,
    Role,
    ValidationFinding,
    new_id,
    utcnow,
)
from .errors import (
    BlockedError,
    ConflictError,
    ForbiddenError,
    NotAcknowledgingPharmacistError,
    NotPrescriberError,
    OverridesRequiredError,
    ValidationFailedError,
    WrongStateError,
)
from .store import Store

PRINT_HEADER = "RXTROPIC PRESCRIPTION"


class PrescriptionWorkflow:
    def __init__(
        self,
        store: Store,
        clock: Callable[[], datetime] = utcnow,
        duplicate_window_days: int = rules.DEFAULT_DUPLICATE_WINDOW_DAYS,
    ):
        self._store = store
        self._clock = clock
        self._window_days = duplicate_window_days

    # ------------------------------------------------------------------
    # doctor operations

    def compose(
        self,
        ctx: AccountContext,
        patient_id: str,
        diagnosis_id: str,
        items: Sequence[PrescriptionItem],
    ) -> Prescription:
        """Create a DRAFT for an active patient. The draft is private to its
        prescriber until sent."""
        self._require_role(ctx, Role.DOCTOR)
        patient = self._store.get_patient(patient_id)
        if not patient.active:
            raise ValidationFailedError(["patient is inactive"])
        self._store.get_disease(diagnosis_id)
        self._check_items(items)
        rx = Prescription(
            id=new_id(),
            patient_id=patient_id,
            prescriber_id=ctx.account_id,
            diagnosis_id=diagnosis_id,
            items=tuple(items),
            status=PrescriptionStatus.DRAFT,
            created_at=self._clock(),
        )
        return self._store.create_prescription(rx, actor_id=ctx.account_id)

    def preview_findings(self, ctx: AccountContext, rx_id: str) -> list[ValidationFinding]:
        """Run the rules engine against a fresh clinical context; no state change."""
        rx = self._own_draft(ctx, rx_id)
        with self._store.snapshot() as snap:
            return self._screen(snap, rx)

    def edit_draft(
        self,
        ctx: AccountContext,
        rx_id: str,
        new_items: Sequence[PrescriptionItem],
        new_diagnosis_id: str,
    ) -> Prescription:
        """Replace items and diagnosis. Overrides are cleared: they justified
        findings that no longer exist."""
        self._own_draft(ctx, rx_id)
        self._store.get_disease(new_diagnosis_id)
        self._check_items(new_items)
        try:
            return self._store.update_draft(
                rx_id,
                lambda rx: rx.with_changes(
                    items=tuple(new_items), diagnosis_id=new_diagnosis_id, overrides=()
                ),
                actor_id=ctx.account_id,
                action="prescription.edit",
            )
        except ConflictError as exc:
            raise WrongStateError(str(exc)) from exc

    def send(
        self,
        ctx: AccountContext,
        rx_id: str,
        overrides: Sequence[tuple[FindingKind, str]] = (),
    ) -> Prescription:
        """Screen, then move DRAFT -> SENT in one atomic step.

        Any BLOCK finding rejects the send outright. Every WARN kind present
        must be matched by an override with a nonempty reason; matched
        overrides are persisted on the prescription. Screening runs inside
        the store transaction, so no interleaving can sneak a conflicting
        prescription past the rules engine.
        """
        rx = self._store.get_prescription(rx_id)
        self._require_prescriber(ctx, rx)
        self._require_status(rx, PrescriptionStatus.DRAFT)

        now = self._clock()
        accepted: dict[FindingKind, str] = {}

        def guard(view, current: Prescription) -> None:
            findings = self._screen(view, current, now)
            if any(f.severity == FindingSeverity.BLOCK for f in findings):
                raise BlockedError("prescription has blocking findings", findings=findings)
            warn_kinds = {f.kind for f in findings if f.severity == FindingSeverity.WARN}
            accepted.clear()
            for kind, reason in overrides:
                if kind in warn_kinds and reason.strip() and kind not in accepted:
                    accepted[kind] = reason
            missing = warn_kinds - set(accepted)
            if missing:
                raise OverridesRequiredError(
                    "unresolved warnings: " + ", ".join(sorted(k.value for k in missing)),
                    findings=findings,
                )

        def mutate(current: Prescription) -> Prescription:
            persisted = tuple(
                OverrideRecord(finding_kind=kind, reason=reason, actor_id=ctx.account_id, at=now)
                for kind, reason in sorted(accepted.items(), key=lambda kv: kv[0].value)
            )
            return current.with_changes(sent_at=now, overrides=persisted)

        try:
            return self._store.transition(
                rx_id,
                PrescriptionStatus.DRAFT,
                PrescriptionStatus.SENT,
                mutate,
                actor_id=ctx.account_id,
                action="prescription.send",
                guard=guard,
            )
        except ConflictError as exc:
            raise WrongStateError(str(exc)) from exc

    def cancel(self, ctx: AccountContext, rx_id: str, reason: str = "") -> Prescription:
        rx = self._store.get_prescription(rx_id)
        self._require_prescriber(ctx, rx)
        if rx.status not in (PrescriptionStatus.DRAFT, PrescriptionStatus.SENT):
            raise WrongStateError(f"cannot cancel a {rx.status.value} prescription")
        now = self._clock()
        try:
            return self._store.transition(
                rx_id,
                rx.status,
                PrescriptionStatus.CANCELLED,
                lambda cur: cur.with_changes(cancelled_at=now),
                actor_id=ctx.account_id,
                action="prescription.cancel",
                detail={"reason": reason},
            )
        except ConflictError as exc:
            raise WrongStateError(str(exc)) from exc

    # ------------------------------------------------------------------
    # pharmacist operations

    def list_pending(self, ctx: AccountContext) -> list[Prescription]:
        """FIFO queue: everything SENT, plus what this pharmacist has
        acknowledged and not yet dispensed."""
        self._require_role(ctx, Role.PHARMACIST)
        queue = self._store.list_prescriptions(status=PrescriptionStatus.SENT)
        queue += self._store.list_prescriptions(
            status=PrescriptionStatus.ACKNOWLEDGED, pharmacist_id=ctx.account_id
        )
        return sorted(queue, key=lambda rx: (rx.sent_at, rx.id))

    def acknowledge(self, ctx: AccountContext, rx_id: str) -> Prescription:
        """Claim a SENT prescription. Exactly one pharmacist can win a race."""
        self._require_role(ctx, Role.PHARMACIST)
        now = self._clock()
        try:
            return self._store.transition(
                rx_id,
                PrescriptionStatus.SENT,
                PrescriptionStatus.ACKNOWLEDGED,
                lambda cur: cur.with_changes(pharmacist_id=ctx.account_id, acknowledged_at=now),
                actor_id=ctx.account_id,
                action="prescription.acknowledge",
            )
        except ConflictError as exc:
            raise WrongStateError(str(exc)) from exc

    def dispense(self, ctx: AccountContext, rx_id: str) -> Prescription:
        self._require_role(ctx, Role.PHARMACIST)
        rx = self._store.get_prescription(rx_id)
        if rx.status != PrescriptionStatus.ACKNOWLEDGED:
            raise WrongStateError(f"cannot dispense a {rx.status.value} prescription")
        if rx.pharmacist_id != ctx.account_id:
            raise NotAcknowledgingPharmacistError(
                "only the acknowledging pharmacist may dispense"
            )
        now = self._clock()
        try:
            return self._store.transition(
                rx_id,
                PrescriptionStatus.ACKNOWLEDGED,
                PrescriptionStatus.DISPENSED,
                lambda cur: cur.with_changes(dispensed_at=now),
                actor_id=ctx.account_id,
                action="prescription.dispense",
            )
        except ConflictError as exc:
            raise WrongStateError(str(exc)) from exc

    def print_copy(self, ctx: AccountContext, rx_id: str) -> str:
        """Deterministic plain-text copy for a patient collecting elsewhere.

        Printing is a disclosure event, so it is audited even though it
        changes no prescription state.
        """
        rx = self._store.get_prescription(rx_id)
        if rx.status not in (
            PrescriptionStatus.SENT,
            PrescriptionStatus.ACKNOWLEDGED,
            PrescriptionStatus.DISPENSED,
        ):
            raise WrongStateError(f"cannot print a {rx.status.value} prescription")
        patient = self._store.get_patient(rx.patient_id)
        prescriber = self._store.get_practitioner(rx.prescriber_id)
        disease = self._store.get_disease(rx.diagnosis_id)
        lines = [
            f"{PRINT_HEADER} {rx.id}",
            f"PATIENT: {patient.full_name} DOB:{patient.date_of_birth.isoformat()}",
            f"PRESCRIBER: {prescriber.full_name} LIC:{prescriber.license_number}",
            f"DIAGNOSIS: {disease.name}",
        ]
        for item in rx.items:
            drug = self._store.get_drug(item.drug_id)
            lines.append(
                f"- {drug.name} | {item.dose} | {item.frequency}"
                f" | {item.duration_days}d | {item.instructions}"
            )
        lines.append(f"PRINTED: {self._clock().isoformat()}")
        self._store.audit_append(
            ctx.account_id, "prescription.print", "prescription", rx.id, None
        )
        return "\n".join(lines) + "\n"

    # ------------------------------------------------------------------
    # internals

    def _require_role(self, ctx: AccountContext, role: Role) -> None:
        if ctx.role != role:
            raise ForbiddenError(f"operation requires role {role.value}")

    def _require_prescriber(self, ctx: AccountContext, rx: Prescription) -> None:
        self._require_role(ctx, Role.DOCTOR)
        if rx.prescriber_id != ctx.account_id:
            raise NotPrescriberError("only the prescribing doctor may do this")

    def _require_status(self, rx: Prescription, status: PrescriptionStatus) -> None:
        if rx.status != status:
            raise WrongStateError(f"expected {status.value}, found {rx.status.value}")

    def _own_draft(self, ctx: AccountContext, rx_id: str) -> Prescription:
        rx = self._store.get_prescription(rx_id)
        self._require_prescriber(ctx, rx)
        self._require_status(rx, PrescriptionStatus.DRAFT)
        return rx

    def _check_items(self, items: Sequence[PrescriptionItem]) -> None:
        """Registry-dependent item checks; structural ones live in the domain."""
        inactive = []
        for item in items:
            drug = self._store.get_drug(item.drug_id)
            if not drug.active:
                inactive.append(f"drug {drug.name} is inactive")
        if inactive:
            raise ValidationFailedError(inactive)

    def _screen(self, view, rx: Prescription, now: datetime | None = None) -> list[ValidationFinding]:
        now = now or self._clock()
        context = rules.build_patient_context(
            view, rx.patient_id, now=now, window_days=self._window_days
        )
        registries = rules.ClinicalRegistries(
            drugs=view.drug_registry(),
            diseases={d.id: d for d in view.list_diseases()},
            rules=view.rule_index(),
        )
        return rules.validate(rx, context, registries, self._window_days, now)
