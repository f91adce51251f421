"""Shared fixtures: a throwaway clinic (store + auth + workflow) per test."""

from __future__ import annotations

from datetime import date, datetime, timedelta, timezone

import pytest

from rxtropic import domain
from rxtropic.auth import AccountContext, AuthService, hash_password
from rxtropic.domain import (
    Disease,
    Drug,
    InteractionRule,
    InteractionSeverity,
    Patient,
    PractitionerAccount,
    PrescriptionItem,
    Role,
    Sex,
)
from rxtropic.store import SYSTEM_ACTOR, Store
from rxtropic.workflow import PrescriptionWorkflow

PASSWORD = "correct-horse-9"
# Hashing is deliberately slow; do it once and share the digest.
DIGEST = hash_password(PASSWORD)


class FakeClock:
    """Deterministic time source; tests advance it explicitly."""

    def __init__(self, start: datetime | None = None):
        self.now = start or datetime(2026, 1, 5, 8, 0, 0, tzinfo=timezone.utc)

    def __call__(self) -> datetime:
        return self.now

    def advance(self, **kwargs) -> datetime:
        self.now += timedelta(**kwargs)
        return self.now


class Clinic:
    """One wired service instance plus helpers to mint records."""

    def __init__(self, store_path: str, clock: FakeClock | None = None):
        self.clock = clock or FakeClock()
        self.store = Store(store_path, clock=self.clock)
        self.auth = AuthService(self.store, clock=self.clock)
        self.wf = PrescriptionWorkflow(self.store, clock=self.clock)
        self._seq = 0

    def close(self) -> None:
        self.store.close()

    def _next(self, prefix: str) -> str:
        self._seq += 1
        return f"{prefix}{self._seq}"

    def add_account(
        self,
        role: Role,
        full_name: str | None = None,
        license_number: str | None = None,
        active: bool = True,
    ) -> PractitionerAccount:
        account = PractitionerAccount(
            id=domain.new_id(),
            full_name=full_name or self._next(f"{role.value.title()} "),
            role=role,
            license_number=license_number or self._next("LIC-"),
            password_digest=DIGEST,
            active=active,
            created_at=self.clock(),
        )
        self.store.put_practitioner(account, SYSTEM_ACTOR)
        return account

    def admin(self, **kw) -> PractitionerAccount:
        return self.add_account(Role.ADMINISTRATOR, **kw)

    def doctor(self, **kw) -> PractitionerAccount:
        return self.add_account(Role.DOCTOR, **kw)

    def pharmacist(self, **kw) -> PractitionerAccount:
        return self.add_account(Role.PHARMACIST, **kw)

    def ctx(self, account: PractitionerAccount) -> AccountContext:
        return AccountContext(account_id=account.id, role=account.role)

    def add_patient(
        self,
        full_name: str | None = None,
        allergies: tuple[str, ...] = (),
        date_of_birth: date = date(1985, 6, 1),
        active: bool = True,
    ) -> Patient:
        patient = Patient(
            id=domain.new_id(),
            full_name=full_name or self._next("Patient "),
            date_of_birth=date_of_birth,
            sex=Sex.F,
            allergies=frozenset(allergies),
            active=active,
        )
        self.store.put_patient(patient, SYSTEM_ACTOR)
        return patient

    def add_disease(self, name: str | None = None) -> Disease:
        disease = Disease(id=domain.new_id(), name=name or self._next("Disease "), description="")
        self.store.put_disease(disease, SYSTEM_ACTOR)
        return disease

    def add_drug(
        self,
        name: str | None = None,
        indications: tuple[str, ...] = (),
        substances: tuple[str, ...] = (),
        active: bool = True,
    ) -> Drug:
        drug = Drug(
            id=domain.new_id(),
            name=name or self._next("Drug "),
            indications=frozenset(indications),
            substance_codes=frozenset(substances),
            active=active,
        )
        self.store.put_drug(drug, SYSTEM_ACTOR)
        return drug

    def add_rule(
        self,
        drug_a: Drug,
        drug_b: Drug,
        severity: InteractionSeverity = InteractionSeverity.MODERATE,
        note: str = "monitor",
    ) -> InteractionRule:
        rule = InteractionRule.of(drug_a.id, drug_b.id, severity, note)
        self.store.put_rule(rule, SYSTEM_ACTOR)
        return rule

    def item(self, drug: Drug, duration_days: int = 5) -> PrescriptionItem:
        return PrescriptionItem(
            drug_id=drug.id,
            dose="1 tab",
            frequency="bd",
            duration_days=duration_days,
            instructions="after food",
        )

    def draft(self, doctor, patient, disease, drugs):
        items = [self.item(d) for d in drugs]
        return self.wf.compose(self.ctx(doctor), patient.id, disease.id, items)


@pytest.fixture
def clinic(tmp_path):
    c = Clinic(str(tmp_path / "store.db"))
    yield c
    c.close()


@pytest.fixture
def store(clinic):
    return clinic.store
