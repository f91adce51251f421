"""Durable storage for all domain records plus the append-only audit log.

Backed by an embedded SQLite file. Records are stored as JSON documents in a
single table keyed by (kind, id); natural keys (license number, drug name,
disease name, interaction pair) are extracted into an indexed column so
uniqueness is enforced by the database, not convention.

Concurrency: one connection per thread, WAL journal, and explicit
``BEGIN IMMEDIATE`` write transactions. That serializes writers, which is
what makes ``transition`` a linearizable compare-and-set, while snapshot
readers never block them.

The audit table is append-only: every successful mutating operation writes
exactly one entry in the same transaction as the mutation, and ``seq`` is
assigned as max+1 under the write lock, so the log is gap-free at rest.
"""

from __future__ import annotations

import json
import os
import sqlite3
import threading
from dataclasses import dataclass
from datetime import datetime
from typing import Callable, Iterable

from .domain import (
    Disease,
    Drug,
    InteractionRule,
    Patient,
    PractitionerAccount,
    Prescription,
    PrescriptionStatus,
    Role,
    is_legal_transition,
    normalize_code,
    rule_pair_key,
    utcnow,
)
from .errors import (
    ConflictError,
    NotFoundError,
    StoreLockedError,
    UniqueViolationError,
    UnknownDiseaseError,
    UnknownDrugError,
    UnknownPatientError,
    ValidationFailedError,
)
from . import domain

SYSTEM_ACTOR = "SYSTEM"

_SCHEMA = """
CREATE TABLE IF NOT EXISTS records (
    kind        TEXT NOT NULL,
    id          TEXT NOT NULL,
    natural_key TEXT,
    data        TEXT NOT NULL,
    PRIMARY KEY (kind, id)
);
CREATE UNIQUE INDEX IF NOT EXISTS records_natural_key
    ON records (kind, natural_key) WHERE natural_key IS NOT NULL;
CREATE TABLE IF NOT EXISTS audit (
    seq         INTEGER PRIMARY KEY,
    at          TEXT NOT NULL,
    actor_id    TEXT NOT NULL,
    action      TEXT NOT NULL,
    entity_kind TEXT NOT NULL,
    entity_id   TEXT NOT NULL,
    detail      TEXT NOT NULL
);
"""


@dataclass(frozen=True)
class AuditEntry:
    """One append-only record of a mutating (or disclosing) action."""

    seq: int
    at: datetime
    actor_id: str
    action: str
    entity_kind: str
    entity_id: str
    detail: dict

    def to_dict(self) -> dict:
        return {
            "seq": self.seq,
            "at": self.at.isoformat(),
            "actor_id": self.actor_id,
            "action": self.action,
            "entity_kind": self.entity_kind,
            "entity_id": self.entity_id,
            "detail": self.detail,
        }


class StoreLock:
    """Advisory single-process lock on a store path.

    The lock file records the holder's pid; a lock whose process is gone is
    stale and may be taken over (a killed server must not brick the store).
    """

    def __init__(self, store_path: str):
        self.lock_path = store_path + ".lock"
        self._held = False

    @staticmethod
    def _pid_alive(pid: int) -> bool:
        try:
            os.kill(pid, 0)
        except ProcessLookupError:
            return False
        except PermissionError:
            return True
        return True

    def holder(self) -> int | None:
        """Pid of a live holder, or None."""
        try:
            with open(self.lock_path, encoding="utf-8") as fh:
                pid = int(fh.read().strip() or "0")
        except (OSError, ValueError):
            return None
        if pid and self._pid_alive(pid):
            return pid
        return None

    def acquire(self) -> "StoreLock":
        holder = self.holder()
        if holder is not None:
            raise StoreLockedError(f"store is held by pid {holder}")
        with open(self.lock_path, "w", encoding="utf-8") as fh:
            fh.write(str(os.getpid()))
        self._held = True
        return self

    def release(self) -> None:
        if self._held:
            try:
                os.unlink(self.lock_path)
            except OSError:
                pass
            self._held = False

    def __enter__(self) -> "StoreLock":
        return self.acquire()

    def __exit__(self, *exc) -> None:
        self.release()


def _record_natural_key(kind: str, data: dict) -> str | None:
    if kind == "practitioner":
        return normalize_code(data["license_number"])
    if kind in ("drug", "disease"):
        return normalize_code(data["name"])
    if kind == "rule":
        return data["drug_a"] + "|" + data["drug_b"]
    return None


_LOADERS: dict[str, Callable[[dict], object]] = {
    "practitioner": PractitionerAccount.from_dict,
    "patient": Patient.from_dict,
    "drug": Drug.from_dict,
    "disease": Disease.from_dict,
    "rule": InteractionRule.from_dict,
    "prescription": Prescription.from_dict,
}

_NOT_FOUND = {
    "patient": UnknownPatientError,
    "drug": UnknownDrugError,
    "disease": UnknownDiseaseError,
}


def _not_found(kind: str, obj_id: str) -> NotFoundError:
    return _NOT_FOUND.get(kind, NotFoundError)(f"{kind} {obj_id} not found")


class _ReadView:
    """Read operations over one connection; shared by Store and Snapshot."""

    def __init__(self, conn_supplier: Callable[[], sqlite3.Connection]):
        self._conn_of = conn_supplier

    def _rows(self, kind: str) -> Iterable[str]:
        cur = self._conn_of().execute(
            "SELECT data FROM records WHERE kind = ? ORDER BY id", (kind,)
        )
        return [r[0] for r in cur.fetchall()]

    def _load(self, kind: str, obj_id: str):
        cur = self._conn_of().execute(
            "SELECT data FROM records WHERE kind = ? AND id = ?", (kind, obj_id)
        )
        row = cur.fetchone()
        if row is None:
            return None
        return _LOADERS[kind](json.loads(row[0]))

    def _require(self, kind: str, obj_id: str):
        obj = self._load(kind, obj_id)
        if obj is None:
            raise _not_found(kind, obj_id)
        return obj

    def _all(self, kind: str) -> list:
        loader = _LOADERS[kind]
        return [loader(json.loads(d)) for d in self._rows(kind)]

    # practitioners
    def get_practitioner(self, acc_id: str) -> PractitionerAccount:
        return self._require("practitioner", acc_id)

    def find_practitioner_by_license(self, license_number: str) -> PractitionerAccount | None:
        key = normalize_code(license_number)
        for acc in self._all("practitioner"):
            if normalize_code(acc.license_number) == key:
                return acc
        return None

    def list_practitioners(self, role: Role | None = None, active: bool | None = None) -> list[PractitionerAccount]:
        accs = self._all("practitioner")
        if role is not None:
            accs = [a for a in accs if a.role == role]
        if active is not None:
            accs = [a for a in accs if a.active == active]
        return sorted(accs, key=lambda a: (a.full_name.lower(), a.id))

    def has_administrator(self) -> bool:
        return any(a.role == Role.ADMINISTRATOR for a in self._all("practitioner"))

    # patients
    def get_patient(self, patient_id: str) -> Patient:
        return self._require("patient", patient_id)

    def list_patients(self, q: str | None = None, active: bool | None = None) -> list[Patient]:
        pats = self._all("patient")
        if q:
            needle = normalize_code(q)
            pats = [p for p in pats if needle in normalize_code(p.full_name)]
        if active is not None:
            pats = [p for p in pats if p.active == active]
        return sorted(pats, key=lambda p: (p.full_name.lower(), p.id))

    # drugs
    def get_drug(self, drug_id: str) -> Drug:
        return self._require("drug", drug_id)

    def find_drug_by_name(self, name: str) -> Drug | None:
        key = normalize_code(name)
        for d in self._all("drug"):
            if normalize_code(d.name) == key:
                return d
        return None

    def list_drugs(self, q: str | None = None, active: bool | None = None) -> list[Drug]:
        drugs = self._all("drug")
        if q:
            needle = normalize_code(q)
            drugs = [d for d in drugs if needle in normalize_code(d.name)]
        if active is not None:
            drugs = [d for d in drugs if d.active == active]
        return sorted(drugs, key=lambda d: (d.name.lower(), d.id))

    def drug_registry(self) -> dict[str, Drug]:
        return {d.id: d for d in self._all("drug")}

    # diseases
    def get_disease(self, disease_id: str) -> Disease:
        return self._require("disease", disease_id)

    def find_disease_by_name(self, name: str) -> Disease | None:
        key = normalize_code(name)
        for d in self._all("disease"):
            if normalize_code(d.name) == key:
                return d
        return None

    def list_diseases(self) -> list[Disease]:
        return sorted(self._all("disease"), key=lambda d: (d.name.lower(), d.id))

    # interaction rules
    def get_rule(self, drug_a: str, drug_b: str) -> InteractionRule | None:
        a, b = rule_pair_key(drug_a, drug_b)
        cur = self._conn_of().execute(
            "SELECT data FROM records WHERE kind = 'rule' AND natural_key = ?",
            (a + "|" + b,),
        )
        row = cur.fetchone()
        return InteractionRule.from_dict(json.loads(row[0])) if row else None

    def list_rules(self) -> list[InteractionRule]:
        return sorted(self._all("rule"), key=lambda r: r.pair_key)

    def rule_index(self) -> dict[frozenset, InteractionRule]:
        return {r.drug_pair: r for r in self._all("rule")}

    # prescriptions
    def get_prescription(self, rx_id: str) -> Prescription:
        return self._require("prescription", rx_id)

    def list_prescriptions(
        self,
        status: PrescriptionStatus | None = None,
        patient_id: str | None = None,
        prescriber_id: str | None = None,
        pharmacist_id: str | None = None,
    ) -> list[Prescription]:
        rxs = self._all("prescription")
        if status is not None:
            rxs = [r for r in rxs if r.status == status]
        if patient_id is not None:
            rxs = [r for r in rxs if r.patient_id == patient_id]
        if prescriber_id is not None:
            rxs = [r for r in rxs if r.prescriber_id == prescriber_id]
        if pharmacist_id is not None:
            rxs = [r for r in rxs if r.pharmacist_id == pharmacist_id]
        return sorted(rxs, key=lambda r: (r.created_at, r.id))

    # audit
    def audit_scan(self, entity_id: str | None = None) -> list[AuditEntry]:
        sql = "SELECT seq, at, actor_id, action, entity_kind, entity_id, detail FROM audit"
        args: tuple = ()
        if entity_id is not None:
            sql += " WHERE entity_id = ?"
            args = (entity_id,)
        sql += " ORDER BY seq"
        out = []
        for seq, at, actor, action, ekind, eid, detail in self._conn_of().execute(sql, args):
            out.append(
                AuditEntry(
                    seq=seq,
                    at=datetime.fromisoformat(at),
                    actor_id=actor,
                    action=action,
                    entity_kind=ekind,
                    entity_id=eid,
                    detail=json.loads(detail),
                )
            )
        return out

    def audit_max_seq(self) -> int:
        row = self._conn_of().execute("SELECT COALESCE(MAX(seq), 0) FROM audit").fetchone()
        return row[0]


class Snapshot(_ReadView):
    """Transaction-consistent read-only view; does not block writers."""

    def __init__(self, conn: sqlite3.Connection):
        super().__init__(lambda: conn)
        self._conn = conn
        self._conn.execute("BEGIN")
        # First read pins the WAL snapshot.
        self._conn.execute("SELECT COUNT(*) FROM records").fetchone()

    def close(self) -> None:
        try:
            self._conn.rollback()
        finally:
            self._conn.close()

    def __enter__(self) -> "Snapshot":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


class Store(_ReadView):
    """The single embedded store shared by all modules in one process."""

    def __init__(self, path: str, clock: Callable[[], datetime] = utcnow):
        self.path = path
        self._clock = clock
        self._local = threading.local()
        self._conns: list[sqlite3.Connection] = []
        self._conns_guard = threading.Lock()
        super().__init__(self._conn)
        self._conn().executescript(_SCHEMA)

    def _new_conn(self) -> sqlite3.Connection:
        conn = sqlite3.connect(self.path, timeout=30.0, isolation_level=None)
        conn.execute("PRAGMA journal_mode=WAL")
        conn.execute("PRAGMA synchronous=NORMAL")
        conn.execute("PRAGMA busy_timeout=30000")
        conn.execute("PRAGMA foreign_keys=ON")
        return conn

    def _conn(self) -> sqlite3.Connection:
        conn = getattr(self._local, "conn", None)
        if conn is None:
            conn = self._new_conn()
            self._local.conn = conn
            with self._conns_guard:
                self._conns.append(conn)
        return conn

    def close(self) -> None:
        with self._conns_guard:
            for conn in self._conns:
                try:
                    conn.close()
                except sqlite3.Error:
                    pass
            self._conns.clear()
        self._local = threading.local()

    def snapshot(self) -> Snapshot:
        return Snapshot(self._new_conn())

    class _WriteTxn:
        def __init__(self, conn: sqlite3.Connection):
            self.conn = conn

        def __enter__(self) -> sqlite3.Connection:
            self.conn.execute("BEGIN IMMEDIATE")
            return self.conn

        def __exit__(self, exc_type, exc, tb) -> None:
            if exc_type is None:
                self.conn.execute("COMMIT")
            else:
                self.conn.execute("ROLLBACK")

    def _write(self) -> "_WriteTxn":
        return Store._WriteTxn(self._conn())

    def _append_audit(
        self,
        conn: sqlite3.Connection,
        actor_id: str,
        action: str,
        entity_kind: str,
        entity_id: str,
        detail: dict | None,
    ) -> int:
        seq = conn.execute("SELECT COALESCE(MAX(seq), 0) + 1 FROM audit").fetchone()[0]
        conn.execute(
            "INSERT INTO audit (seq, at, actor_id, action, entity_kind, entity_id, detail)"
            " VALUES (?, ?, ?, ?, ?, ?, ?)",
            (
                seq,
                self._clock().isoformat(),
                actor_id,
                action,
                entity_kind,
                entity_id,
                json.dumps(detail or {}, sort_keys=True),
            ),
        )
        return seq

    def audit_append(
        self, actor_id: str, action: str, entity_kind: str, entity_id: str, detail: dict | None = None
    ) -> int:
        with self._write() as conn:
            return self._append_audit(conn, actor_id, action, entity_kind, entity_id, detail)

    def _put(
        self,
        kind: str,
        obj,
        actor_id: str,
        detail: dict | None = None,
        action: str | None = None,
    ) -> str:
        """Insert or replace one record; returns 'created', 'updated' or 'unchanged'."""
        problems = domain.validate_entity(obj)
        if problems:
            raise ValidationFailedError(problems)
        data = obj.to_dict()
        obj_id = data.get("id") or _record_natural_key(kind, data)
        natural_key = _record_natural_key(kind, data)
        payload = json.dumps(data, sort_keys=True)
        with self._write() as conn:
            if natural_key is not None:
                clash = conn.execute(
                    "SELECT id FROM records WHERE kind = ? AND natural_key = ? AND id != ?",
                    (kind, natural_key, obj_id),
                ).fetchone()
                if clash:
                    raise UniqueViolationError(f"{kind} natural key already in use")
            existing = conn.execute(
                "SELECT data FROM records WHERE kind = ? AND id = ?", (kind, obj_id)
            ).fetchone()
            if existing and existing[0] == payload:
                return "unchanged"
            try:
                conn.execute(
                    "INSERT INTO records (kind, id, natural_key, data) VALUES (?, ?, ?, ?)"
                    " ON CONFLICT (kind, id) DO UPDATE SET natural_key = ?, data = ?",
                    (kind, obj_id, natural_key, payload, natural_key, payload),
                )
            except sqlite3.IntegrityError as exc:
                raise UniqueViolationError(str(exc)) from exc
            verb = "update" if existing else "create"
            self._append_audit(
                conn, actor_id, action or f"{kind}.{verb}", kind, obj_id, detail
            )
            return "updated" if existing else "created"

    def put_practitioner(self, acc: PractitionerAccount, actor_id: str, detail: dict | None = None) -> str:
        return self._put("practitioner", acc, actor_id, detail or {"license_number": acc.license_number})

    def put_patient(self, patient: Patient, actor_id: str, detail: dict | None = None) -> str:
        return self._put("patient", patient, actor_id, detail or {"full_name": patient.full_name})

    def put_disease(self, disease: Disease, actor_id: str, detail: dict | None = None) -> str:
        return self._put("disease", disease, actor_id, detail or {"name": disease.name})

    def put_drug(self, drug: Drug, actor_id: str, detail: dict | None = None) -> str:
        for disease_id in drug.indications:
            if self._load("disease", disease_id) is None:
                raise UnknownDiseaseError(f"indication {disease_id} is not a known disease")
        return self._put("drug", drug, actor_id, detail or {"name": drug.name})

    def put_rule(self, rule: InteractionRule, actor_id: str, detail: dict | None = None) -> str:
        problems = domain.validate_entity(rule)
        if problems:
            raise ValidationFailedError(problems)
        for drug_id in rule.drug_pair:
            if self._load("drug", drug_id) is None:
                raise UnknownDrugError(f"rule references unknown drug {drug_id}")
        a, b = rule.pair_key
        rule_id = a + "|" + b
        data = rule.to_dict()
        data["id"] = rule_id
        payload = json.dumps(data, sort_keys=True)
        with self._write() as conn:
            existing = conn.execute(
                "SELECT data FROM records WHERE kind = 'rule' AND id = ?", (rule_id,)
            ).fetchone()
            if existing and existing[0] == payload:
                return "unchanged"
            conn.execute(
                "INSERT INTO records (kind, id, natural_key, data) VALUES ('rule', ?, ?, ?)"
                " ON CONFLICT (kind, id) DO UPDATE SET data = ?",
                (rule_id, rule_id, payload, payload),
            )
            verb = "update" if existing else "create"
            self._append_audit(conn, actor_id, f"rule.{verb}", "rule", rule_id, detail)
            return "updated" if existing else "created"

    def delete_disease(self, disease_id: str, actor_id: str) -> None:
        """Hard delete; callers must ensure nothing references the disease."""
        with self._write() as conn:
            cur = conn.execute(
                "DELETE FROM records WHERE kind = 'disease' AND id = ?", (disease_id,)
            )
            if cur.rowcount == 0:
                raise _not_found("disease", disease_id)
            self._append_audit(conn, actor_id, "disease.delete", "disease", disease_id, None)

    def delete_rule(self, drug_a: str, drug_b: str, actor_id: str) -> None:
        a, b = rule_pair_key(drug_a, drug_b)
        rule_id = a + "|" + b
        with self._write() as conn:
            cur = conn.execute(
                "DELETE FROM records WHERE kind = 'rule' AND id = ?", (rule_id,)
            )
            if cur.rowcount == 0:
                raise NotFoundError(f"no interaction rule for pair {a}, {b}")
            self._append_audit(conn, actor_id, "rule.delete", "rule", rule_id, None)

    def create_prescription(self, rx: Prescription, actor_id: str, action: str = "prescription.compose") -> Prescription:
        problems = domain.validate_entity(rx)
        if problems:
            raise ValidationFailedError(problems)
        payload = json.dumps(rx.to_dict(), sort_keys=True)
        with self._write() as conn:
            try:
                conn.execute(
                    "INSERT INTO records (kind, id, natural_key, data) VALUES ('prescription', ?, NULL, ?)",
                    (rx.id, payload),
                )
            except sqlite3.IntegrityError as exc:
                raise UniqueViolationError(str(exc)) from exc
            self._append_audit(
                conn, actor_id, action, "prescription", rx.id,
                {"patient_id": rx.patient_id, "status": rx.status.value},
            )
        return rx

    def _cas_update(
        self,
        conn: sqlite3.Connection,
        rx_id: str,
        expected_status: PrescriptionStatus,
        expected_rev: int | None,
        build: Callable[[Prescription], Prescription],
        actor_id: str,
        action: str,
        detail: dict | None,
        guard: Callable[[_ReadView, Prescription], None] | None = None,
    ) -> Prescription:
        row = conn.execute(
            "SELECT data FROM records WHERE kind = 'prescription' AND id = ?", (rx_id,)
        ).fetchone()
        if row is None:
            raise NotFoundError(f"prescription {rx_id} not found")
        current = Prescription.from_dict(json.loads(row[0]))
        if current.status != expected_status:
            raise ConflictError(
                f"expected status {expected_status.value}, found {current.status.value}"
            )
        if expected_rev is not None and current.rev != expected_rev:
            raise ConflictError("prescription changed since it was read")
        if guard is not None:
            # Runs inside the write transaction: the view it gets cannot
            # change under it, so guard checks are linearized with the update.
            guard(_ReadView(lambda: conn), current)
        updated = build(current).with_changes(rev=current.rev + 1)
        problems = domain.validate_entity(updated)
        if problems:
            raise ValidationFailedError(problems)
        conn.execute(
            "UPDATE records SET data = ? WHERE kind = 'prescription' AND id = ?",
            (json.dumps(updated.to_dict(), sort_keys=True), rx_id),
        )
        self._append_audit(
            conn, actor_id, action, "prescription", rx_id,
            dict(detail or {}, status=updated.status.value),
        )
        return updated

    def transition(
        self,
        rx_id: str,
        expected_status: PrescriptionStatus,
        new_status: PrescriptionStatus,
        mutate: Callable[[Prescription], Prescription],
        *,
        actor_id: str,
        action: str,
        detail: dict | None = None,
        expected_rev: int | None = None,
        guard: Callable[[_ReadView, Prescription], None] | None = None,
    ) -> Prescription:
        """Atomic status change: applied iff the stored status still matches.

        Illegal edges are rejected before any storage is touched. ``guard``
        runs inside the transaction against a consistent view of the whole
        store and may veto the change by raising.
        """
        if not is_legal_transition(expected_status, new_status):
            raise ValueError(
                f"illegal transition {expected_status.value} -> {new_status.value}"
            )
        with self._write() as conn:
            return self._cas_update(
                conn,
                rx_id,
                expected_status,
                expected_rev,
                lambda rx: mutate(rx).with_changes(status=new_status),
                actor_id,
                action,
                detail,
                guard,
            )

    def update_draft(
        self,
        rx_id: str,
        mutate: Callable[[Prescription], Prescription],
        *,
        actor_id: str,
        action: str,
        detail: dict | None = None,
        expected_rev: int | None = None,
    ) -> Prescription:
        """In-place edit, only while the prescription is still a DRAFT."""
        with self._write() as conn:
            return self._cas_update(
                conn, rx_id, PrescriptionStatus.DRAFT, expected_rev, mutate,
                actor_id, action, detail,
            )
