"""HTTP+JSON API: every operation of the service behind bearer-token auth.

Route handlers authorize first, then parse the body, then touch the store,
so the error precedence a client observes is fixed: 401 (no/bad token),
403 (matrix denies), 404 (unknown entity), then 409/422. Request bodies are
parsed manually for the same reason; the framework never rejects a request
before authorization has run.

Error mapping is total and fixed: UNAUTHENTICATED/INVALID_CREDENTIALS=401,
FORBIDDEN (and identity failures)=403, NOT_FOUND/UNKNOWN_*=404,
CONFLICT/WRONG_STATE/BLOCKED/OVERRIDES_REQUIRED/UNIQUE_VIOLATION=409,
VALIDATION/WEAK_PASSWORD=422.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from datetime import date, timedelta

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse, PlainTextResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, ValidationError

from . import rules
from .auth import AccountContext, AuthService, Permission, check_password_strength, hash_password
from .domain import (
    Disease,
    Drug,
    FindingKind,
    InteractionRule,
    InteractionSeverity,
    Patient,
    PractitionerAccount,
    Prescription,
    PrescriptionItem,
    PrescriptionStatus,
    Role,
    Sex,
    new_id,
)
from .errors import ConflictError, NotFoundError, RxError, UnauthenticatedError, ValidationFailedError
from .store import Store
from .workflow import PrescriptionWorkflow


@dataclass
class ServiceConfig:
    store_path: str
    host: str = "127.0.0.1"
    port: int = 8000
    session_ttl_minutes: int = 480
    duplicate_window_days: int = 30
    ui_dir: str | None = None

    @property
    def bind(self) -> str:
        return f"{self.host}:{self.port}"


# ----------------------------------------------------------------------
# request bodies

class LoginBody(BaseModel):
    license_number: str
    password: str


class PasswordBody(BaseModel):
    old_password: str
    new_password: str


class PractitionerCreateBody(BaseModel):
    full_name: str
    role: Role
    license_number: str
    password: str


class PractitionerUpdateBody(BaseModel):
    full_name: str | None = None
    active: bool | None = None
    password: str | None = None


class PatientCreateBody(BaseModel):
    full_name: str
    date_of_birth: date
    sex: Sex
    allergies: list[str] = []


class PatientUpdateBody(BaseModel):
    full_name: str | None = None
    date_of_birth: date | None = None
    sex: Sex | None = None
    allergies: list[str] | None = None
    active: bool | None = None


class DiseaseBody(BaseModel):
    name: str
    description: str = ""


class DrugCreateBody(BaseModel):
    name: str
    pharmaceutical_class: str = ""
    generic_description: str = ""
    strength: str = ""
    indications: list[str] = []
    substance_codes: list[str] = []
    adverse_reactions: str = ""


class DrugUpdateBody(BaseModel):
    name: str | None = None
    pharmaceutical_class: str | None = None
    generic_description: str | None = None
    strength: str | None = None
    indications: list[str] | None = None
    substance_codes: list[str] | None = None
    adverse_reactions: str | None = None
    active: bool | None = None


class RuleBody(BaseModel):
    drug_a: str
    drug_b: str
    severity: InteractionSeverity
    note: str = ""


class ItemBody(BaseModel):
    drug_id: str
    dose: str
    frequency: str
    duration_days: int
    instructions: str = ""


class ComposeBody(BaseModel):
    patient_id: str
    diagnosis_id: str
    items: list[ItemBody]


class EditBody(BaseModel):
    diagnosis_id: str
    items: list[ItemBody]


class OverrideBody(BaseModel):
    finding_kind: FindingKind
    reason: str


class SendBody(BaseModel):
    overrides: list[OverrideBody] = []


class CancelBody(BaseModel):
    reason: str = ""


# ----------------------------------------------------------------------
# serialization

def serialize_account(acc: PractitionerAccount) -> dict:
    return {
        "id": acc.id,
        "full_name": acc.full_name,
        "role": acc.role.value,
        "license_number": acc.license_number,
        "active": acc.active,
        "created_at": acc.created_at.isoformat(),
    }


def serialize_patient(p: Patient) -> dict:
    return p.to_dict()


def serialize_drug(view, drug: Drug) -> dict:
    data = drug.to_dict()
    names = {d.id: d.name for d in view.list_diseases()}
    data["indications"] = [
        {"id": i, "name": names.get(i, i)} for i in sorted(drug.indications)
    ]
    return data


def serialize_rule(view, rule: InteractionRule) -> dict:
    data = rule.to_dict()
    registry = view.drug_registry()
    data["drug_a_name"] = registry[data["drug_a"]].name if data["drug_a"] in registry else data["drug_a"]
    data["drug_b_name"] = registry[data["drug_b"]].name if data["drug_b"] in registry else data["drug_b"]
    return data


def serialize_prescription(view, rx: Prescription) -> dict:
    data = rx.to_dict()
    data.pop("rev", None)
    registry = view.drug_registry()
    for item in data["items"]:
        drug = registry.get(item["drug_id"])
        item["drug_name"] = drug.name if drug else item["drug_id"]
    try:
        data["patient_name"] = view.get_patient(rx.patient_id).full_name
    except NotFoundError:
        data["patient_name"] = rx.patient_id
    try:
        data["prescriber_name"] = view.get_practitioner(rx.prescriber_id).full_name
    except NotFoundError:
        data["prescriber_name"] = rx.prescriber_id
    try:
        data["diagnosis_name"] = view.get_disease(rx.diagnosis_id).name
    except NotFoundError:
        data["diagnosis_name"] = rx.diagnosis_id
    return data


# ----------------------------------------------------------------------
# app factory

def create_app(
    store: Store,
    auth: AuthService,
    workflow: PrescriptionWorkflow,
    ui_dir: str | None = None,
) -> FastAPI:
    app = FastAPI(title="rxtropic", docs_url=None, redoc_url=None, openapi_url=None)

    @app.exception_handler(RxError)
    async def rx_error_handler(_request: Request, exc: RxError):
        body = {"code": exc.code, "message": exc.message}
        if exc.findings:
            body["findings"] = [f.to_dict() for f in exc.findings]
        return JSONResponse(status_code=exc.http_status, content=body)

    def bearer_token(request: Request) -> str | None:
        header = request.headers.get("authorization", "")
        if not header.lower().startswith("bearer "):
            return None
        return header[7:].strip() or None

    def require(request: Request, permission: Permission) -> AccountContext:
        return auth.authorize(bearer_token(request), permission)

    async def read_body(request: Request, model):
        try:
            payload = await request.json()
        except Exception:
            raise ValidationFailedError(["request body must be a JSON object"]) from None
        try:
            return model.model_validate(payload)
        except ValidationError as exc:
            raise ValidationFailedError(
                [
                    f"{'.'.join(str(p) for p in err['loc']) or 'body'}: {err['msg']}"
                    for err in exc.errors()
                ]
            ) from None

    def items_of(body_items: list[ItemBody]) -> list[PrescriptionItem]:
        return [
            PrescriptionItem(
                drug_id=i.drug_id,
                dose=i.dose,
                frequency=i.frequency,
                duration_days=i.duration_days,
                instructions=i.instructions,
            )
            for i in body_items
        ]

    @app.get("/healthz")
    async def healthz():
        return {"status": "ok"}

    # ------------------------------------------------------------------
    # auth

    @app.post("/v1/login")
    async def login(request: Request):
        body = await read_body(request, LoginBody)
        session = auth.login(body.license_number, body.password)
        account = store.get_practitioner(session.account_id)
        return {
            "token": session.token,
            "account_id": session.account_id,
            "role": session.role.value,
            "full_name": account.full_name,
            "expires_at": session.expires_at.isoformat(),
        }

    @app.post("/v1/logout")
    async def logout(request: Request):
        token = bearer_token(request)
        if token is None:
            raise UnauthenticatedError("missing bearer token")
        auth.logout(token)
        return {"status": "ok"}

    @app.post("/v1/password")
    async def change_password(request: Request):
        token = bearer_token(request)
        if token is None:
            raise UnauthenticatedError("missing bearer token")
        body = await read_body(request, PasswordBody)
        auth.change_password(token, body.old_password, body.new_password)
        return {"status": "ok"}

    # ------------------------------------------------------------------
    # admin: practitioners

    @app.get("/v1/admin/practitioners")
    async def list_practitioners(request: Request, role: str | None = None, active: bool | None = None):
        require(request, Permission.MANAGE_USERS)
        role_filter = Role(role) if role else None
        return [serialize_account(a) for a in store.list_practitioners(role=role_filter, active=active)]

    @app.post("/v1/admin/practitioners", status_code=201)
    async def create_practitioner(request: Request):
        ctx = require(request, Permission.MANAGE_USERS)
        body = await read_body(request, PractitionerCreateBody)
        check_password_strength(body.password)
        account = PractitionerAccount(
            id=new_id(),
            full_name=body.full_name,
            role=body.role,
            license_number=body.license_number,
            password_digest=hash_password(body.password),
        )
        store.put_practitioner(account, actor_id=ctx.account_id)
        return serialize_account(account)

    @app.get("/v1/admin/practitioners/{acc_id}")
    async def get_practitioner(request: Request, acc_id: str):
        require(request, Permission.MANAGE_USERS)
        return serialize_account(store.get_practitioner(acc_id))

    @app.put("/v1/admin/practitioners/{acc_id}")
    async def update_practitioner(request: Request, acc_id: str):
        ctx = require(request, Permission.MANAGE_USERS)
        body = await read_body(request, PractitionerUpdateBody)
        account = store.get_practitioner(acc_id)
        data = account.to_dict()
        if body.full_name is not None:
            data["full_name"] = body.full_name
        if body.active is not None:
            data["active"] = body.active
        if body.password is not None:
            check_password_strength(body.password)
            data["password_digest"] = hash_password(body.password)
        updated = PractitionerAccount.from_dict(data)
        store.put_practitioner(updated, actor_id=ctx.account_id)
        if body.active is False:
            auth.revoke_account_sessions(acc_id)
        return serialize_account(updated)

    @app.delete("/v1/admin/practitioners/{acc_id}")
    async def deactivate_practitioner(request: Request, acc_id: str):
        ctx = require(request, Permission.MANAGE_USERS)
        account = store.get_practitioner(acc_id)
        updated = PractitionerAccount.from_dict(dict(account.to_dict(), active=False))
        store.put_practitioner(updated, actor_id=ctx.account_id, detail={"event": "deactivate"})
        auth.revoke_account_sessions(acc_id)
        return serialize_account(updated)

    # ------------------------------------------------------------------
    # admin: patients

    @app.get("/v1/admin/patients")
    async def admin_list_patients(request: Request, q: str | None = None, active: bool | None = None):
        require(request, Permission.MANAGE_PATIENTS)
        return [serialize_patient(p) for p in store.list_patients(q=q, active=active)]

    @app.post("/v1/admin/patients", status_code=201)
    async def create_patient(request: Request):
        ctx = require(request, Permission.MANAGE_PATIENTS)
        body = await read_body(request, PatientCreateBody)
        patient = Patient(
            id=new_id(),
            full_name=body.full_name,
            date_of_birth=body.date_of_birth,
            sex=body.sex,
            allergies=frozenset(body.allergies),
        )
        store.put_patient(patient, actor_id=ctx.account_id)
        return serialize_patient(patient)

    @app.get("/v1/admin/patients/{patient_id}")
    async def admin_get_patient(request: Request, patient_id: str):
        require(request, Permission.MANAGE_PATIENTS)
        return serialize_patient(store.get_patient(patient_id))

    @app.put("/v1/admin/patients/{patient_id}")
    async def update_patient(request: Request, patient_id: str):
        ctx = require(request, Permission.MANAGE_PATIENTS)
        body = await read_body(request, PatientUpdateBody)
        patient = store.get_patient(patient_id)
        data = patient.to_dict()
        if body.full_name is not None:
            data["full_name"] = body.full_name
        if body.date_of_birth is not None:
            data["date_of_birth"] = body.date_of_birth.isoformat()
        if body.sex is not None:
            data["sex"] = body.sex.value
        if body.allergies is not None:
            data["allergies"] = sorted(set(body.allergies))
        if body.active is not None:
            data["active"] = body.active
        updated = Patient.from_dict(data)
        store.put_patient(updated, actor_id=ctx.account_id)
        return serialize_patient(updated)

    @app.delete("/v1/admin/patients/{patient_id}")
    async def deactivate_patient(request: Request, patient_id: str):
        ctx = require(request, Permission.MANAGE_PATIENTS)
        patient = store.get_patient(patient_id)
        updated = Patient.from_dict(dict(patient.to_dict(), active=False))
        store.put_patient(updated, actor_id=ctx.account_id, detail={"event": "deactivate"})
        return serialize_patient(updated)

    # ------------------------------------------------------------------
    # admin: diseases

    @app.get("/v1/admin/diseases")
    async def admin_list_diseases(request: Request):
        require(request, Permission.MANAGE_DISEASES)
        return [d.to_dict() for d in store.list_diseases()]

    @app.post("/v1/admin/diseases", status_code=201)
    async def create_disease(request: Request):
        ctx = require(request, Permission.MANAGE_DISEASES)
        body = await read_body(request, DiseaseBody)
        disease = Disease(id=new_id(), name=body.name, description=body.description)
        store.put_disease(disease, actor_id=ctx.account_id)
        return disease.to_dict()

    @app.put("/v1/admin/diseases/{disease_id}")
    async def update_disease(request: Request, disease_id: str):
        ctx = require(request, Permission.MANAGE_DISEASES)
        body = await read_body(request, DiseaseBody)
        existing = store.get_disease(disease_id)
        updated = Disease(id=existing.id, name=body.name, description=body.description)
        store.put_disease(updated, actor_id=ctx.account_id)
        return updated.to_dict()

    @app.delete("/v1/admin/diseases/{disease_id}")
    async def delete_disease(request: Request, disease_id: str):
        ctx = require(request, Permission.MANAGE_DISEASES)
        disease = store.get_disease(disease_id)
        referenced = any(disease.id in d.indications for d in store.list_drugs()) or any(
            rx.diagnosis_id == disease.id for rx in store.list_prescriptions()
        )
        if referenced:
            raise ConflictError("disease is referenced by drugs or prescriptions")
        store.delete_disease(disease_id, actor_id=ctx.account_id)
        return {"status": "deleted"}

    # ------------------------------------------------------------------
    # admin: drugs

    @app.get("/v1/admin/drugs")
    async def admin_list_drugs(request: Request, q: str | None = None, active: bool | None = None):
        require(request, Permission.MANAGE_DRUGS)
        return [serialize_drug(store, d) for d in store.list_drugs(q=q, active=active)]

    @app.post("/v1/admin/drugs", status_code=201)
    async def create_drug(request: Request):
        ctx = require(request, Permission.MANAGE_DRUGS)
        body = await read_body(request, DrugCreateBody)
        drug = Drug(
            id=new_id(),
            name=body.name,
            pharmaceutical_class=body.pharmaceutical_class,
            generic_description=body.generic_description,
            strength=body.strength,
            indications=frozenset(body.indications),
            substance_codes=frozenset(body.substance_codes),
            adverse_reactions=body.adverse_reactions,
        )
        store.put_drug(drug, actor_id=ctx.account_id)
        return serialize_drug(store, drug)

    @app.put("/v1/admin/drugs/{drug_id}")
    async def update_drug(request: Request, drug_id: str):
        ctx = require(request, Permission.MANAGE_DRUGS)
        body = await read_body(request, DrugUpdateBody)
        drug = store.get_drug(drug_id)
        data = drug.to_dict()
        for field_name in (
            "name", "pharmaceutical_class", "generic_description",
            "strength", "adverse_reactions",
        ):
            value = getattr(body, field_name)
            if value is not None:
                data[field_name] = value
        if body.indications is not None:
            data["indications"] = sorted(set(body.indications))
        if body.substance_codes is not None:
            data["substance_codes"] = sorted(set(body.substance_codes))
        if body.active is not None:
            data["active"] = body.active
        updated = Drug.from_dict(data)
        store.put_drug(updated, actor_id=ctx.account_id)
        return serialize_drug(store, updated)

    @app.delete("/v1/admin/drugs/{drug_id}")
    async def deactivate_drug(request: Request, drug_id: str):
        ctx = require(request, Permission.MANAGE_DRUGS)
        drug = store.get_drug(drug_id)
        updated = Drug.from_dict(dict(drug.to_dict(), active=False))
        store.put_drug(updated, actor_id=ctx.account_id, detail={"event": "deactivate"})
        return serialize_drug(store, updated)

    # ------------------------------------------------------------------
    # admin: interaction rules

    @app.get("/v1/admin/interactions")
    async def list_interactions(request: Request):
        require(request, Permission.MANAGE_INTERACTIONS)
        return [serialize_rule(store, r) for r in store.list_rules()]

    @app.post("/v1/admin/interactions", status_code=201)
    async def upsert_interaction(request: Request):
        ctx = require(request, Permission.MANAGE_INTERACTIONS)
        body = await read_body(request, RuleBody)
        rule = InteractionRule.of(body.drug_a, body.drug_b, body.severity, body.note)
        store.put_rule(rule, actor_id=ctx.account_id)
        return serialize_rule(store, rule)

    @app.delete("/v1/admin/interactions/{drug_a}/{drug_b}")
    async def delete_interaction(request: Request, drug_a: str, drug_b: str):
        ctx = require(request, Permission.MANAGE_INTERACTIONS)
        store.delete_rule(drug_a, drug_b, actor_id=ctx.account_id)
        return {"status": "deleted"}

    # ------------------------------------------------------------------
    # clinical reference reads

    @app.get("/v1/patients")
    async def search_patients(request: Request, q: str | None = None):
        require(request, Permission.VIEW_PATIENT_RECORD)
        return [serialize_patient(p) for p in store.list_patients(q=q, active=True)]

    @app.get("/v1/patients/{patient_id}/record")
    async def patient_record(request: Request, patient_id: str):
        require(request, Permission.VIEW_PATIENT_RECORD)
        with store.snapshot() as snap:
            patient = snap.get_patient(patient_id)
            rxs = snap.list_prescriptions(patient_id=patient_id)
            return {
                "patient": serialize_patient(patient),
                "prescriptions": [serialize_prescription(snap, rx) for rx in rxs],
            }

    @app.get("/v1/drugs")
    async def search_drugs(request: Request, q: str | None = None, active: bool | None = True):
        require(request, Permission.VIEW_DRUG_DETAIL)
        return [serialize_drug(store, d) for d in store.list_drugs(q=q, active=active)]

    @app.get("/v1/drugs/{drug_id}")
    async def drug_detail(request: Request, drug_id: str):
        require(request, Permission.VIEW_DRUG_DETAIL)
        return serialize_drug(store, store.get_drug(drug_id))

    @app.get("/v1/diseases")
    async def list_diseases(request: Request):
        require(request, Permission.VIEW_DRUG_DETAIL)
        return [d.to_dict() for d in store.list_diseases()]

    @app.get("/v1/diseases/{disease_id}/suggested-drugs")
    async def suggested_drugs(request: Request, disease_id: str):
        require(request, Permission.VIEW_DRUG_DETAIL)
        with store.snapshot() as snap:
            suggestions = rules.suggest_drugs(
                disease_id,
                snap.drug_registry(),
                {d.id: d for d in snap.list_diseases()},
            )
            return [serialize_drug(snap, d) for d in suggestions]

    # ------------------------------------------------------------------
    # prescriptions

    @app.post("/v1/prescriptions", status_code=201)
    async def compose(request: Request):
        ctx = require(request, Permission.COMPOSE_RX)
        body = await read_body(request, ComposeBody)
        rx = workflow.compose(ctx, body.patient_id, body.diagnosis_id, items_of(body.items))
        return serialize_prescription(store, rx)

    @app.get("/v1/prescriptions")
    async def my_prescriptions(request: Request, status: str | None = None):
        ctx = require(request, Permission.COMPOSE_RX)
        status_filter = PrescriptionStatus(status) if status else None
        rxs = store.list_prescriptions(status=status_filter, prescriber_id=ctx.account_id)
        return [serialize_prescription(store, rx) for rx in rxs]

    @app.get("/v1/prescriptions/{rx_id}")
    async def prescription_detail(request: Request, rx_id: str):
        require(request, Permission.VIEW_PATIENT_RECORD)
        return serialize_prescription(store, store.get_prescription(rx_id))

    @app.get("/v1/prescriptions/{rx_id}/findings")
    async def preview_findings(request: Request, rx_id: str):
        ctx = require(request, Permission.COMPOSE_RX)
        findings = workflow.preview_findings(ctx, rx_id)
        return [f.to_dict() for f in findings]

    @app.put("/v1/prescriptions/{rx_id}")
    async def edit_draft(request: Request, rx_id: str):
        ctx = require(request, Permission.COMPOSE_RX)
        body = await read_body(request, EditBody)
        rx = workflow.edit_draft(ctx, rx_id, items_of(body.items), body.diagnosis_id)
        return serialize_prescription(store, rx)

    @app.post("/v1/prescriptions/{rx_id}/send")
    async def send(request: Request, rx_id: str):
        ctx = require(request, Permission.SEND_RX)
        body = await read_body(request, SendBody)
        overrides = [(o.finding_kind, o.reason) for o in body.overrides]
        rx = workflow.send(ctx, rx_id, overrides)
        return serialize_prescription(store, rx)

    @app.post("/v1/prescriptions/{rx_id}/cancel")
    async def cancel(request: Request, rx_id: str):
        ctx = require(request, Permission.CANCEL_RX)
        body = await read_body(request, CancelBody)
        rx = workflow.cancel(ctx, rx_id, body.reason)
        return serialize_prescription(store, rx)

    # ------------------------------------------------------------------
    # pharmacy

    @app.get("/v1/pharmacy/pending")
    async def pharmacy_pending(request: Request):
        ctx = require(request, Permission.LIST_PENDING)
        return [serialize_prescription(store, rx) for rx in workflow.list_pending(ctx)]

    @app.post("/v1/prescriptions/{rx_id}/acknowledge")
    async def acknowledge(request: Request, rx_id: str):
        ctx = require(request, Permission.ACKNOWLEDGE_RX)
        return serialize_prescription(store, workflow.acknowledge(ctx, rx_id))

    @app.post("/v1/prescriptions/{rx_id}/dispense")
    async def dispense(request: Request, rx_id: str):
        ctx = require(request, Permission.DISPENSE_RX)
        return serialize_prescription(store, workflow.dispense(ctx, rx_id))

    @app.get("/v1/prescriptions/{rx_id}/print")
    async def print_copy(request: Request, rx_id: str):
        ctx = require(request, Permission.PRINT_RX)
        document = workflow.print_copy(ctx, rx_id)
        return PlainTextResponse(document, media_type="text/plain; charset=utf-8")

    # ------------------------------------------------------------------
    # audit (administrators only: MANAGE_USERS is an admin-exclusive grant)

    @app.get("/v1/audit")
    async def audit_scan(request: Request, entity: str | None = None):
        require(request, Permission.MANAGE_USERS)
        return [e.to_dict() for e in store.audit_scan(entity_id=entity)]

    if ui_dir and os.path.isdir(ui_dir):
        app.mount("/", StaticFiles(directory=ui_dir, html=True), name="ui")

    return app


def build_app(config: ServiceConfig) -> FastAPI:
    """Wire the full service from configuration; used by the server runner."""
    store = Store(config.store_path)
    auth = AuthService(store, session_ttl=timedelta(minutes=config.session_ttl_minutes))
    workflow = PrescriptionWorkflow(store, duplicate_window_days=config.duplicate_window_days)
    return create_app(store, auth, workflow, ui_dir=config.ui_dir)
