"""HTTP surface: auth gating on every route, error mapping, and the
serialized views the consoles consume."""

import pytest
from fastapi.testclient import TestClient

from rxtropic.api import create_app
from rxtropic.domain import Role

from conftest import PASSWORD


@pytest.fixture
def service(clinic):
    app = create_app(clinic.store, clinic.auth, clinic.wf)
    client = TestClient(app, raise_server_exceptions=False)

    class Service:
        pass

    s = Service()
    s.clinic = clinic
    s.client = client
    s.admin = clinic.admin()
    s.doctor = clinic.doctor()
    s.pharmacist = clinic.pharmacist()
    s.tokens = {}
    for acc in (s.admin, s.doctor, s.pharmacist):
        resp = client.post(
            "/v1/login",
            json={"license_number": acc.license_number, "password": PASSWORD},
        )
        s.tokens[acc.role] = resp.json()["token"]
    s.headers = {
        role: {"Authorization": f"Bearer {token}"} for role, token in s.tokens.items()
    }
    return s


# Each protected route, with the verb and a role the matrix allows.
PROTECTED_ROUTES = [
    ("GET", "/v1/admin/practitioners", Role.ADMINISTRATOR),
    ("POST", "/v1/admin/practitioners", Role.ADMINISTRATOR),
    ("GET", "/v1/admin/practitioners/x", Role.ADMINISTRATOR),
    ("PUT", "/v1/admin/practitioners/x", Role.ADMINISTRATOR),
    ("DELETE", "/v1/admin/practitioners/x", Role.ADMINISTRATOR),
    ("GET", "/v1/admin/patients", Role.ADMINISTRATOR),
    ("POST", "/v1/admin/patients", Role.ADMINISTRATOR),
    ("GET", "/v1/admin/patients/x", Role.ADMINISTRATOR),
    ("PUT", "/v1/admin/patients/x", Role.ADMINISTRATOR),
    ("DELETE", "/v1/admin/patients/x", Role.ADMINISTRATOR),
    ("GET", "/v1/admin/diseases", Role.ADMINISTRATOR),
    ("POST", "/v1/admin/diseases", Role.ADMINISTRATOR),
    ("PUT", "/v1/admin/diseases/x", Role.ADMINISTRATOR),
    ("DELETE", "/v1/admin/diseases/x", Role.ADMINISTRATOR),
    ("GET", "/v1/admin/drugs", Role.ADMINISTRATOR),
    ("POST", "/v1/admin/drugs", Role.ADMINISTRATOR),
    ("PUT", "/v1/admin/drugs/x", Role.ADMINISTRATOR),
    ("DELETE", "/v1/admin/drugs/x", Role.ADMINISTRATOR),
    ("GET", "/v1/admin/interactions", Role.ADMINISTRATOR),
    ("POST", "/v1/admin/interactions", Role.ADMINISTRATOR),
    ("DELETE", "/v1/admin/interactions/a/b", Role.ADMINISTRATOR),
    ("GET", "/v1/patients", Role.DOCTOR),
    ("GET", "/v1/patients/x/record", Role.DOCTOR),
    ("GET", "/v1/drugs", Role.DOCTOR),
    ("GET", "/v1/drugs/x", Role.PHARMACIST),
    ("GET", "/v1/diseases", Role.DOCTOR),
    ("GET", "/v1/diseases/x/suggested-drugs", Role.DOCTOR),
    ("POST", "/v1/prescriptions", Role.DOCTOR),
    ("GET", "/v1/prescriptions", Role.DOCTOR),
    ("GET", "/v1/prescriptions/x", Role.DOCTOR),
    ("GET", "/v1/prescriptions/x/findings", Role.DOCTOR),
    ("PUT", "/v1/prescriptions/x", Role.DOCTOR),
    ("POST", "/v1/prescriptions/x/send", Role.DOCTOR),
    ("POST", "/v1/prescriptions/x/cancel", Role.DOCTOR),
    ("GET", "/v1/pharmacy/pending", Role.PHARMACIST),
    ("POST", "/v1/prescriptions/x/acknowledge", Role.PHARMACIST),
    ("POST", "/v1/prescriptions/x/dispense", Role.PHARMACIST),
    ("GET", "/v1/prescriptions/x/print", Role.PHARMACIST),
    ("GET", "/v1/audit", Role.ADMINISTRATOR),
    ("POST", "/v1/password", Role.DOCTOR),
    ("POST", "/v1/logout", Role.DOCTOR),
]


class TestAuthGating:
    def test_healthz_is_open(self, service):
        resp = service.client.get("/healthz")
        assert resp.status_code == 200
        assert resp.json() == {"status": "ok"}

    @pytest.mark.parametrize("method,path,_role", PROTECTED_ROUTES)
    def test_every_route_401_without_token(self, service, method, path, _role):
        resp = service.client.request(method, path)
        assert resp.status_code == 401, f"{method} {path} -> {resp.status_code}"
        assert resp.json()["code"] in ("UNAUTHENTICATED",)

    @pytest.mark.parametrize("method,path,allowed_role", PROTECTED_ROUTES)
    def test_allowed_role_gets_past_auth(self, service, method, path, allowed_role):
        resp = service.client.request(
            method, path, headers=service.headers[allowed_role]
        )
        assert resp.status_code not in (401, 403), (
            f"{method} {path} as {allowed_role}: {resp.status_code} {resp.text}"
        )

    def test_garbage_token_is_401(self, service):
        resp = service.client.get(
            "/v1/patients", headers={"Authorization": "Bearer nonsense"}
        )
        assert resp.status_code == 401

    def test_wrong_role_is_403_with_code(self, service):
        resp = service.client.get(
            "/v1/pharmacy/pending", headers=service.headers[Role.DOCTOR]
        )
        assert resp.status_code == 403
        assert resp.json()["code"] == "FORBIDDEN"
        resp = service.client.post(
            "/v1/prescriptions", headers=service.headers[Role.PHARMACIST]
        )
        assert resp.status_code == 403


class TestLoginRoutes:
    def test_login_returns_token_and_role(self, service):
        resp = service.client.post(
            "/v1/login",
            json={"license_number": service.doctor.license_number, "password": PASSWORD},
        )
        body = resp.json()
        assert resp.status_code == 200
        assert body["role"] == "DOCTOR"
        assert body["full_name"] == service.doctor.full_name
        assert len(body["token"]) >= 32

    def test_bad_credentials_are_uniform_401(self, service):
        wrong_pw = service.client.post(
            "/v1/login",
            json={"license_number": service.doctor.license_number, "password": "nope-nope"},
        )
        unknown = service.client.post(
            "/v1/login", json={"license_number": "LIC-ghost", "password": "nope-nope"}
        )
        assert wrong_pw.status_code == unknown.status_code == 401
        assert wrong_pw.json()["code"] == unknown.json()["code"] == "INVALID_CREDENTIALS"

    def test_logout_then_token_dead(self, service):
        headers = service.headers[Role.DOCTOR]
        assert service.client.post("/v1/logout", headers=headers).status_code == 200
        assert service.client.get("/v1/patients", headers=headers).status_code == 401

    def test_password_change_flow(self, service):
        resp = service.client.post(
            "/v1/login",
            json={"license_number": service.doctor.license_number, "password": PASSWORD},
        )
        headers = {"Authorization": f"Bearer {resp.json()['token']}"}
        weak = service.client.post(
            "/v1/password",
            json={"old_password": PASSWORD, "new_password": "pw"},
            headers=headers,
        )
        assert weak.status_code == 422
        assert weak.json()["code"] == "WEAK_PASSWORD"
        ok = service.client.post(
            "/v1/password",
            json={"old_password": PASSWORD, "new_password": "new-password-9"},
            headers=headers,
        )
        assert ok.status_code == 200
        relogin = service.client.post(
            "/v1/login",
            json={
                "license_number": service.doctor.license_number,
                "password": "new-password-9",
            },
        )
        assert relogin.status_code == 200


class TestAdminCrud:
    def test_practitioner_lifecycle(self, service):
        headers = service.headers[Role.ADMINISTRATOR]
        created = service.client.post(
            "/v1/admin/practitioners",
            json={
                "full_name": "Dr New", "role": "DOCTOR",
                "license_number": "MD-NEW", "password": "docpassword1",
            },
            headers=headers,
        )
        assert created.status_code == 201
        body = created.json()
        assert "password" not in body and "password_digest" not in body

        dup = service.client.post(
            "/v1/admin/practitioners",
            json={
                "full_name": "Copycat", "role": "DOCTOR",
                "license_number": "md-new", "password": "docpassword1",
            },
            headers=headers,
        )
        assert dup.status_code == 409
        assert dup.json()["code"] == "UNIQUE_VIOLATION"

        gone = service.client.delete(
            f"/v1/admin/practitioners/{body['id']}", headers=headers
        )
        assert gone.status_code == 200 and gone.json()["active"] is False
        login = service.client.post(
            "/v1/login", json={"license_number": "MD-NEW", "password": "docpassword1"}
        )
        assert login.status_code == 401

    def test_deactivation_revokes_live_sessions(self, service):
        headers = service.headers[Role.ADMINISTRATOR]
        service.client.delete(
            f"/v1/admin/practitioners/{service.doctor.id}", headers=headers
        )
        resp = service.client.get("/v1/patients", headers=service.headers[Role.DOCTOR])
        assert resp.status_code == 401

    def test_patient_crud_and_weak_inputs(self, service):
        headers = service.headers[Role.ADMINISTRATOR]
        created = service.client.post(
            "/v1/admin/patients",
            json={
                "full_name": "Ngozi Okafor", "date_of_birth": "2001-07-29",
                "sex": "F", "allergies": ["penicillins"],
            },
            headers=headers,
        )
        assert created.status_code == 201
        pid = created.json()["id"]

        future = service.client.post(
            "/v1/admin/patients",
            json={"full_name": "Tomorrow", "date_of_birth": "2999-01-01", "sex": "M"},
            headers=headers,
        )
        assert future.status_code == 422
        assert future.json()["code"] == "VALIDATION"

        updated = service.client.put(
            f"/v1/admin/patients/{pid}",
            json={"allergies": ["penicillins", "macrolides"]},
            headers=headers,
        )
        assert sorted(updated.json()["allergies"]) == ["macrolides", "penicillins"]

        missing = service.client.get("/v1/admin/patients/ghost", headers=headers)
        assert missing.status_code == 404
        assert missing.json()["code"] == "UNKNOWN_PATIENT"

    def test_drug_disease_rule_crud(self, service):
        headers = service.headers[Role.ADMINISTRATOR]
        disease = service.client.post(
            "/v1/admin/diseases", json={"name": "Malaria"}, headers=headers
        ).json()
        drug_a = service.client.post(
            "/v1/admin/drugs",
            json={"name": "Alpha", "indications": [disease["id"]], "substance_codes": ["s1"]},
            headers=headers,
        ).json()
        drug_b = service.client.post(
            "/v1/admin/drugs", json={"name": "Beta"}, headers=headers
        ).json()

        bad_ref = service.client.post(
            "/v1/admin/drugs", json={"name": "Gamma", "indications": ["ghost"]},
            headers=headers,
        )
        assert bad_ref.status_code == 404
        assert bad_ref.json()["code"] == "UNKNOWN_DISEASE"

        rule = service.client.post(
            "/v1/admin/interactions",
            json={"drug_a": drug_a["id"], "drug_b": drug_b["id"], "severity": "MAJOR", "note": "n"},
            headers=headers,
        )
        assert rule.status_code == 201
        assert rule.json()["drug_a_name"] in ("Alpha", "Beta")

        listing = service.client.get("/v1/admin/interactions", headers=headers)
        assert len(listing.json()) == 1

        deleted = service.client.delete(
            f"/v1/admin/interactions/{drug_b['id']}/{drug_a['id']}", headers=headers
        )
        assert deleted.status_code == 200
        assert service.client.get("/v1/admin/interactions", headers=headers).json() == []

        drug_detail = service.client.get(
            f"/v1/drugs/{drug_a['id']}", headers=service.headers[Role.PHARMACIST]
        )
        assert drug_detail.status_code == 200
        assert drug_detail.json()["indications"] == [
            {"id": disease["id"], "name": "Malaria"}
        ]

    def test_referenced_disease_cannot_be_deleted(self, service):
        headers = service.headers[Role.ADMINISTRATOR]
        disease = service.client.post(
            "/v1/admin/diseases", json={"name": "Typhoid"}, headers=headers
        ).json()
        service.client.post(
            "/v1/admin/drugs", json={"name": "Cipro", "indications": [disease["id"]]},
            headers=headers,
        )
        resp = service.client.delete(
            f"/v1/admin/diseases/{disease['id']}", headers=headers
        )
        assert resp.status_code == 409
        lone = service.client.post(
            "/v1/admin/diseases", json={"name": "Lonely"}, headers=headers
        ).json()
        resp = service.client.delete(f"/v1/admin/diseases/{lone['id']}", headers=headers)
        assert resp.status_code == 200


class TestRobustness:
    def test_malformed_json_is_422_not_500(self, service):
        resp = service.client.post(
            "/v1/admin/patients",
            content=b"{not json",
            headers={**service.headers[Role.ADMINISTRATOR], "Content-Type": "application/json"},
        )
        assert resp.status_code == 422
        assert resp.json()["code"] == "VALIDATION"

    def test_wrong_field_types_are_422(self, service):
        resp = service.client.post(
            "/v1/admin/patients",
            json={"full_name": 5, "date_of_birth": "not-a-date", "sex": "X"},
            headers=service.headers[Role.ADMINISTRATOR],
        )
        assert resp.status_code == 422

    def test_fuzz_corpus_never_500(self, service):
        bodies = [None, {}, [], "string", 42, {"items": "x"}, {"overrides": 3}]
        for method, path, role in PROTECTED_ROUTES:
            for body in bodies:
                resp = service.client.request(
                    method, path, json=body, headers=service.headers[role]
                )
                assert resp.status_code < 500, f"{method} {path} body={body!r}"

    def test_repeated_reads_are_identical(self, service):
        headers = service.headers[Role.DOCTOR]
        service.clinic.add_patient(full_name="Stable One")
        first = service.client.get("/v1/patients", headers=headers)
        second = service.client.get("/v1/patients", headers=headers)
        assert first.json() == second.json()


class TestClinicalFlow:
    def seed(self, service):
        clinic = service.clinic
        disease = clinic.add_disease("Malaria")
        good = clinic.add_drug("Remedy", indications=(disease.id,))
        allergen = clinic.add_drug("Troubler", substances=("trouble",))
        patient = clinic.add_patient(full_name="Pat Example", allergies=("trouble",))
        return disease, good, allergen, patient

    def test_compose_preview_send_and_findings_bodies(self, service):
        disease, good, allergen, patient = self.seed(service)
        headers = service.headers[Role.DOCTOR]
        compose = service.client.post(
            "/v1/prescriptions",
            json={
                "patient_id": patient.id,
                "diagnosis_id": disease.id,
                "items": [
                    {"drug_id": allergen.id, "dose": "1", "frequency": "od", "duration_days": 3}
                ],
            },
            headers=headers,
        )
        assert compose.status_code == 201
        rx = compose.json()
        assert rx["status"] == "DRAFT"
        assert rx["items"][0]["drug_name"] == "Troubler"

        findings = service.client.get(
            f"/v1/prescriptions/{rx['id']}/findings", headers=headers
        )
        kinds = [f["kind"] for f in findings.json()]
        assert "ALLERGY" in kinds

        send = service.client.post(
            f"/v1/prescriptions/{rx['id']}/send", json={"overrides": []}, headers=headers
        )
        assert send.status_code == 409
        assert send.json()["code"] == "BLOCKED"
        assert any(f["severity"] == "BLOCK" for f in send.json()["findings"])

        edited = service.client.put(
            f"/v1/prescriptions/{rx['id']}",
            json={
                "diagnosis_id": disease.id,
                "items": [
                    {"drug_id": good.id, "dose": "1", "frequency": "od", "duration_days": 3}
                ],
            },
            headers=headers,
        )
        assert edited.status_code == 200
        sent = service.client.post(
            f"/v1/prescriptions/{rx['id']}/send", json={"overrides": []}, headers=headers
        )
        assert sent.status_code == 200
        assert sent.json()["status"] == "SENT"

    def test_overrides_required_body_lists_findings(self, service):
        disease, good, _, patient = self.seed(service)
        off_label = service.clinic.add_drug("OffLabel")
        headers = service.headers[Role.DOCTOR]
        rx = service.client.post(
            "/v1/prescriptions",
            json={
                "patient_id": patient.id,
                "diagnosis_id": disease.id,
                "items": [
                    {"drug_id": off_label.id, "dose": "1", "frequency": "od", "duration_days": 3}
                ],
            },
            headers=headers,
        ).json()
        resp = service.client.post(
            f"/v1/prescriptions/{rx['id']}/send", json={"overrides": []}, headers=headers
        )
        assert resp.status_code == 409
        assert resp.json()["code"] == "OVERRIDES_REQUIRED"
        assert [f["kind"] for f in resp.json()["findings"]] == ["INDICATION"]

        ok = service.client.post(
            f"/v1/prescriptions/{rx['id']}/send",
            json={"overrides": [{"finding_kind": "INDICATION", "reason": "documented"}]},
            headers=headers,
        )
        assert ok.status_code == 200
        assert ok.json()["overrides"][0]["finding_kind"] == "INDICATION"

    def test_pharmacy_flow_over_http(self, service):
        disease, good, _, patient = self.seed(service)
        doctor_headers = service.headers[Role.DOCTOR]
        pharmacist_headers = service.headers[Role.PHARMACIST]
        rx = service.client.post(
            "/v1/prescriptions",
            json={
                "patient_id": patient.id,
                "diagnosis_id": disease.id,
                "items": [
                    {"drug_id": good.id, "dose": "2 tab", "frequency": "bd", "duration_days": 5,
                     "instructions": "after food"}
                ],
            },
            headers=doctor_headers,
        ).json()
        service.client.post(
            f"/v1/prescriptions/{rx['id']}/send", json={}, headers=doctor_headers
        )

        pending = service.client.get("/v1/pharmacy/pending", headers=pharmacist_headers)
        assert [p["id"] for p in pending.json()] == [rx["id"]]
        assert pending.json()[0]["patient_name"] == "Pat Example"

        acked = service.client.post(
            f"/v1/prescriptions/{rx['id']}/acknowledge", headers=pharmacist_headers
        )
        assert acked.status_code == 200

        printed = service.client.get(
            f"/v1/prescriptions/{rx['id']}/print", headers=pharmacist_headers
        )
        assert printed.status_code == 200
        assert printed.headers["content-type"].startswith("text/plain")
        assert printed.text.startswith(f"RXTROPIC PRESCRIPTION {rx['id']}\n")
        assert "- Remedy | 2 tab | bd | 5d | after food" in printed.text

        done = service.client.post(
            f"/v1/prescriptions/{rx['id']}/dispense", headers=pharmacist_headers
        )
        assert done.json()["status"] == "DISPENSED"

        record = service.client.get(
            f"/v1/patients/{patient.id}/record", headers=doctor_headers
        )
        statuses = [p["status"] for p in record.json()["prescriptions"]]
        assert "DISPENSED" in statuses

    def test_suggested_drugs_route(self, service):
        disease, good, allergen, _ = self.seed(service)
        resp = service.client.get(
            f"/v1/diseases/{disease.id}/suggested-drugs",
            headers=service.headers[Role.DOCTOR],
        )
        assert [d["name"] for d in resp.json()] == ["Remedy"]

    def test_audit_route_admin_only_and_ordered(self, service):
        self.seed(service)
        admin = service.client.get("/v1/audit", headers=service.headers[Role.ADMINISTRATOR])
        assert admin.status_code == 200
        seqs = [e["seq"] for e in admin.json()]
        assert seqs == sorted(seqs)
        doctor = service.client.get("/v1/audit", headers=service.headers[Role.DOCTOR])
        assert doctor.status_code == 403
