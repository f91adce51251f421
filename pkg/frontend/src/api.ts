/**
 * Typed client for the /v1 JSON API. One method per endpoint; the server
 * stays the sole validator, so this layer only moves data and surfaces
 * ApiError (code + findings) for the views to render.
 */

export type Role = "ADMINISTRATOR" | "DOCTOR" | "PHARMACIST";
export type FindingKind = "ALLERGY" | "INTERACTION" | "INDICATION" | "DUPLICATE";
export type Severity = "BLOCK" | "WARN";
export type RxStatus = "DRAFT" | "SENT" | "ACKNOWLEDGED" | "DISPENSED" | "CANCELLED";

export interface Session {
  token: string;
  account_id: string;
  role: Role;
  full_name: string;
  expires_at: string;
}

export interface Finding {
  kind: FindingKind;
  severity: Severity;
  message: string;
  subject_drug_ids: string[];
}

export interface Practitioner {
  id: string;
  full_name: string;
  role: Role;
  license_number: string;
  active: boolean;
  created_at: string;
}

export interface Patient {
  id: string;
  full_name: string;
  date_of_birth: string;
  sex: string;
  allergies: string[];
  active: boolean;
}

export interface Disease {
  id: string;
  name: string;
  description: string;
}

export interface Drug {
  id: string;
  name: string;
  pharmaceutical_class: string;
  generic_description: string;
  strength: string;
  indications: { id: string; name: string }[];
  substance_codes: string[];
  adverse_reactions: string;
  active: boolean;
}

export interface InteractionRule {
  drug_a: string;
  drug_b: string;
  drug_a_name: string;
  drug_b_name: string;
  severity: "MAJOR" | "MODERATE" | "MINOR";
  note: string;
}

export interface PrescriptionItem {
  drug_id: string;
  drug_name?: string;
  dose: string;
  frequency: string;
  duration_days: number;
  instructions: string;
}

export interface Prescription {
  id: string;
  patient_id: string;
  patient_name: string;
  prescriber_id: string;
  prescriber_name: string;
  diagnosis_id: string;
  diagnosis_name: string;
  status: RxStatus;
  items: PrescriptionItem[];
  overrides: { finding_kind: FindingKind; reason: string; actor_id: string; at: string }[];
  created_at: string;
  sent_at: string | null;
  acknowledged_at: string | null;
  dispensed_at: string | null;
  cancelled_at: string | null;
  pharmacist_id: string | null;
}

export interface PatientRecord {
  patient: Patient;
  prescriptions: Prescription[];
}

export interface AuditEntry {
  seq: number;
  at: string;
  actor_id: string;
  action: string;
  entity_kind: string;
  entity_id: string;
  detail: Record<string, unknown>;
}

export interface OverrideInput {
  finding_kind: FindingKind;
  reason: string;
}

export class ApiError extends Error {
  constructor(
    public status: number,
    public code: string,
    message: string,
    public findings: Finding[] = [],
  ) {
    super(message);
    this.name = "ApiError";
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  /** Bearer token, held in memory only; a page refresh requires re-login. */
  token: string | null = null;

  constructor(
    private baseUrl: string = "",
    private fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request<T>(
    method: string,
    path: string,
    body?: unknown,
    asText = false,
  ): Promise<T> {
    const headers: Record<string, string> = {};
    if (this.token) headers["Authorization"] = `Bearer ${this.token}`;
    if (body !== undefined) headers["Content-Type"] = "application/json";
    const response = await this.fetchImpl(this.baseUrl + path, {
      method,
      headers,
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    if (!response.ok) {
      let code = "ERROR";
      let message = response.statusText;
      let findings: Finding[] = [];
      try {
        const payload = await response.json();
        code = payload.code ?? code;
        message = payload.message ?? message;
        findings = payload.findings ?? [];
      } catch {
        /* non-JSON error body */
      }
      throw new ApiError(response.status, code, message, findings);
    }
    if (asText) return (await response.text()) as T;
    return (await response.json()) as T;
  }

  // auth ---------------------------------------------------------------
  async login(licenseNumber: string, password: string): Promise<Session> {
    const session = await this.request<Session>("POST", "/v1/login", {
      license_number: licenseNumber,
      password,
    });
    this.token = session.token;
    return session;
  }

  async logout(): Promise<void> {
    if (!this.token) return;
    try {
      await this.request("POST", "/v1/logout", {});
    } finally {
      this.token = null;
    }
  }

  changePassword(oldPassword: string, newPassword: string): Promise<unknown> {
    return this.request("POST", "/v1/password", {
      old_password: oldPassword,
      new_password: newPassword,
    });
  }

  // admin CRUD ----------------------------------------------------------
  listPractitioners(): Promise<Practitioner[]> {
    return this.request("GET", "/v1/admin/practitioners");
  }

  createPractitioner(body: {
    full_name: string;
    role: Role;
    license_number: string;
    password: string;
  }): Promise<Practitioner> {
    return this.request("POST", "/v1/admin/practitioners", body);
  }

  deactivatePractitioner(id: string): Promise<Practitioner> {
    return this.request("DELETE", `/v1/admin/practitioners/${id}`);
  }

  adminListPatients(): Promise<Patient[]> {
    return this.request("GET", "/v1/admin/patients");
  }

  createPatient(body: {
    full_name: string;
    date_of_birth: string;
    sex: string;
    allergies: string[];
  }): Promise<Patient> {
    return this.request("POST", "/v1/admin/patients", body);
  }

  updatePatient(id: string, body: Partial<{ allergies: string[]; active: boolean }>): Promise<Patient> {
    return this.request("PUT", `/v1/admin/patients/${id}`, body);
  }

  deactivatePatient(id: string): Promise<Patient> {
    return this.request("DELETE", `/v1/admin/patients/${id}`);
  }

  adminListDiseases(): Promise<Disease[]> {
    return this.request("GET", "/v1/admin/diseases");
  }

  createDisease(body: { name: string; description: string }): Promise<Disease> {
    return this.request("POST", "/v1/admin/diseases", body);
  }

  adminListDrugs(): Promise<Drug[]> {
    return this.request("GET", "/v1/admin/drugs");
  }

  createDrug(body: {
    name: string;
    pharmaceutical_class: string;
    generic_description: string;
    strength: string;
    indications: string[];
    substance_codes: string[];
    adverse_reactions: string;
  }): Promise<Drug> {
    return this.request("POST", "/v1/admin/drugs", body);
  }

  deactivateDrug(id: string): Promise<Drug> {
    return this.request("DELETE", `/v1/admin/drugs/${id}`);
  }

  listInteractions(): Promise<InteractionRule[]> {
    return this.request("GET", "/v1/admin/interactions");
  }

  upsertInteraction(body: {
    drug_a: string;
    drug_b: string;
    severity: string;
    note: string;
  }): Promise<InteractionRule> {
    return this.request("POST", "/v1/admin/interactions", body);
  }

  deleteInteraction(drugA: string, drugB: string): Promise<unknown> {
    return this.request("DELETE", `/v1/admin/interactions/${drugA}/${drugB}`);
  }

  audit(entity?: string): Promise<AuditEntry[]> {
    const query = entity ? `?entity=${encodeURIComponent(entity)}` : "";
    return this.request("GET", `/v1/audit${query}`);
  }

  // clinical reference ---------------------------------------------------
  searchPatients(q: string): Promise<Patient[]> {
    return this.request("GET", `/v1/patients?q=${encodeURIComponent(q)}`);
  }

  patientRecord(id: string): Promise<PatientRecord> {
    return this.request("GET", `/v1/patients/${id}/record`);
  }

  listDiseases(): Promise<Disease[]> {
    return this.request("GET", "/v1/diseases");
  }

  searchDrugs(q: string): Promise<Drug[]> {
    return this.request("GET", `/v1/drugs?q=${encodeURIComponent(q)}`);
  }

  drugDetail(id: string): Promise<Drug> {
    return this.request("GET", `/v1/drugs/${id}`);
  }

  suggestedDrugs(diseaseId: string): Promise<Drug[]> {
    return this.request("GET", `/v1/diseases/${diseaseId}/suggested-drugs`);
  }

  // prescriptions ---------------------------------------------------------
  compose(body: {
    patient_id: string;
    diagnosis_id: string;
    items: PrescriptionItem[];
  }): Promise<Prescription> {
    return this.request("POST", "/v1/prescriptions", body);
  }

  findings(rxId: string): Promise<Finding[]> {
    return this.request("GET", `/v1/prescriptions/${rxId}/findings`);
  }

  editDraft(rxId: string, body: {
    diagnosis_id: string;
    items: PrescriptionItem[];
  }): Promise<Prescription> {
    return this.request("PUT", `/v1/prescriptions/${rxId}`, body);
  }

  send(rxId: string, overrides: OverrideInput[]): Promise<Prescription> {
    return this.request("POST", `/v1/prescriptions/${rxId}/send`, { overrides });
  }

  cancel(rxId: string, reason: string): Promise<Prescription> {
    return this.request("POST", `/v1/prescriptions/${rxId}/cancel`, { reason });
  }

  pending(): Promise<Prescription[]> {
    return this.request("GET", "/v1/pharmacy/pending");
  }

  acknowledge(rxId: string): Promise<Prescription> {
    return this.request("POST", `/v1/prescriptions/${rxId}/acknowledge`, {});
  }

  dispense(rxId: string): Promise<Prescription> {
    return this.request("POST", `/v1/prescriptions/${rxId}/dispense`, {});
  }

  printCopy(rxId: string): Promise<string> {
    return this.request("GET", `/v1/prescriptions/${rxId}/print`, undefined, true);
  }
}
