/**
 * Doctor console: patient search and record view, diagnosis selection, the
 * suggested-drug menu plus free formulary search (off-label additions are
 * flagged), findings preview, per-kind override reasons, send and cancel.
 *
 * Client-side gating here is advisory duplication only; the server remains
 * the sole validator and its 409 findings bodies are rendered inline.
 */

import {
  ApiClient,
  ApiError,
  Disease,
  Drug,
  Finding,
  FindingKind,
  Patient,
  PatientRecord,
  Prescription,
  PrescriptionItem,
} from "../api.js";
import { clear, el, option } from "../dom.js";
import { StateStore } from "../state.js";

interface ItemDraft {
  drug: Drug;
  dose: string;
  frequency: string;
  duration_days: number;
  instructions: string;
}

export interface DoctorView {
  refreshSuggestions(): Promise<void>;
}

export function renderDoctor(root: HTMLElement, api: ApiClient, store: StateStore): DoctorView {
  let patient: Patient | null = null;
  let record: PatientRecord | null = null;
  let diseases: Disease[] = [];
  let diagnosisId = "";
  let items: ItemDraft[] = [];
  let draft: Prescription | null = null;
  let draftDirty = false;
  let findings: Finding[] | null = null;

  const patientResults = el("div", { "data-testid": "patient-results" });
  const recordPanel = el("div", { class: "card hidden", "data-testid": "record-panel" });
  const diagnosisSelect = el("select", {
    "data-testid": "diagnosis-select",
    onchange: (event: Event) => {
      diagnosisId = (event.target as HTMLSelectElement).value;
      draftDirty = true;
      findings = null;
      void refreshSuggestions();
      renderCompose();
    },
  }) as HTMLSelectElement;
  const suggestedList = el("div", { "data-testid": "suggested-list" });
  const drugResults = el("div", { "data-testid": "drug-results" });
  const itemsBody = el("tbody", { "data-testid": "items-rows" });
  const findingsPanel = el("div", { "data-testid": "findings-panel" });
  const overridesPanel = el("div", { "data-testid": "overrides-panel" });
  const clientError = el("div", { class: "banner error hidden", "data-testid": "client-error" });
  const sendResult = el("div", { class: "banner hidden", "data-testid": "send-result" });
  const sendButton = el("button", {
    class: "primary",
    "data-testid": "send-button",
    onclick: () => void send(),
  }, "Send to pharmacy") as HTMLButtonElement;
  const blockedReason = el("div", { class: "error hidden", "data-testid": "send-blocked-reason" });
  const previewButton = el("button", {
    class: "secondary",
    "data-testid": "preview-button",
    onclick: () => void preview(),
  }, "Preview findings");
  const cancelButton = el("button", {
    class: "danger",
    "data-testid": "cancel-button",
    onclick: () => void cancelDraft(),
  }, "Cancel draft");

  function fail(error: unknown): void {
    clientError.textContent =
      error instanceof ApiError ? `${error.code}: ${error.message}` : String(error);
    clientError.classList.remove("hidden");
  }

  function note(text: string): void {
    sendResult.textContent = text;
    sendResult.classList.remove("hidden");
  }

  async function selectPatient(chosen: Patient): Promise<void> {
    patient = chosen;
    record = await api.patientRecord(chosen.id);
    draft = null;
    findings = null;
    items = [];
    renderRecord();
    renderCompose();
  }

  function renderRecord(): void {
    if (!record) return;
    const allergies = record.patient.allergies.length
      ? record.patient.allergies.map((a) =>
          el("span", { class: "chip warn", "data-testid": "allergy-chip" }, a))
      : [el("span", { class: "chip" }, "no known allergies")];
    const history = record.prescriptions.map((rx) =>
      el(
        "tr",
        {},
        el("td", {}, rx.status),
        el("td", {}, rx.items.map((i) => i.drug_name ?? i.drug_id).join(", ")),
        el("td", {}, rx.sent_at ?? "(not sent)"),
      ),
    );
    clear(recordPanel).append(
      el("h3", {}, `${record.patient.full_name} (DOB ${record.patient.date_of_birth})`),
      el("div", { class: "chips", "data-testid": "record-allergies" }, ...allergies),
      el("h4", {}, "Prescription history"),
      el("table", { class: "table" },
        el("thead", {}, el("tr", {},
          el("th", {}, "Status"), el("th", {}, "Drugs"), el("th", {}, "Sent"))),
        el("tbody", { "data-testid": "history-rows" }, ...history)),
    );
    recordPanel.classList.remove("hidden");
  }

  async function refreshSuggestions(): Promise<void> {
    clear(suggestedList);
    if (!diagnosisId) return;
    const suggested = await api.suggestedDrugs(diagnosisId);
    if (!suggested.length) {
      suggestedList.append(el("p", { class: "muted" }, "No formulary drugs indicated for this diagnosis"));
      return;
    }
    for (const drug of suggested) {
      suggestedList.append(
        el("button", {
          class: "secondary",
          "data-testid": `suggest-${drug.name}`,
          onclick: () => addItem(drug),
        }, `+ ${drug.name} ${drug.strength}`),
      );
    }
  }

  function addItem(drug: Drug): void {
    if (items.some((i) => i.drug.id === drug.id)) return;
    items.push({ drug, dose: "", frequency: "", duration_days: 1, instructions: "" });
    draftDirty = true;
    findings = null;
    renderCompose();
  }

  function offLabel(drug: Drug): boolean {
    return !!diagnosisId && !drug.indications.some((i) => i.id === diagnosisId);
  }

  async function searchDrugs(query: string): Promise<void> {
    const found = await api.searchDrugs(query);
    clear(drugResults);
    for (const drug of found) {
      drugResults.append(
        el(
          "div",
          { class: "result-row" },
          el("span", {}, `${drug.name} ${drug.strength}`),
          offLabel(drug)
            ? el("span", { class: "chip warn", "data-testid": "offlabel-warning" },
                "not indicated for selected diagnosis")
            : null,
          el("button", {
            class: "secondary",
            "data-testid": `add-${drug.name}`,
            onclick: () => addItem(drug),
          }, "Add"),
        ),
      );
    }
  }

  function itemInput(
    item: ItemDraft,
    field: "dose" | "frequency" | "instructions",
    placeholder: string,
  ): HTMLInputElement {
    return el("input", {
      type: "text",
      value: item[field],
      placeholder,
      "data-testid": `item-${field}-${item.drug.name}`,
      oninput: (event: Event) => {
        item[field] = (event.target as HTMLInputElement).value;
        draftDirty = true;
        findings = null;
      },
    }) as HTMLInputElement;
  }

  function renderItems(): void {
    clear(itemsBody);
    for (const item of items) {
      const days = el("input", {
        type: "number",
        min: "1",
        value: String(item.duration_days),
        "data-testid": `item-days-${item.drug.name}`,
        oninput: (event: Event) => {
          item.duration_days = Number((event.target as HTMLInputElement).value) || 0;
          draftDirty = true;
          findings = null;
        },
      });
      itemsBody.append(
        el(
          "tr",
          {},
          el("td", {},
            item.drug.name,
            offLabel(item.drug)
              ? el("span", { class: "chip warn", "data-testid": "offlabel-warning" }, " off-label")
              : null),
          el("td", {}, itemInput(item, "dose", "dose")),
          el("td", {}, itemInput(item, "frequency", "frequency")),
          el("td", {}, days),
          el("td", {}, itemInput(item, "instructions", "instructions")),
          el("td", {}, el("button", {
            class: "danger",
            "data-testid": `remove-${item.drug.name}`,
            onclick: () => {
              items = items.filter((i) => i !== item);
              draftDirty = true;
              findings = null;
              renderCompose();
            },
          }, "x")),
        ),
      );
    }
  }

  function wireItems(): PrescriptionItem[] {
    return items.map((item) => ({
      drug_id: item.drug.id,
      dose: item.dose,
      frequency: item.frequency,
      duration_days: item.duration_days,
      instructions: item.instructions,
    }));
  }

  async function syncDraft(): Promise<Prescription> {
    if (!patient) throw new Error("select a patient first");
    if (!diagnosisId) throw new Error("select a diagnosis first");
    if (!items.length) throw new Error("add at least one drug");
    if (draft && !draftDirty) return draft;
    if (draft) {
      draft = await api.editDraft(draft.id, { diagnosis_id: diagnosisId, items: wireItems() });
    } else {
      draft = await api.compose({
        patient_id: patient.id,
        diagnosis_id: diagnosisId,
        items: wireItems(),
      });
    }
    draftDirty = false;
    return draft;
  }

  async function preview(): Promise<void> {
    clientError.classList.add("hidden");
    sendResult.classList.add("hidden");
    try {
      const current = await syncDraft();
      findings = await api.findings(current.id);
      renderFindings();
    } catch (error) {
      fail(error);
    }
  }

  function renderFindings(): void {
    clear(findingsPanel);
    clear(overridesPanel);
    blockedReason.classList.add("hidden");
    if (findings === null) {
      sendButton.disabled = true;
      findingsPanel.append(el("p", { class: "muted" }, "Preview findings before sending."));
      return;
    }
    if (!findings.length) {
      findingsPanel.append(el("p", { class: "ok" }, "No findings; ready to send."));
      sendButton.disabled = false;
      return;
    }
    const list = el("ul", { class: "findings" });
    for (const finding of findings) {
      list.append(
        el("li", { class: finding.severity === "BLOCK" ? "finding block" : "finding warn",
                   "data-testid": `finding-${finding.kind}` },
          `[${finding.severity}] ${finding.kind}: ${finding.message}`),
      );
    }
    findingsPanel.append(list);

    const blocks = findings.filter((f) => f.severity === "BLOCK");
    if (blocks.length) {
      sendButton.disabled = true;
      blockedReason.textContent =
        "Sending is blocked: allergy conflicts cannot be overridden. Remove the conflicting drug.";
      blockedReason.classList.remove("hidden");
      return;
    }
    sendButton.disabled = false;
    const warnKinds = [...new Set(findings.filter((f) => f.severity === "WARN").map((f) => f.kind))];
    for (const kind of warnKinds) {
      overridesPanel.append(
        el("label", { class: "override" },
          `Override reason for ${kind}`,
          el("input", {
            type: "text",
            "data-override-kind": kind,
            "data-testid": `override-input-${kind}`,
            placeholder: "clinical justification (required)",
          })),
      );
    }
  }

  function collectOverrides(): { finding_kind: FindingKind; reason: string }[] | null {
    const inputs = overridesPanel.querySelectorAll<HTMLInputElement>("input[data-override-kind]");
    const overrides: { finding_kind: FindingKind; reason: string }[] = [];
    for (const input of inputs) {
      const reason = input.value.trim();
      if (!reason) {
        clientError.textContent =
          `Override reason for ${input.dataset.overrideKind} is required before sending.`;
        clientError.classList.remove("hidden");
        return null;
      }
      overrides.push({ finding_kind: input.dataset.overrideKind as FindingKind, reason });
    }
    return overrides;
  }

  async function send(): Promise<void> {
    clientError.classList.add("hidden");
    sendResult.classList.add("hidden");
    const overrides = collectOverrides();
    if (overrides === null) return;  // rejected client-side; server would too
    try {
      const current = await syncDraft();
      const sent = await api.send(current.id, overrides);
      note(`Prescription sent to pharmacy at ${sent.sent_at}`);
      draft = null;
      findings = null;
      items = [];
      renderCompose();
    } catch (error) {
      if (error instanceof ApiError && error.findings.length) {
        findings = error.findings;
        renderFindings();
        fail(error);
      } else {
        fail(error);
      }
    }
  }

  async function cancelDraft(): Promise<void> {
    if (!draft) return;
    try {
      await api.cancel(draft.id, "discarded by prescriber");
      note("Draft cancelled");
      draft = null;
      findings = null;
      items = [];
      renderCompose();
    } catch (error) {
      fail(error);
    }
  }

  function renderCompose(): void {
    renderItems();
    renderFindings();
    cancelButton.classList.toggle("hidden", draft === null);
  }

  const patientSearch = el("input", {
    type: "text",
    placeholder: "Search patients by name",
    "data-testid": "patient-search-input",
  }) as HTMLInputElement;
  const drugSearch = el("input", {
    type: "text",
    placeholder: "Search full formulary",
    "data-testid": "drug-search-input",
  }) as HTMLInputElement;

  clear(root).append(
    el("section", { class: "card" },
      el("h2", {}, "Find patient"),
      el("div", { class: "row" },
        patientSearch,
        el("button", {
          class: "secondary",
          "data-testid": "patient-search-button",
          onclick: () => void api.searchPatients(patientSearch.value).then((found) => {
            clear(patientResults);
            for (const candidate of found) {
              patientResults.append(
                el("button", {
                  class: "secondary",
                  "data-testid": `patient-${candidate.full_name}`,
                  onclick: () => void selectPatient(candidate),
                }, `${candidate.full_name} (${candidate.date_of_birth})`),
              );
            }
          }),
        }, "Search")),
      patientResults),
    recordPanel,
    el("section", { class: "card" },
      el("h2", {}, "Compose RX"),
      el("label", {}, "Diagnosis", diagnosisSelect),
      el("h4", {}, "Suggested for diagnosis"),
      suggestedList,
      el("div", { class: "row" },
        drugSearch,
        el("button", {
          class: "secondary",
          "data-testid": "drug-search-button",
          onclick: () => void searchDrugs(drugSearch.value),
        }, "Search")),
      drugResults,
      el("table", { class: "table" },
        el("thead", {}, el("tr", {},
          el("th", {}, "Drug"), el("th", {}, "Dose"), el("th", {}, "Frequency"),
          el("th", {}, "Days"), el("th", {}, "Instructions"), el("th", {}, ""))),
        itemsBody),
      el("div", { class: "actions" }, previewButton, sendButton, cancelButton),
      blockedReason,
      clientError,
      sendResult,
      findingsPanel,
      overridesPanel),
  );

  sendButton.disabled = true;
  cancelButton.classList.add("hidden");
  void api.listDiseases().then((list) => {
    diseases = list;
    diagnosisSelect.append(option("", "select diagnosis"));
    for (const disease of diseases) diagnosisSelect.append(option(disease.id, disease.name));
  });

  return { refreshSuggestions };
}
