/**
 * Administrator console: registry CRUD for practitioners, patients, drugs,
 * diseases and interaction rules, plus the audit trail.
 */

import { ApiClient, ApiError, Disease, Drug } from "../api.js";
import { clear, el, option } from "../dom.js";
import { StateStore } from "../state.js";

type TabName = "practitioners" | "patients" | "drugs" | "diseases" | "interactions" | "audit";

export interface AdminView {
  open(tab: TabName): Promise<void>;
}

export function renderAdmin(root: HTMLElement, api: ApiClient, store: StateStore): AdminView {
  const banner = el("div", { class: "banner hidden", "data-testid": "admin-banner" });
  const content = el("div", { "data-testid": "admin-content" });
  let diseases: Disease[] = [];
  let drugs: Drug[] = [];

  function notify(text: string, isError = false): void {
    banner.textContent = text;
    banner.classList.toggle("error", isError);
    banner.classList.remove("hidden");
  }

  function onError(error: unknown): void {
    notify(error instanceof ApiError ? `${error.code}: ${error.message}` : String(error), true);
  }

  function field(name: string, placeholder: string, type = "text"): HTMLInputElement {
    return el("input", {
      type, name, placeholder, "data-testid": `field-${name}`,
    }) as HTMLInputElement;
  }

  async function openPractitioners(): Promise<void> {
    const accounts = await api.listPractitioners();
    const name = field("full_name", "Full name");
    const license = field("license_number", "License number");
    const password = field("password", "Initial password", "password");
    const role = el("select", { name: "role", "data-testid": "field-role" },
      option("DOCTOR", "Doctor"), option("PHARMACIST", "Pharmacist"),
      option("ADMINISTRATOR", "Administrator")) as HTMLSelectElement;
    const rows = accounts.map((account) =>
      el("tr", {},
        el("td", {}, account.full_name),
        el("td", {}, account.role),
        el("td", {}, account.license_number),
        el("td", {}, account.active ? "active" : "deactivated"),
        el("td", {}, el("button", {
          class: "danger",
          "data-testid": `deactivate-${account.license_number}`,
          onclick: () => void api.deactivatePractitioner(account.id)
            .then(() => openPractitioners()).catch(onError),
        }, "Deactivate"))));
    clear(content).append(
      el("h2", {}, "Practitioners"),
      el("form", {
        class: "row",
        "data-testid": "practitioner-form",
        onsubmit: (event: Event) => {
          event.preventDefault();
          void api.createPractitioner({
            full_name: name.value, role: role.value as "DOCTOR",
            license_number: license.value, password: password.value,
          }).then(() => {
            notify(`Created ${name.value}`);
            return openPractitioners();
          }).catch(onError);
        },
      }, name, role, license, password,
        el("button", { type: "submit", class: "primary" }, "Add user")),
      el("table", { class: "table" },
        el("thead", {}, el("tr", {},
          el("th", {}, "Name"), el("th", {}, "Role"), el("th", {}, "License"),
          el("th", {}, "Status"), el("th", {}, ""))),
        el("tbody", { "data-testid": "practitioner-rows" }, ...rows)),
    );
  }

  async function openPatients(): Promise<void> {
    const patients = await api.adminListPatients();
    const name = field("full_name", "Full name");
    const dob = field("date_of_birth", "YYYY-MM-DD");
    const allergies = field("allergies", "allergies (; separated)");
    const sex = el("select", { name: "sex", "data-testid": "field-sex" },
      option("F", "F"), option("M", "M"), option("OTHER", "Other")) as HTMLSelectElement;
    const rows = patients.map((patient) =>
      el("tr", {},
        el("td", {}, patient.full_name),
        el("td", {}, patient.date_of_birth),
        el("td", {}, patient.allergies.join("; ")),
        el("td", {}, patient.active ? "active" : "deactivated"),
        el("td", {}, el("button", {
          class: "danger",
          onclick: () => void api.deactivatePatient(patient.id)
            .then(() => openPatients()).catch(onError),
        }, "Deactivate"))));
    clear(content).append(
      el("h2", {}, "Patients"),
      el("form", {
        class: "row",
        "data-testid": "patient-form",
        onsubmit: (event: Event) => {
          event.preventDefault();
          void api.createPatient({
            full_name: name.value,
            date_of_birth: dob.value,
            sex: sex.value,
            allergies: allergies.value.split(";").map((s) => s.trim()).filter(Boolean),
          }).then(() => {
            notify(`Registered ${name.value}`);
            return openPatients();
          }).catch(onError);
        },
      }, name, dob, sex, allergies,
        el("button", { type: "submit", class: "primary" }, "Add patient")),
      el("table", { class: "table" },
        el("thead", {}, el("tr", {},
          el("th", {}, "Name"), el("th", {}, "DOB"), el("th", {}, "Allergies"),
          el("th", {}, "Status"), el("th", {}, ""))),
        el("tbody", { "data-testid": "patient-rows" }, ...rows)),
    );
  }

  async function openDiseases(): Promise<void> {
    diseases = await api.adminListDiseases();
    const name = field("name", "Disease name");
    const description = field("description", "Description");
    const rows = diseases.map((disease) =>
      el("tr", {}, el("td", {}, disease.name), el("td", {}, disease.description)));
    clear(content).append(
      el("h2", {}, "Diseases"),
      el("form", {
        class: "row",
        "data-testid": "disease-form",
        onsubmit: (event: Event) => {
          event.preventDefault();
          void api.createDisease({ name: name.value, description: description.value })
            .then(() => {
              notify(`Added ${name.value}`);
              return openDiseases();
            }).catch(onError);
        },
      }, name, description, el("button", { type: "submit", class: "primary" }, "Add disease")),
      el("table", { class: "table" },
        el("thead", {}, el("tr", {}, el("th", {}, "Name"), el("th", {}, "Description"))),
        el("tbody", { "data-testid": "disease-rows" }, ...rows)),
    );
  }

  async function openDrugs(): Promise<void> {
    [drugs, diseases] = await Promise.all([api.adminListDrugs(), api.adminListDiseases()]);
    const name = field("name", "Drug name");
    const klass = field("pharmaceutical_class", "Pharmaceutical class");
    const description = field("generic_description", "Generic description");
    const strength = field("strength", "Strength, e.g. 20mg/120mg tablet");
    const substances = field("substance_codes", "substance codes (; separated)");
    const adverse = field("adverse_reactions", "Adverse reactions");
    const indications = el("select", {
      name: "indications", multiple: true, "data-testid": "field-indications",
    }) as HTMLSelectElement;
    for (const disease of diseases) indications.append(option(disease.id, disease.name));
    const rows = drugs.map((drug) =>
      el("tr", {},
        el("td", {}, drug.name),
        el("td", {}, drug.pharmaceutical_class),
        el("td", {}, drug.indications.map((i) => i.name).join(", ")),
        el("td", {}, drug.substance_codes.join("; ")),
        el("td", {}, drug.active ? "active" : "deactivated"),
        el("td", {}, el("button", {
          class: "danger",
          onclick: () => void api.deactivateDrug(drug.id).then(() => openDrugs()).catch(onError),
        }, "Deactivate"))));
    clear(content).append(
      el("h2", {}, "Drug formulary"),
      el("form", {
        class: "grid-form",
        "data-testid": "drug-form",
        onsubmit: (event: Event) => {
          event.preventDefault();
          void api.createDrug({
            name: name.value,
            pharmaceutical_class: klass.value,
            generic_description: description.value,
            strength: strength.value,
            indications: [...indications.selectedOptions].map((o) => o.value),
            substance_codes: substances.value.split(";").map((s) => s.trim()).filter(Boolean),
            adverse_reactions: adverse.value,
          }).then(() => {
            notify(`Added ${name.value}`);
            return openDrugs();
          }).catch(onError);
        },
      }, name, klass, description, strength, indications, substances, adverse,
        el("button", { type: "submit", class: "primary" }, "Add drug")),
      el("table", { class: "table" },
        el("thead", {}, el("tr", {},
          el("th", {}, "Name"), el("th", {}, "Class"), el("th", {}, "Indications"),
          el("th", {}, "Substances"), el("th", {}, "Status"), el("th", {}, ""))),
        el("tbody", { "data-testid": "drug-rows" }, ...rows)),
    );
  }

  async function openInteractions(): Promise<void> {
    const [rules, formulary] = await Promise.all([api.listInteractions(), api.adminListDrugs()]);
    const drugA = el("select", { "data-testid": "field-drug-a" }) as HTMLSelectElement;
    const drugB = el("select", { "data-testid": "field-drug-b" }) as HTMLSelectElement;
    for (const drug of formulary) {
      drugA.append(option(drug.id, drug.name));
      drugB.append(option(drug.id, drug.name));
    }
    const severity = el("select", { "data-testid": "field-severity" },
      option("MAJOR", "MAJOR"), option("MODERATE", "MODERATE"),
      option("MINOR", "MINOR")) as HTMLSelectElement;
    const noteField = field("note", "Clinical note");
    const rows = rules.map((rule) =>
      el("tr", {},
        el("td", {}, `${rule.drug_a_name} + ${rule.drug_b_name}`),
        el("td", {}, rule.severity),
        el("td", {}, rule.note),
        el("td", {}, el("button", {
          class: "danger",
          onclick: () => void api.deleteInteraction(rule.drug_a, rule.drug_b)
            .then(() => openInteractions()).catch(onError),
        }, "Delete"))));
    clear(content).append(
      el("h2", {}, "Drug-drug interactions"),
      el("form", {
        class: "row",
        "data-testid": "interaction-form",
        onsubmit: (event: Event) => {
          event.preventDefault();
          void api.upsertInteraction({
            drug_a: drugA.value, drug_b: drugB.value,
            severity: severity.value, note: noteField.value,
          }).then(() => {
            notify("Interaction saved");
            return openInteractions();
          }).catch(onError);
        },
      }, drugA, drugB, severity, noteField,
        el("button", { type: "submit", class: "primary" }, "Save rule")),
      el("table", { class: "table" },
        el("thead", {}, el("tr", {},
          el("th", {}, "Pair"), el("th", {}, "Severity"),
          el("th", {}, "Note"), el("th", {}, ""))),
        el("tbody", { "data-testid": "interaction-rows" }, ...rows)),
    );
  }

  async function openAudit(): Promise<void> {
    const entries = await api.audit();
    const rows = entries.slice(-200).map((entry) =>
      el("tr", {},
        el("td", {}, String(entry.seq)),
        el("td", {}, entry.at),
        el("td", {}, entry.actor_id),
        el("td", {}, entry.action),
        el("td", {}, `${entry.entity_kind}/${entry.entity_id}`)));
    clear(content).append(
      el("h2", {}, "Audit trail"),
      el("table", { class: "table" },
        el("thead", {}, el("tr", {},
          el("th", {}, "Seq"), el("th", {}, "At"), el("th", {}, "Actor"),
          el("th", {}, "Action"), el("th", {}, "Entity"))),
        el("tbody", { "data-testid": "audit-rows" }, ...rows)),
    );
  }

  const tabs: Record<TabName, () => Promise<void>> = {
    practitioners: openPractitioners,
    patients: openPatients,
    drugs: openDrugs,
    diseases: openDiseases,
    interactions: openInteractions,
    audit: openAudit,
  };

  async function open(tab: TabName): Promise<void> {
    banner.classList.add("hidden");
    try {
      await tabs[tab]();
    } catch (error) {
      onError(error);
    }
  }

  const tabBar = el("nav", { class: "tabs" },
    ...Object.keys(tabs).map((tab) =>
      el("button", {
        class: "tab",
        "data-testid": `tab-${tab}`,
        onclick: () => void open(tab as TabName),
      }, tab)));

  clear(root).append(tabBar, banner, content);
  void open("practitioners");
  return { open };
}
