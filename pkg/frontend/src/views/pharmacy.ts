/**
 * Pharmacist console: the FIFO pending queue (polled), prescription detail
 * with drug information, acknowledge, dispense, and the printable copy.
 */

import { ApiClient, ApiError, Prescription } from "../api.js";
import { clear, el } from "../dom.js";
import { Poller, startPolling } from "../poller.js";
import { StateStore } from "../state.js";

export interface PharmacyView {
  poller: Poller;
  refresh(): Promise<void>;
}

export function renderPharmacy(
  root: HTMLElement,
  api: ApiClient,
  store: StateStore,
  pollIntervalMs = 5000,
): PharmacyView {
  const notice = el("div", { class: "banner hidden", "data-testid": "pharmacy-notice" });
  const queueBody = el("tbody", { "data-testid": "pending-rows" });
  const mineBody = el("tbody", { "data-testid": "mine-rows" });
  const detail = el("div", { class: "card hidden", "data-testid": "rx-detail" });

  const session = store.get().session;
  const myId = session ? session.account_id : "";

  function showNotice(text: string): void {
    notice.textContent = text;
    notice.classList.remove("hidden");
  }

  function renderDocument(text: string): void {
    clear(detail).append(
      el("h3", {}, "Printed copy"),
      el("pre", { "data-testid": "print-document", class: "print-document" }, text),
      el("button", { class: "secondary", onclick: () => window.print() }, "Print via browser"),
    );
    detail.classList.remove("hidden");
  }

  async function openDetail(rx: Prescription): Promise<void> {
    const drugCards = await Promise.all(
      rx.items.map(async (item) => {
        const drug = await api.drugDetail(item.drug_id);
        return el(
          "div",
          { class: "drug-detail" },
          el("strong", {}, drug.name),
          el("div", {}, `Class: ${drug.pharmaceutical_class || "-"}`),
          el("div", {}, `Description: ${drug.generic_description || "-"}`),
          el(
            "div",
            {},
            `Indications: ${drug.indications.map((i) => i.name).join(", ") || "-"}`,
          ),
          el("div", {}, `Adverse reactions: ${drug.adverse_reactions || "-"}`),
          el("div", {}, `Ordered: ${item.dose}, ${item.frequency}, ${item.duration_days} days`),
        );
      }),
    );
    const actions = el("div", { class: "actions" });
    if (rx.status === "SENT") {
      actions.append(
        el("button", {
          class: "primary",
          "data-testid": "acknowledge-button",
          onclick: () => void acknowledge(rx),
        }, "Acknowledge"),
      );
    }
    if (rx.status === "ACKNOWLEDGED" && rx.pharmacist_id === myId) {
      actions.append(
        el("button", {
          class: "primary",
          "data-testid": "dispense-button",
          onclick: () => void dispense(rx),
        }, "Dispense"),
      );
    }
    if (rx.status !== "DRAFT" && rx.status !== "CANCELLED") {
      actions.append(
        el("button", {
          class: "secondary",
          "data-testid": "print-button",
          onclick: () => void api.printCopy(rx.id).then(renderDocument),
        }, "Print copy"),
      );
    }
    clear(detail).append(
      el("h3", {}, `Prescription for ${rx.patient_name}`),
      el("div", {}, `Status: ${rx.status}`),
      el("div", {}, `Prescriber: ${rx.prescriber_name}`),
      el("div", {}, `Diagnosis: ${rx.diagnosis_name}`),
      ...drugCards,
      actions,
    );
    detail.classList.remove("hidden");
  }

  async function acknowledge(rx: Prescription): Promise<void> {
    try {
      await api.acknowledge(rx.id);
      showNotice(`Acknowledged prescription for ${rx.patient_name}`);
    } catch (error) {
      if (error instanceof ApiError && error.status === 409) {
        showNotice("Another pharmacist already claimed this prescription");
      } else {
        showNotice("Acknowledge failed");
      }
    }
    await refresh();
    detail.classList.add("hidden");
  }

  async function dispense(rx: Prescription): Promise<void> {
    try {
      await api.dispense(rx.id);
      showNotice(`Dispensed prescription for ${rx.patient_name}`);
    } catch (error) {
      showNotice(error instanceof ApiError ? error.message : "Dispense failed");
    }
    await refresh();
    detail.classList.add("hidden");
  }

  function row(rx: Prescription): HTMLTableRowElement {
    return el(
      "tr",
      { "data-rx-id": rx.id },
      el("td", {}, rx.patient_name),
      el("td", {}, rx.items.map((i) => i.drug_name ?? i.drug_id).join(", ")),
      el("td", {}, rx.sent_at ?? ""),
      el("td", {}, el("button", {
        class: "secondary",
        "data-testid": `open-${rx.id}`,
        onclick: () => void openDetail(rx),
      }, "Open")),
    );
  }

  async function refresh(): Promise<void> {
    const queue = await api.pending();
    clear(queueBody);
    clear(mineBody);
    for (const rx of queue) {
      if (rx.status === "SENT") queueBody.append(row(rx));
      else mineBody.append(row(rx));
    }
  }

  clear(root).append(
    notice,
    el(
      "section",
      { class: "card" },
      el("h2", {}, "Pending prescriptions"),
      el(
        "table",
        { class: "table" },
        el("thead", {}, el("tr", {},
          el("th", {}, "Patient"), el("th", {}, "Drugs"),
          el("th", {}, "Sent"), el("th", {}, ""))),
        queueBody,
      ),
    ),
    el(
      "section",
      { class: "card" },
      el("h2", {}, "Mine (acknowledged)"),
      el("table", { class: "table" },
        el("thead", {}, el("tr", {},
          el("th", {}, "Patient"), el("th", {}, "Drugs"),
          el("th", {}, "Sent"), el("th", {}, ""))),
        mineBody),
    ),
    detail,
  );

  const poller = startPolling(refresh, pollIntervalMs);
  return { poller, refresh };
}
