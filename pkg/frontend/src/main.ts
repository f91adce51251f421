/**
 * App shell: boots the state store, routes to the console matching the
 * session role, and keeps the token in memory only (refresh = re-login).
 */

import { ApiClient } from "./api.js";
import { clear, el } from "./dom.js";
import { ConsoleName, StateStore, resolveConsole } from "./state.js";
import { renderAdmin } from "./views/admin.js";
import { renderDoctor } from "./views/doctor.js";
import { renderLogin } from "./views/login.js";
import { PharmacyView, renderPharmacy } from "./views/pharmacy.js";

export interface App {
  store: StateStore;
  api: ApiClient;
}

function consoleFromHash(hash: string): ConsoleName | null {
  const name = hash.replace(/^#\/?/, "");
  if (name === "admin" || name === "doctor" || name === "pharmacy") return name;
  return null;
}

export function bootApp(
  root: HTMLElement,
  api: ApiClient = new ApiClient(),
  pollIntervalMs = 5000,
): App {
  const store = new StateStore();
  let pharmacy: PharmacyView | null = null;

  function renderShell(content: HTMLElement): void {
    const state = store.get();
    clear(root);
    if (!state.session) {
      root.append(content);
      return;
    }
    root.append(
      el("header", { class: "topbar" },
        el("span", { class: "brand" }, "RxTropic"),
        el("span", { class: "muted", "data-testid": "whoami" },
          `${state.session.full_name} (${state.session.role})`),
        el("button", {
          class: "secondary",
          "data-testid": "logout-button",
          onclick: () => void api.logout().finally(() =>
            store.set({ session: null, console: "login", notice: null })),
        }, "Log out")),
      content,
    );
  }

  function render(): void {
    const state = store.get();
    if (pharmacy) {
      pharmacy.poller.stop();
      pharmacy = null;
    }
    const content = el("main", { class: "content", "data-testid": `console-${state.console}` });
    renderShell(content);
    switch (state.console) {
      case "login":
        renderLogin(content, api, store);
        break;
      case "admin":
        renderAdmin(content, api, store);
        break;
      case "doctor":
        renderDoctor(content, api, store);
        break;
      case "pharmacy":
        pharmacy = renderPharmacy(content, api, store, pollIntervalMs);
        break;
    }
  }

  store.subscribe(render);
  window.addEventListener("hashchange", () => {
    const requested = consoleFromHash(window.location.hash);
    const state = store.get();
    if (!requested) return;
    // Role gating here is cosmetic; the server enforces the real matrix.
    // Only re-render when the resolved console actually changes, so a
    // denied URL never wipes in-progress work.
    const resolved = resolveConsole(state.session, requested);
    if (resolved !== state.console) store.set({ console: resolved });
  });

  render();
  return { store, api };
}
