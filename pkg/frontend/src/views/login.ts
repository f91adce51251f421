import { ApiClient, ApiError } from "../api.js";
import { clear, el } from "../dom.js";
import { StateStore, consoleForRole } from "../state.js";

export function renderLogin(root: HTMLElement, api: ApiClient, store: StateStore): void {
  const banner = el("div", { class: "banner error hidden", "data-testid": "login-error" });
  const license = el("input", {
    type: "text", name: "license_number", placeholder: "License number",
    "data-testid": "login-license", autocomplete: "username",
  });
  const password = el("input", {
    type: "password", name: "password", placeholder: "Password",
    "data-testid": "login-password", autocomplete: "current-password",
  });
  const submit = el("button", { type: "submit", class: "primary", "data-testid": "login-submit" }, "Sign in");

  const form = el(
    "form",
    {
      class: "login-card",
      onsubmit: (event: Event) => {
        event.preventDefault();
        banner.classList.add("hidden");
        submit.disabled = true;
        api
          .login(license.value.trim(), password.value)
          .then((session) => {
            store.set({ session, console: consoleForRole(session.role), notice: null });
          })
          .catch((error: unknown) => {
            // one message for every cause; the server does not say which
            banner.textContent =
              error instanceof ApiError && error.status === 401
                ? "Invalid credentials"
                : "Login failed, try again";
            banner.classList.remove("hidden");
          })
          .finally(() => {
            submit.disabled = false;
          });
      },
    },
    el("h1", {}, "RxTropic"),
    el("p", { class: "muted" }, "e-prescribing for tropical-disease care"),
    banner,
    el("label", {}, "License number", license),
    el("label", {}, "Password", password),
    submit,
  );

  clear(root).append(form);
}
