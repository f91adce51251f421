/**
 * View state: the session, which console is showing, and a transient notice.
 * The console shown always matches the session role; requesting another
 * console by URL is cosmetic only and falls back to the role's home.
 */

import type { Role, Session } from "./api.js";

export type ConsoleName = "login" | "admin" | "doctor" | "pharmacy";

export interface ViewState {
  session: Session | null;
  console: ConsoleName;
  notice: string | null;
}

export function consoleForRole(role: Role): ConsoleName {
  switch (role) {
    case "ADMINISTRATOR":
      return "admin";
    case "DOCTOR":
      return "doctor";
    case "PHARMACIST":
      return "pharmacy";
  }
}

export function resolveConsole(session: Session | null, requested: ConsoleName): ConsoleName {
  if (!session) return "login";
  const home = consoleForRole(session.role);
  return requested === home ? requested : home;
}

export class StateStore {
  private state: ViewState = { session: null, console: "login", notice: null };
  private listeners = new Set<(state: ViewState) => void>();

  get(): ViewState {
    return this.state;
  }

  set(partial: Partial<ViewState>): void {
    this.state = { ...this.state, ...partial };
    for (const listener of this.listeners) listener(this.state);
  }

  subscribe(listener: (state: ViewState) => void): () => void {
    this.listeners.add(listener);
    return () => this.listeners.delete(listener);
  }
}
