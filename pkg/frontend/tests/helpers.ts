/** Shared test utilities: waiting, DOM event helpers, canned-route fetch. */

export async function waitFor(
  check: () => boolean,
  timeoutMs = 5000,
  label = "condition",
): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  while (Date.now() < deadline) {
    if (check()) return;
    await new Promise((resolve) => setTimeout(resolve, 20));
  }
  throw new Error(`timed out waiting for ${label}`);
}

export function byTestId<T extends HTMLElement = HTMLElement>(
  root: ParentNode,
  id: string,
): T {
  const node = root.querySelector<T>(`[data-testid="${id}"]`);
  if (!node) throw new Error(`missing [data-testid=${id}]`);
  return node;
}

export function maybeByTestId<T extends HTMLElement = HTMLElement>(
  root: ParentNode,
  id: string,
): T | null {
  return root.querySelector<T>(`[data-testid="${id}"]`);
}

export function setValue(input: HTMLInputElement | HTMLSelectElement, value: string): void {
  input.value = value;
  input.dispatchEvent(new Event("input", { bubbles: true }));
  input.dispatchEvent(new Event("change", { bubbles: true }));
}

export function submit(form: HTMLFormElement): void {
  form.dispatchEvent(new Event("submit", { bubbles: true, cancelable: true }));
}

export type CannedResponse = { status: number; body?: unknown; text?: string };
export type RouteHandler = (init?: RequestInit) => CannedResponse;

/**
 * fetch double keyed by "METHOD /path?query". Unmatched routes 404 so a view
 * talking to an endpoint the test did not expect fails loudly.
 */
export function cannedFetch(routes: Record<string, RouteHandler>) {
  const calls: string[] = [];
  const impl = async (input: string, init?: RequestInit): Promise<Response> => {
    const key = `${(init?.method ?? "GET").toUpperCase()} ${input}`;
    calls.push(key);
    const handler = routes[key];
    if (!handler) {
      return new Response(
        JSON.stringify({ code: "NOT_FOUND", message: `no canned route for ${key}` }),
        { status: 404, headers: { "Content-Type": "application/json" } },
      );
    }
    const result = handler(init);
    if (result.text !== undefined) {
      return new Response(result.text, {
        status: result.status,
        headers: { "Content-Type": "text/plain" },
      });
    }
    return new Response(JSON.stringify(result.body ?? null), {
      status: result.status,
      headers: { "Content-Type": "application/json" },
    });
  };
  return { impl, calls };
}
