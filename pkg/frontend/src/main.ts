/** Entry point: wires keyboard, focus refresh, and online retry. */

import { TriageClient } from "./api.js";
import { render } from "./dom.js";
import { ReviewSession } from "./queue.js";

interface KeySource {
  addEventListener(type: string, listener: (event: { key: string }) => void): void;
}

export function bindKeyboard(target: KeySource, session: ReviewSession): void {
  target.addEventListener("keydown", (event) => {
    void session.handleKey(event.key);
  });
}

export function boot(win: Window, root: HTMLElement): ReviewSession {
  const client = new TriageClient("");
  const session = new ReviewSession(client);
  session.onChange = () => render(session, root);
  bindKeyboard(win, session);
  win.addEventListener("focus", () => void session.refresh());
  win.addEventListener("online", () => void session.flush());
  void session.load();
  return session;
}

const root =
  typeof document === "undefined" ? null : document.getElementById("app");
if (root !== null) boot(window, root);
