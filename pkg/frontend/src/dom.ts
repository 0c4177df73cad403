/** DOM rendering for the review queue. Pure function of session state so
 * a refresh (or a test) can rebuild the whole view from scratch. */

import type { ReviewSession } from "./queue.js";
import type { CandidateView } from "./types.js";

function el(
  tag: string,
  className: string,
  text?: string,
): HTMLElement {
  const node = document.createElement(tag);
  node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

function renderHeader(session: ReviewSession): HTMLElement {
  const { reviewed, total } = session.progress;
  const header = el("header", "header");
  const progress = el(
    "div",
    "progress",
    `reviewed ${reviewed} / ${total}`,
  );
  const bar = el("div", "progress-bar");
  const fill = el("div", "progress-fill");
  fill.style.width = total === 0 ? "0%" : `${(100 * reviewed) / total}%`;
  bar.appendChild(fill);
  header.appendChild(progress);
  header.appendChild(bar);
  if (session.unsyncedCount > 0) {
    header.appendChild(
      el("span", "badge badge-unsynced", `${session.unsyncedCount} unsynced`),
    );
  }
  header.appendChild(
    el("div", "help", "D dismiss / E elevate / U unsure / C context / R retry"),
  );
  return header;
}

function renderCandidate(
  session: ReviewSession,
  candidate: CandidateView,
): HTMLElement {
  const main = el("main", "candidate");
  const img = el("img", "crop") as HTMLImageElement;
  img.src = session.contextExpanded
    ? candidate.contextUrl
    : candidate.cropUrl;
  img.alt = `candidate ${candidate.candidate_id}`;
  main.appendChild(img);

  const meta = el("dl", "meta");
  const rows: [string, string][] = [
    ["candidate", candidate.candidate_id],
    ["image", candidate.image_id],
    ["source", candidate.source],
    ["region", candidate.region.join(", ")],
    ["score", candidate.score === null ? "n/a" : candidate.score.toFixed(3)],
    ["status", candidate.status],
  ];
  for (const [label, value] of rows) {
    meta.appendChild(el("dt", "meta-label", label));
    meta.appendChild(el("dd", "meta-value", value));
  }
  main.appendChild(meta);

  if (candidate.mapUrl !== null) {
    const link = el("a", "map-link", "open map") as HTMLAnchorElement;
    link.href = candidate.mapUrl;
    link.target = "_blank";
    link.rel = "noreferrer";
    main.appendChild(link);
  }
  if (session.isUnsynced(candidate.candidate_id)) {
    main.appendChild(el("span", "badge badge-unsynced", "unsynced"));
  }
  return main;
}

function renderQueueStrip(session: ReviewSession): HTMLElement {
  const strip = el("nav", "queue");
  session.candidates.forEach((candidate, idx) => {
    const item = el(
      "span",
      `queue-item${idx === session.cursor ? " queue-current" : ""}`,
      String(idx + 1),
    );
    item.dataset.status = candidate.status;
    strip.appendChild(item);
  });
  return strip;
}

export function render(session: ReviewSession, root: HTMLElement): void {
  root.textContent = "";
  root.appendChild(renderHeader(session));
  const candidate = session.current;
  if (candidate === null) {
    root.appendChild(
      el("main", "candidate empty", "No candidates to review."),
    );
  } else {
    root.appendChild(renderCandidate(session, candidate));
  }
  root.appendChild(renderQueueStrip(session));
  const toasts = el("div", "toasts");
  for (const toast of session.toasts) {
    toasts.appendChild(el("div", `toast toast-${toast.kind}`, toast.message));
  }
  root.appendChild(toasts);
}
