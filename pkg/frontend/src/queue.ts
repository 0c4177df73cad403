/** Review queue state machine, kept free of DOM so it is testable.
 *
 * Verdicts are applied optimistically and queued as submissions keyed by
 * a per-keypress nonce: a submission is POSTed at most once concurrently,
 * retried only after a network-level failure, and dropped (with rollback)
 * when the server rejects it. The candidate list itself always converges
 * to what the server reports.
 */

import { NetworkError, TriageClient } from "./api.js";
import type {
  CandidateRecord,
  CandidateView,
  Decision,
  Status,
} from "./types.js";

export type Action =
  | { kind: "verdict"; decision: Decision }
  | { kind: "move"; delta: 1 | -1 }
  | { kind: "toggle-context" }
  | { kind: "retry" };

export function keyToAction(key: string): Action | null {
  switch (key) {
    case "d":
    case "D":
      return { kind: "verdict", decision: "dismissed" };
    case "e":
    case "E":
      return { kind: "verdict", decision: "elevated" };
    case "u":
    case "U":
      return { kind: "verdict", decision: "unsure" };
    case "j":
    case "J":
    case "ArrowRight":
    case "ArrowDown":
      return { kind: "move", delta: 1 };
    case "k":
    case "K":
    case "ArrowLeft":
    case "ArrowUp":
      return { kind: "move", delta: -1 };
    case "c":
    case "C":
      return { kind: "toggle-context" };
    case "r":
    case "R":
      return { kind: "retry" };
    default:
      return null;
  }
}

export interface Toast {
  kind: "error" | "conflict";
  message: string;
}

interface Submission {
  nonce: string;
  candidateId: string;
  decision: Decision;
  previousStatus: Status;
  state: "queued" | "inflight";
}

const MAX_TOASTS = 5;

export class ReviewSession {
  candidates: CandidateView[] = [];
  cursor = 0;
  contextExpanded = false;
  toasts: Toast[] = [];
  onChange: () => void = () => {};

  private submissions = new Map<string, Submission>();
  private flushing = false;
  private nonceCounter = 0;

  constructor(
    private readonly client: TriageClient,
    private readonly reviewer: string = "",
  ) {}

  async load(): Promise<void> {
    const rows = await this.client.listAll({ status: "pending" });
    this.candidates = rows.map((row) => this.client.view(row));
    this.cursor = 0;
    this.notify();
  }

  get current(): CandidateView | null {
    return this.candidates[this.cursor] ?? null;
  }

  get progress(): { reviewed: number; total: number } {
    const reviewed = this.candidates.filter(
      (c) => c.status !== "pending",
    ).length;
    return { reviewed, total: this.candidates.length };
  }

  isUnsynced(candidateId: string): boolean {
    for (const sub of this.submissions.values()) {
      if (sub.candidateId === candidateId) return true;
    }
    return false;
  }

  get unsyncedCount(): number {
    return this.submissions.size;
  }

  handleKey(key: string): Promise<void> {
    const action = keyToAction(key);
    if (action === null) return Promise.resolve();
    switch (action.kind) {
      case "verdict":
        return this.submit(action.decision);
      case "move":
        this.move(action.delta);
        return Promise.resolve();
      case "toggle-context":
        this.contextExpanded = !this.contextExpanded;
        this.notify();
        return Promise.resolve();
      case "retry":
        return this.flush();
    }
  }

  /** Verdict for the current candidate: optimistic, nonce-deduped. */
  submit(decision: Decision): Promise<void> {
    const candidate = this.current;
    if (candidate === null) return Promise.resolve();
    for (const sub of this.submissions.values()) {
      if (
        sub.candidateId === candidate.candidate_id &&
        sub.decision === decision
      ) {
        return Promise.resolve(); // this exact verdict is already on its way
      }
    }
    this.nonceCounter += 1;
    const nonce = `${candidate.candidate_id}#${decision}#${this.nonceCounter}`;
    this.submissions.set(nonce, {
      nonce,
      candidateId: candidate.candidate_id,
      decision,
      previousStatus: candidate.status,
      state: "queued",
    });
    this.patchStatus(candidate.candidate_id, decision);
    this.advance();
    return this.flush();
  }

  /** Drain queued submissions; stops at the first network failure. */
  async flush(): Promise<void> {
    if (this.flushing) return;
    this.flushing = true;
    try {
      for (;;) {
        const sub = [...this.submissions.values()].find(
          (s) => s.state === "queued",
        );
        if (sub === undefined) break;
        sub.state = "inflight";
        try {
          const record = await this.client.submitVerdict(sub.candidateId, {
            decision: sub.decision,
            reviewer: this.reviewer,
          });
          this.submissions.delete(sub.nonce);
          this.adopt(record);
        } catch (error) {
          if (error instanceof NetworkError) {
            sub.state = "queued"; // keep for retry, badge stays unsynced
            break;
          }
          this.submissions.delete(sub.nonce);
          this.rollback(sub);
          this.toast(
            "error",
            `verdict rejected for ${sub.candidateId}: ${String(error)}`,
          );
        }
      }
    } finally {
      this.flushing = false;
      this.notify();
    }
  }

  /** Re-sync from the server; its state wins over anything synced. */
  async refresh(): Promise<void> {
    const rows = await this.client.listAll({});
    const remote = new Map(rows.map((row) => [row.candidate_id, row]));
    for (let i = 0; i < this.candidates.length; i += 1) {
      const local = this.candidates[i];
      if (local === undefined) continue;
      const row = remote.get(local.candidate_id);
      if (row === undefined || this.isUnsynced(local.candidate_id)) continue;
      if (row.status !== local.status) {
        this.toast(
          "conflict",
          `server status wins for ${local.candidate_id}: ${row.status}`,
        );
      }
      this.candidates[i] = this.client.view(row);
    }
    for (const row of rows) {
      if (row.status === "pending" && !this.byId(row.candidate_id)) {
        this.candidates.push(this.client.view(row));
      }
    }
    this.notify();
  }

  move(delta: 1 | -1): void {
    if (this.candidates.length === 0) return;
    const n = this.candidates.length;
    this.cursor = (this.cursor + delta + n) % n;
    this.notify();
  }

  private advance(): void {
    const n = this.candidates.length;
    for (let step = 1; step <= n; step += 1) {
      const idx = (this.cursor + step) % n;
      if (this.candidates[idx]?.status === "pending") {
        this.cursor = idx;
        this.notify();
        return;
      }
    }
    this.notify();
  }

  private byId(candidateId: string): CandidateView | undefined {
    return this.candidates.find((c) => c.candidate_id === candidateId);
  }

  private patchStatus(candidateId: string, status: Status): void {
    const candidate = this.byId(candidateId);
    if (candidate !== undefined) candidate.status = status;
    this.notify();
  }

  /** Server response for a synced verdict replaces the local record. */
  private adopt(record: CandidateRecord): void {
    const idx = this.candidates.findIndex(
      (c) => c.candidate_id === record.candidate_id,
    );
    if (idx < 0) return;
    const view = this.client.view(record);
    if (this.isUnsynced(record.candidate_id)) {
      // a later optimistic verdict is still queued; keep showing it
      const local = this.candidates[idx];
      if (local !== undefined) view.status = local.status;
    }
    this.candidates[idx] = view;
  }

  private rollback(sub: Submission): void {
    const candidate = this.byId(sub.candidateId);
    if (candidate !== undefined && candidate.status === sub.decision) {
      candidate.status = sub.previousStatus;
    }
  }

  private toast(kind: Toast["kind"], message: string): void {
    this.toasts.push({ kind, message });
    if (this.toasts.length > MAX_TOASTS) this.toasts.shift();
    this.notify();
  }

  private notify(): void {
    this.onChange();
  }
}
