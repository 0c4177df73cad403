/** Typed client for the triage review API.
 *
 * The fetch implementation is injectable so tests can fake the network
 * and the retry queue can wrap it; everything else goes through these
 * methods, keeping the UI's server surface to exactly the documented
 * endpoints.
 */

import type {
  CandidatePage,
  CandidateRecord,
  CandidateView,
  ElevatedExport,
  Stats,
  Status,
  VerdictBody,
} from "./types.js";

export type FetchFn = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(public readonly status: number, detail: string) {
    super(`HTTP ${status}: ${detail}`);
    this.name = "ApiError";
  }
}

/** Thrown (or re-thrown) when the request never reached the server. */
export class NetworkError extends Error {
  constructor(cause: unknown) {
    super(`network failure: ${String(cause)}`);
    this.name = "NetworkError";
  }
}

const CONTEXT_DEFAULT_PX = 128;
const CONTEXT_EXPANDED_PX = 512;

export function mapUrl(record: CandidateRecord): string | null {
  if (record.gps === null) return null;
  const { lat, lon } = record.gps;
  return (
    `https://www.openstreetmap.org/?mlat=${lat}&mlon=${lon}` +
    `#map=16/${lat}/${lon}`
  );
}

export class TriageClient {
  constructor(
    private readonly baseUrl: string = "",
    private readonly fetchFn: FetchFn = (input, init) => fetch(input, init),
  ) {}

  private async request(path: string, init?: RequestInit): Promise<Response> {
    let response: Response;
    try {
      response = await this.fetchFn(this.baseUrl + path, init);
    } catch (cause) {
      throw new NetworkError(cause);
    }
    if (!response.ok) {
      let detail = response.statusText;
      try {
        const doc = await response.json();
        if (doc && typeof doc.detail === "string") detail = doc.detail;
      } catch {
        /* non-JSON error body; keep the status text */
      }
      throw new ApiError(response.status, detail);
    }
    return response;
  }

  private async getJson<T>(path: string): Promise<T> {
    return (await this.request(path)).json() as Promise<T>;
  }

  listCandidates(
    opts: {
      status?: Status;
      source?: string;
      page?: number;
      pageSize?: number;
    } = {},
  ): Promise<CandidatePage> {
    const params = new URLSearchParams();
    if (opts.status !== undefined) params.set("status", opts.status);
    if (opts.source !== undefined) params.set("source", opts.source);
    if (opts.page !== undefined) params.set("page", String(opts.page));
    if (opts.pageSize !== undefined)
      params.set("page_size", String(opts.pageSize));
    const query = params.toString();
    return this.getJson<CandidatePage>(
      `/api/candidates${query ? `?${query}` : ""}`,
    );
  }

  /** All candidates matching the filter, walking every page. */
  async listAll(
    opts: { status?: Status; pageSize?: number } = {},
  ): Promise<CandidateRecord[]> {
    const pageSize = opts.pageSize ?? 50;
    const rows: CandidateRecord[] = [];
    for (let page = 1; ; page += 1) {
      const doc = await this.listCandidates({
        status: opts.status,
        page,
        pageSize,
      });
      rows.push(...doc.candidates);
      if (rows.length >= doc.total || doc.candidates.length === 0) break;
    }
    return rows;
  }

  getCandidate(candidateId: string): Promise<CandidateRecord> {
    return this.getJson<CandidateRecord>(
      `/api/candidates/${encodeURIComponent(candidateId)}`,
    );
  }

  async submitVerdict(
    candidateId: string,
    body: VerdictBody,
  ): Promise<CandidateRecord> {
    const response = await this.request(
      `/api/candidates/${encodeURIComponent(candidateId)}/verdict`,
      {
        method: "POST",
        headers: { "content-type": "application/json" },
        body: JSON.stringify(body),
      },
    );
    return response.json() as Promise<CandidateRecord>;
  }

  stats(): Promise<Stats> {
    return this.getJson<Stats>("/api/stats");
  }

  exportElevated(): Promise<ElevatedExport> {
    return this.getJson<ElevatedExport>("/api/export/elevated");
  }

  cropUrl(candidateId: string, contextPx: number = CONTEXT_DEFAULT_PX): string {
    return (
      `${this.baseUrl}/api/candidates/` +
      `${encodeURIComponent(candidateId)}/crop?context=${contextPx}`
    );
  }

  /** Enrich a wire record with the URLs the queue view renders. */
  view(record: CandidateRecord): CandidateView {
    return {
      ...record,
      cropUrl: this.cropUrl(record.candidate_id),
      contextUrl: this.cropUrl(record.candidate_id, CONTEXT_EXPANDED_PX),
      mapUrl: mapUrl(record),
    };
  }
}
