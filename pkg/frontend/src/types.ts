/** Wire types mirroring the triage review API. */

export type Decision = "dismissed" | "elevated" | "unsure";
export type Status = "pending" | Decision;

export interface Gps {
  lat: number;
  lon: number;
}

/** One candidate as the server serialises it. */
export interface CandidateRecord {
  candidate_id: string;
  image_id: string;
  source: "rx" | "detect";
  region: [number, number, number, number];
  score: number | null;
  gps: Gps | null;
  status: Status;
  created_at: string;
}

/** A page of /api/candidates. */
export interface CandidatePage {
  candidates: CandidateRecord[];
  page: number;
  page_size: number;
  total: number;
}

export interface Stats {
  total: number;
  by_status: Record<string, number>;
  by_source: Record<string, number>;
  verdicts: number;
}

export interface VerdictBody {
  decision: Decision;
  reviewer?: string;
  notes?: string;
}

export interface ExportFeature {
  type: "Feature";
  geometry: { type: "Point"; coordinates: [number, number] };
  properties: Record<string, unknown>;
}

export interface ElevatedExport {
  type: "FeatureCollection";
  features: ExportFeature[];
  no_location: Record<string, unknown>[];
}

/** A record enriched with everything the queue view needs to render it. */
export interface CandidateView extends CandidateRecord {
  cropUrl: string;
  contextUrl: string;
  mapUrl: string | null;
}
