/** End-to-end review flows against the real Python service. */

import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { TriageClient, type FetchFn } from "../src/api.js";
import { ReviewSession } from "../src/queue.js";
import { startSeededServer, type LiveServer } from "./server_harness.js";

describe("against a live seeded service", () => {
  let server: LiveServer;

  beforeAll(async () => {
    server = await startSeededServer();
  });

  afterAll(async () => {
    await server.stop();
  });

  it("keyboard-reviews all five candidates down to zero pending", async () => {
    const client = new TriageClient(server.baseUrl);
    const session = new ReviewSession(client, "e2e");
    await session.load();
    expect(session.candidates).toHaveLength(5);

    const keys = ["d", "e", "u", "d", "e"];
    for (const key of keys) {
      expect(session.current?.status).toBe("pending");
      await session.handleKey(key);
    }
    expect(session.unsyncedCount).toBe(0);
    expect(session.progress).toEqual({ reviewed: 5, total: 5 });

    const stats = await client.stats();
    expect(stats.by_status.pending).toBe(0);
    expect(stats.verdicts).toBe(5);
    expect(stats.total).toBe(5);
  });

  it("surfaces elevated GPS candidates in the export with a map link", async () => {
    const client = new TriageClient(server.baseUrl);
    const elevated = await client.listAll({ status: "elevated" });
    expect(elevated.length).toBeGreaterThan(0);
    const withGps = elevated.filter((record) => record.gps !== null);
    expect(withGps.length).toBeGreaterThan(0);
    for (const record of withGps) {
      expect(client.view(record).mapUrl).toContain("openstreetmap.org");
    }
    const exported = await client.exportElevated();
    const exportedIds = exported.features.map(
      (f) => f.properties["candidate_id"],
    );
    for (const record of withGps) {
      expect(exportedIds).toContain(record.candidate_id);
    }
  });

  it("serves the crop images the views point at", async () => {
    const client = new TriageClient(server.baseUrl);
    const [first] = await client.listAll({});
    expect(first).toBeDefined();
    const response = await fetch(client.view(first!).cropUrl);
    expect(response.status).toBe(200);
    expect(response.headers.get("content-type")).toBe("image/png");
  });
});

describe("offline retry against a live seeded service", () => {
  let server: LiveServer;

  beforeAll(async () => {
    server = await startSeededServer();
  });

  afterAll(async () => {
    await server.stop();
  });

  it("submits an offline verdict exactly once after reconnect", async () => {
    let failuresLeft = 1;
    const flaky: FetchFn = (input, init) => {
      if (init?.method === "POST" && failuresLeft > 0) {
        failuresLeft -= 1;
        return Promise.reject(new TypeError("fetch failed"));
      }
      return fetch(input, init);
    };
    const client = new TriageClient(server.baseUrl, flaky);
    const session = new ReviewSession(client, "e2e");
    await session.load();
    expect(session.candidates).toHaveLength(5);

    await session.handleKey("e"); // network drops this one
    expect(session.unsyncedCount).toBe(1);
    expect(session.candidates[0]?.status).toBe("elevated");
    let stats = await client.stats();
    expect(stats.verdicts).toBe(0);

    await session.handleKey("r"); // reconnect and retry
    expect(session.unsyncedCount).toBe(0);
    stats = await client.stats();
    expect(stats.verdicts).toBe(1);
    expect(stats.by_status.elevated).toBe(1);
    expect(stats.by_status.pending).toBe(4);

    await session.flush(); // nothing left to send
    stats = await client.stats();
    expect(stats.verdicts).toBe(1);
  });
});
