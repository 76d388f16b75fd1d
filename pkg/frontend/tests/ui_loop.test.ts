/** End-to-end loop against the real ranking service.
 *
 * Spawns the Python service on a synthetic corpus with a freshly trained
 * checkpoint, drives the real UI (jsdom DOM + real fetch): query ->
 * sentence click -> re-rendered slate.  Verifies the rendered order is
 * exactly the service's response and the rank-change arrows match the
 * recomputed rank deltas.
 */

import { execFileSync, spawn, type ChildProcess } from "node:child_process";
import { mkdtempSync, readFileSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ApiClient } from "../src/api";
import { App } from "../src/app";
import { arrowFor, computeRankDeltas } from "../src/rank";
import type {
  FeedbackResponse,
  SessionResponse,
} from "../src/types";

const PORT = 8931;
const BASE = `http://127.0.0.1:${PORT}`;

let service: ChildProcess | null = null;
let queryText = "";

/** ApiClient that also records every raw response it saw. */
class RecordingClient extends ApiClient {
  readonly sessions: SessionResponse[] = [];
  readonly feedbacks: FeedbackResponse[] = [];

  override async createSession(query: string): Promise<SessionResponse> {
    const res = await super.createSession(query);
    this.sessions.push(res);
    return res;
  }

  override async sendFeedback(
    sessionId: string,
    docId: string,
    sentenceIdx: number,
  ): Promise<FeedbackResponse> {
    const res = await super.sendFeedback(sessionId, docId, sentenceIdx);
    this.feedbacks.push(res);
    return res;
  }
}

async function waitForService(): Promise<void> {
  for (let attempt = 0; attempt < 100; attempt += 1) {
    try {
      const res = await fetch(`${BASE}/api/healthz`);
      if (res.ok) return;
    } catch {
      /* not up yet */
    }
    await new Promise((resolve) => setTimeout(resolve, 300));
  }
  throw new Error("service did not become healthy");
}

beforeAll(async () => {
  const work = mkdtempSync(join(tmpdir(), "sentrank-ui-"));
  const data = join(work, "data");
  const run = join(work, "run");
  const cfg = join(work, "cfg.json");
  writeFileSync(
    cfg,
    JSON.stringify({
      episodes: 6,
      steps_per_episode: 5,
      pretrain_epochs: 100,
      seed: 0,
    }),
  );
  execFileSync("python3", ["-m", "sentrank.cli", "synth", "--seed", "7",
                           "--out", data]);
  queryText = readFileSync(join(data, "queries.tsv"), "utf-8")
    .split("\n")[0]
    .split("\t")[1];
  execFileSync("python3", [
    "-m", "sentrank.cli", "train",
    "--corpus", join(data, "corpus.jsonl"),
    "--queries", join(data, "queries.tsv"),
    "--qrels", join(data, "qrels.tsv"),
    "--ranking-log", join(data, "wq.jsonl"),
    "--lexicon", join(data, "lexicon.tsv"),
    "--stopwords", join(data, "stopwords.txt"),
    "--config", cfg,
    "--out", run,
  ], { timeout: 300000 });
  service = spawn("python3", [
    "-m", "sentrank.cli", "serve",
    "--corpus", join(data, "corpus.jsonl"),
    "--checkpoint", join(run, "checkpoint.json"),
    "--qrels", join(data, "qrels.tsv"),
    "--port", String(PORT),
  ], { stdio: "ignore" });
  await waitForService();
}, 400000);

afterAll(() => {
  service?.kill("SIGTERM");
});

function renderedOrder(root: HTMLElement): string[] {
  return [...root.querySelectorAll<HTMLElement>("[data-testid=result-card]")]
    .map((card) => card.dataset.docId!);
}

describe("live UI loop", () => {
  it("query -> sentence click -> re-rendered slate with correct arrows",
     async () => {
    document.body.innerHTML = "<div id='app'></div>";
    const root = document.getElementById("app")!;
    const api = new RecordingClient(BASE);
    const app = new App(root, api);

    await app.startSearch(queryText);
    expect(api.sessions).toHaveLength(1);
    const initial = api.sessions[0];
    const before = renderedOrder(root);
    expect(before).toEqual(initial.results.map((r) => r.doc_id));
    expect(before.length).toBeGreaterThan(0);

    // Click the representative sentence of the top result.
    const top = initial.results[0];
    const sentence = root.querySelector<HTMLElement>(
      `[data-doc-id=${top.doc_id}] ` +
        `[data-sentence-idx='${top.selected_idx}']`,
    )!;
    sentence.click();
    // Wait for the feedback round trip to settle.
    for (let i = 0; i < 200 && api.feedbacks.length === 0; i += 1) {
      await new Promise((resolve) => setTimeout(resolve, 50));
    }
    expect(api.feedbacks).toHaveLength(1);
    await new Promise((resolve) => setTimeout(resolve, 50));

    // The rendered order equals the service response exactly.
    const after = renderedOrder(root);
    expect(after).toEqual(api.feedbacks[0].results.map((r) => r.doc_id));

    // Arrows match independently recomputed rank deltas.
    const deltas = computeRankDeltas(before, after);
    const arrows = [...root.querySelectorAll("[data-testid=rank-arrow]")]
      .map((a) => a.textContent);
    expect(arrows).toEqual(after.map((d) => arrowFor(deltas.get(d) ?? null)));

    // End and recreate: the identical query resumes from the pool.
    await app.endSession();
    await app.startSearch(queryText);
    expect(api.sessions).toHaveLength(2);
    expect(api.sessions[1].state_retrieved).toBe(true);
    expect(root.querySelector("[data-testid=resumed-badge]")).not.toBeNull();
  }, 120000);
});
