/**
 * End-to-end revision loop against the real detection service running on
 * the golden fixtures: the ambiguous movie question yields three candidate
 * chips; choosing "IMDB Rating" and resubmitting yields answerable.
 */

import { spawn, spawnSync, type ChildProcess } from "node:child_process";
import { mkdtempSync, rmSync } from "node:fs";
import { tmpdir } from "node:os";
import { join, resolve } from "node:path";

import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { rewriteSpan, segmentQuestion } from "../src/highlight.js";
import type { DetectPayload, TablesPayload } from "../src/types.js";

const PORT = 8517;
const BASE = `http://127.0.0.1:${PORT}`;
const REPO_ROOT = resolve(__dirname, "..", "..");
const QUESTION = "what is the rating of the movie";

let assetsDir: string;
let server: ChildProcess | undefined;

async function waitForHealth(timeoutMs: number): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  let lastError: unknown = new Error("service never came up");
  while (Date.now() < deadline) {
    try {
      const response = await fetch(`${BASE}/health`);
      if (response.ok) {
        return;
      }
    } catch (error) {
      lastError = error;
    }
    await new Promise((r) => setTimeout(r, 250));
  }
  throw lastError;
}

beforeAll(async () => {
  assetsDir = mkdtempSync(join(tmpdir(), "quandary-ui-"));
  const build = spawnSync("python3", ["-m", "quandary.demo", assetsDir], {
    cwd: REPO_ROOT,
    encoding: "utf-8",
  });
  if (build.status !== 0) {
    throw new Error(`demo asset build failed: ${build.stderr}`);
  }
  server = spawn(
    "python3",
    [
      "-m", "quandary", "serve",
      "--model", join(assetsDir, "demo-model.json"),
      "--tables-dir", join(assetsDir, "tables"),
      "--port", String(PORT),
      "--threshold", "0.35",
    ],
    { cwd: REPO_ROOT, stdio: "ignore" },
  );
  await waitForHealth(30_000);
}, 60_000);

afterAll(() => {
  server?.kill();
  if (assetsDir) {
    rmSync(assetsDir, { recursive: true, force: true });
  }
});

async function detect(tableId: string, question: string): Promise<DetectPayload> {
  const response = await fetch(`${BASE}/detect`, {
    method: "POST",
    headers: { "content-type": "application/json" },
    body: JSON.stringify({ table_id: tableId, question }),
  });
  expect(response.ok).toBe(true);
  return (await response.json()) as DetectPayload;
}

describe("service-backed revision loop", () => {
  it("lists the golden tables with sample cells", async () => {
    const response = await fetch(`${BASE}/tables`);
    const payload = (await response.json()) as TablesPayload;
    const movies = payload.tables.find((t) => t.table_id === "movies");
    expect(movies).toBeDefined();
    expect(movies!.columns).toContain("IMDB Rating");
    expect(movies!.cells["Title"].length).toBeGreaterThan(0);
  });

  it("ambiguous question yields three chips; choosing one resolves it", async () => {
    const first = await detect("movies", QUESTION);
    expect(first.verdict).toBe("ambiguous");

    const ambSpans = first.spans.filter((s) => s.category === "AMB");
    expect(ambSpans).toHaveLength(1);
    const chips = ambSpans[0].candidates.map((c) => c.text);
    expect(chips).toEqual([
      "IMDB Rating",
      "Content Rating",
      "Rotten Tomatoes Rating",
    ]);

    // highlight offsets equal the payload byte offsets
    const segments = segmentQuestion(QUESTION, first.spans);
    const highlighted = segments.filter((s) => s.category === "AMB");
    expect(highlighted[0].start).toBe(ambSpans[0].start);
    expect(highlighted[0].end).toBe(ambSpans[0].end);
    expect(QUESTION.slice(ambSpans[0].start, ambSpans[0].end)).toBe("rating");

    // the chip click rewrite, then resubmission
    const revised = rewriteSpan(QUESTION, ambSpans[0], "IMDB Rating");
    expect(revised).toBe("what is the IMDB Rating of the movie");
    const second = await detect("movies", revised);
    expect(second.verdict).toBe("answerable");
    expect(second.response).toBe("");
  });

  it("unanswerable question explains the unmappable span", async () => {
    const question = "what is the model name of phone whose price is greater than 500";
    const payload = await detect("phones", question);
    expect(payload.verdict).toBe("unanswerable");
    const unk = payload.spans.find((s) => s.category === "UNK");
    expect(unk).toBeDefined();
    expect(question.slice(unk!.start, unk!.end)).toBe("model name");
    expect(payload.response).toBe(
      "Sorry, we can't find an answer for you since " +
        '"model name" cannot be mapped to any concepts in your table.',
    );
  });

  it("identical submissions render identically", async () => {
    const a = await detect("movies", QUESTION);
    const b = await detect("movies", QUESTION);
    expect(b).toEqual(a);
  });
});
