// @vitest-environment jsdom
//
// End-to-end round trip against the real Python service: a scripted session
// fetches a task, reorders two candidates by drag-and-drop, submits, and the
// persisted JSONL line must equal the on-screen order; a duplicate submission
// must come back as 409.
import { spawn, spawnSync, type ChildProcess } from "node:child_process";
import { mkdtempSync, readFileSync, rmSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { AnnotationApp } from "../src/app.js";
import { domOrder } from "../src/view.js";
import type { AppConfig } from "../src/types.js";

const realFetch = globalThis.fetch.bind(globalThis);
const PORT = 18700 + (process.pid % 500);
const BASE = `http://127.0.0.1:${PORT}`;
const CONFIG: AppConfig = { serviceBaseUrl: BASE, imageUrlTemplate: null };

const cliAvailable = spawnSync("lookalike", ["--help"], { stdio: "ignore" }).status === 0;

let workDir = "";
let server: ChildProcess | null = null;
let rankingsPath = "";

function cli(args: string[]): void {
  const result = spawnSync("lookalike", args, { encoding: "utf-8" });
  if (result.status !== 0) {
    throw new Error(`lookalike ${args[0]} failed: ${result.stderr}`);
  }
}

async function waitForHealth(): Promise<void> {
  for (let attempt = 0; attempt < 50; attempt++) {
    try {
      const response = await realFetch(`${BASE}/health`);
      if (response.ok) return;
    } catch {
      /* not up yet */
    }
    await new Promise((resolve) => setTimeout(resolve, 300));
  }
  throw new Error("service did not become healthy");
}

describe.skipIf(!cliAvailable)("browser session against the real service", () => {
  beforeAll(async () => {
    workDir = mkdtempSync(join(tmpdir(), "lookalike-ui-"));
    const emb = join(workDir, "emb.jsonl");
    const tasks = join(workDir, "tasks.jsonl");
    rankingsPath = join(workDir, "rankings.jsonl");
    cli(["gen-synthetic", "--n", "40", "--dim", "6", "--seed", "0", "--out", emb]);
    cli(["build-tasks", "--embeddings", emb, "--num-queries", "5", "--seed", "1",
         "--out", tasks]);
    server = spawn("lookalike", [
      "serve", "--embeddings", emb, "--tasks", tasks,
      "--rankings-out", rankingsPath, "--host", "127.0.0.1", "--port", String(PORT),
    ]);
    await waitForHealth();
  }, 60_000);

  afterAll(async () => {
    if (server) {
      server.kill("SIGTERM");
      await new Promise((resolve) => server?.once("exit", resolve));
    }
    if (workDir) rmSync(workDir, { recursive: true, force: true });
  });

  it("persists exactly the on-screen order and rejects duplicates", async () => {
    const root = document.createElement("div");
    document.body.append(root);
    const app = new AnnotationApp({
      root,
      config: CONFIG,
      workerId: "browser-w1",
      fetchFn: realFetch,
    });
    await app.start();
    const task = app.currentTask();
    expect(task).not.toBeNull();

    // drag two candidates around via the DOM drag events
    const cells = () => root.querySelectorAll<HTMLElement>(".candidate-cell");
    cells()[4].dispatchEvent(new Event("dragstart", { bubbles: true }));
    cells()[1].dispatchEvent(new Event("drop", { bubbles: true }));
    cells()[0].dispatchEvent(new Event("dragstart", { bubbles: true }));
    cells()[3].dispatchEvent(new Event("drop", { bubbles: true }));

    const onScreen = domOrder(root);
    expect(onScreen).not.toEqual(
      task!.presentation_order.map((i) => task!.candidates[i]),
    );
    await app.submitCurrent();

    const lines = readFileSync(rankingsPath, "utf-8").trim().split("\n");
    expect(lines).toHaveLength(1);
    const persisted = JSON.parse(lines[0]) as {
      worker_id: string;
      task_id: string;
      order: string[];
    };
    expect(persisted).toEqual({
      worker_id: "browser-w1",
      task_id: task!.task_id,
      order: onScreen,
    });

    // resubmitting the same (worker, task) must yield 409 -> "duplicate"
    const outcome = await app.client.submitRanking(task!.task_id, "browser-w1", onScreen);
    expect(outcome).toBe("duplicate");
    expect(readFileSync(rankingsPath, "utf-8").trim().split("\n")).toHaveLength(1);

    // the app itself has moved on to a fresh task
    expect(app.currentTask()?.task_id).not.toBe(task!.task_id);
  }, 30_000);
});
