/** Browser bootstrap: load config.json, ask for a worker id, start the app. */

import { AnnotationApp } from "./app.js";
import type { AppConfig } from "./types.js";

const DEFAULT_CONFIG: AppConfig = { serviceBaseUrl: "", imageUrlTemplate: null };

async function loadConfig(): Promise<AppConfig> {
  try {
    const response = await fetch("./config.json");
    if (!response.ok) return DEFAULT_CONFIG;
    const raw = (await response.json()) as Partial<AppConfig>;
    return {
      serviceBaseUrl: raw.serviceBaseUrl ?? "",
      imageUrlTemplate: raw.imageUrlTemplate ?? null,
    };
  } catch {
    return DEFAULT_CONFIG;
  }
}

function workerIdFrom(doc: Document): string {
  const params = new URLSearchParams(doc.location?.search ?? "");
  const fromQuery = params.get("worker_id");
  if (fromQuery) return fromQuery;
  const stored = window.localStorage.getItem("lookalike-worker-id");
  if (stored) return stored;
  const entered = window.prompt("Enter your worker id:") || `anon-${Date.now()}`;
  window.localStorage.setItem("lookalike-worker-id", entered);
  return entered;
}

async function boot(): Promise<void> {
  const root = document.getElementById("app");
  if (!root) throw new Error("missing #app element");
  const config = await loadConfig();
  const app = new AnnotationApp({
    root,
    config,
    workerId: workerIdFrom(document),
    fetchFn: (input, init) => fetch(input, init),
    connectivity: window,
  });
  await app.start();
}

void boot();
