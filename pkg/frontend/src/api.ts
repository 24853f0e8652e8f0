/** Thin typed client for the three service endpoints the UI uses. */

import type { FetchLike, RankingTask } from "./types.js";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

export type SubmitOutcome = "created" | "duplicate";

async function errorMessage(response: Response): Promise<string> {
  try {
    const body = (await response.json()) as { error?: string };
    if (body && typeof body.error === "string") return body.error;
  } catch {
    /* non-JSON error body */
  }
  return `request failed with status ${response.status}`;
}

export class ServiceClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchFn: FetchLike,
  ) {}

  private url(path: string): string {
    return `${this.baseUrl.replace(/\/$/, "")}${path}`;
  }

  /** Next unfinished task for this worker, or null when none remain (204). */
  async nextTask(workerId: string): Promise<RankingTask | null> {
    const response = await this.fetchFn(
      this.url(`/tasks/next?worker_id=${encodeURIComponent(workerId)}`),
    );
    if (response.status === 204) return null;
    if (!response.ok) throw new ApiError(response.status, await errorMessage(response));
    return (await response.json()) as RankingTask;
  }

  /** Submit a full left-to-right order. 409 (already submitted) is an outcome,
   * not an error, so the app can skip forward. */
  async submitRanking(taskId: string, workerId: string, order: string[]): Promise<SubmitOutcome> {
    const response = await this.fetchFn(this.url(`/tasks/${encodeURIComponent(taskId)}/rankings`), {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ worker_id: workerId, order }),
    });
    if (response.status === 201) return "created";
    if (response.status === 409) return "duplicate";
    throw new ApiError(response.status, await errorMessage(response));
  }
}
