/** Application flow: fetch a task, collect a full ranking, submit, repeat.
 *
 * Submissions that fail from connectivity problems are queued in order and
 * retried when the browser reports connectivity (or before the next
 * submission attempt); at most one submission is in flight at a time. A 409
 * means this worker already ranked the task somewhere else, so the app skips
 * forward. Reloading before submit discards any unsubmitted reorder: state
 * lives on the server only.
 */

import { ApiError, ServiceClient } from "./api.js";
import { isPermutationOf } from "./reorder.js";
import { TaskView } from "./view.js";
import type { AppConfig, FetchLike, RankingTask } from "./types.js";

interface PendingSubmission {
  taskId: string;
  order: string[];
}

export interface AppOptions {
  root: HTMLElement;
  config: AppConfig;
  workerId: string;
  fetchFn: FetchLike;
  /** EventTarget firing "online" when connectivity returns (window in browsers). */
  connectivity?: EventTarget;
}

export class AnnotationApp {
  readonly client: ServiceClient;
  private readonly root: HTMLElement;
  private readonly doc: Document;
  private readonly config: AppConfig;
  private readonly workerId: string;
  private view: TaskView | null = null;
  private queue: PendingSubmission[] = [];
  private submitting = false;
  /** One-shot message surviving the next render (e.g. "skipping forward"). */
  private notice = "";

  constructor(options: AppOptions) {
    this.root = options.root;
    this.doc = options.root.ownerDocument;
    this.config = options.config;
    this.workerId = options.workerId;
    this.client = new ServiceClient(options.config.serviceBaseUrl, options.fetchFn);
    options.connectivity?.addEventListener("online", () => {
      void this.flushQueue().then((flushed) => {
        if (flushed && this.queue.length === 0 && !this.view) return this.advance();
        return undefined;
      });
    });
  }

  get pendingCount(): number {
    return this.queue.length;
  }

  currentTask(): RankingTask | null {
    return this.view?.task ?? null;
  }

  /** Left-to-right order currently on screen. */
  currentOrder(): string[] {
    return this.view?.currentOrder() ?? [];
  }

  /** Reorder hook used by drag-and-drop and scripted sessions alike. */
  move(from: number, to: number): void {
    this.view?.move(from, to);
  }

  async start(): Promise<void> {
    await this.advance();
  }

  async advance(): Promise<void> {
    this.view = null;
    let task: RankingTask | null;
    try {
      task = await this.client.nextTask(this.workerId);
    } catch (error) {
      this.renderRetry(error);
      return;
    }
    if (task === null) {
      this.renderMessage("No tasks remaining. Thank you!");
      return;
    }
    this.renderTask(task);
  }

  async submitCurrent(): Promise<void> {
    if (!this.view || this.submitting) return;
    const task = this.view.task;
    const order = this.view.currentOrder();
    if (!isPermutationOf(order, task.candidates)) {
      this.banner("Ranking must contain each candidate exactly once.");
      return;
    }
    this.submitting = true;
    try {
      await this.flushQueue();
      const outcome = await this.client.submitRanking(task.task_id, this.workerId, order);
      if (outcome === "duplicate") {
        this.notice = "Already submitted; skipping forward.";
      }
      this.submitting = false;
      await this.advance();
    } catch (error) {
      this.submitting = false;
      if (error instanceof ApiError) {
        this.banner(error.message);
        return;
      }
      // connectivity failure: keep the work, retry when we are back online
      this.queue.push({ taskId: task.task_id, order });
      this.notice = "Offline: ranking queued, will retry when connection returns.";
      await this.advance();
    }
  }

  /** Try to deliver queued submissions in order; stops at the first network
   * failure. Returns true when the queue drained. */
  async flushQueue(): Promise<boolean> {
    while (this.queue.length > 0) {
      const pending = this.queue[0];
      try {
        await this.client.submitRanking(pending.taskId, this.workerId, pending.order);
      } catch (error) {
        if (error instanceof ApiError) {
          this.queue.shift(); // rejected for cause; retrying would not help
          continue;
        }
        return false;
      }
      this.queue.shift();
    }
    return true;
  }

  private renderTask(task: RankingTask): void {
    this.root.textContent = "";
    const banner = this.doc.createElement("div");
    banner.className = "banner";
    banner.textContent = this.takeNotice();
    const host = this.doc.createElement("div");
    host.className = "task-host";
    this.root.append(banner, host);
    this.view = new TaskView(host, this.config, task);
    this.view.onSubmit = () => void this.submitCurrent();
  }

  private renderMessage(text: string): void {
    this.view = null;
    this.root.textContent = "";
    const banner = this.doc.createElement("div");
    banner.className = "banner";
    banner.textContent = this.takeNotice();
    const p = this.doc.createElement("p");
    p.className = "status";
    p.textContent = text;
    this.root.append(banner, p);
  }

  private renderRetry(error: unknown): void {
    this.view = null;
    this.root.textContent = "";
    const banner = this.doc.createElement("div");
    banner.className = "banner";
    banner.textContent = this.takeNotice();
    const p = this.doc.createElement("p");
    p.className = "status error";
    p.textContent = `Could not reach the service (${String(error)}).`;
    const button = this.doc.createElement("button");
    button.className = "retry";
    button.textContent = "Retry";
    button.addEventListener("click", () => void this.advance());
    this.root.append(banner, p, button);
  }

  private takeNotice(): string {
    const text = this.notice;
    this.notice = "";
    return text;
  }

  private banner(text: string): void {
    const el = this.root.querySelector(".banner");
    if (el) el.textContent = text;
  }
}
