/** DOM rendering of one ranking task: query row on top, draggable candidates below.
 *
 * The bottom row is the only mutable part; its left-to-right order IS the
 * submission. Reordering goes through TaskView.move so drag-and-drop and
 * tests share one code path. No shuffling happens here: the initial order
 * comes verbatim from the task's presentation_order.
 */

import { imageUrl } from "./images.js";
import { moveItem, presentedOrder } from "./reorder.js";
import type { AppConfig, RankingTask } from "./types.js";

export class TaskView {
  private order: string[];
  private dragFrom: number | null = null;
  private readonly container: HTMLElement;
  private readonly doc: Document;
  private readonly config: AppConfig;
  readonly task: RankingTask;
  onSubmit: (order: string[]) => void = () => undefined;

  constructor(container: HTMLElement, config: AppConfig, task: RankingTask) {
    this.container = container;
    this.doc = container.ownerDocument;
    this.config = config;
    this.task = task;
    this.order = presentedOrder(task.candidates, task.presentation_order);
    this.renderSkeleton();
    this.renderBottomRow();
  }

  /** Current left-to-right candidate order (what submit would send). */
  currentOrder(): string[] {
    return this.order.slice();
  }

  /** Reorder the bottom row: remove at `from`, insert at `to`. */
  move(from: number, to: number): void {
    if (from === to) return;
    this.order = moveItem(this.order, from, to);
    this.renderBottomRow();
  }

  private cell(itemId: string, className: string): HTMLElement {
    const cell = this.doc.createElement("div");
    cell.className = `cell ${className}`;
    const img = this.doc.createElement("img");
    img.src = imageUrl(this.config, itemId);
    img.alt = itemId;
    img.draggable = false;
    const label = this.doc.createElement("span");
    label.textContent = itemId;
    cell.append(img, label);
    return cell;
  }

  private renderSkeleton(): void {
    this.container.textContent = "";
    const heading = this.doc.createElement("p");
    heading.className = "instructions";
    heading.textContent =
      "Drag the faces in the bottom row so the one most similar to the face " +
      "above it is on the left and the least similar is on the right.";
    const queryRow = this.doc.createElement("div");
    queryRow.className = "row query-row";
    for (let i = 0; i < this.task.candidates.length; i++) {
      queryRow.append(this.cell(this.task.query_id, "query-cell"));
    }
    const candidateRow = this.doc.createElement("div");
    candidateRow.className = "row candidate-row";
    const submit = this.doc.createElement("button");
    submit.className = "submit";
    submit.textContent = "Submit ranking";
    submit.addEventListener("click", () => this.onSubmit(this.currentOrder()));
    this.container.append(heading, queryRow, candidateRow, submit);
  }

  private renderBottomRow(): void {
    const row = this.container.querySelector(".candidate-row");
    if (!row) return;
    row.textContent = "";
    this.order.forEach((itemId, index) => {
      const cell = this.cell(itemId, "candidate-cell");
      cell.setAttribute("data-item-id", itemId);
      cell.setAttribute("data-index", String(index));
      cell.draggable = true;
      cell.addEventListener("dragstart", () => {
        this.dragFrom = index;
      });
      cell.addEventListener("dragover", (event) => event.preventDefault());
      cell.addEventListener("drop", (event) => {
        event.preventDefault();
        if (this.dragFrom !== null) {
          this.move(this.dragFrom, index);
          this.dragFrom = null;
        }
      });
      row.append(cell);
    });
  }
}

/** Candidate ids read straight from the DOM, leftmost first. */
export function domOrder(container: HTMLElement): string[] {
  return Array.from(container.querySelectorAll(".candidate-cell")).map(
    (cell) => cell.getAttribute("data-item-id") ?? "",
  );
}
