/** List-reordering and permutation checks shared by the view and submit path. */

/**
 * Move one element of a list: remove it at `from`, reinsert at `to`.
 * Dragging the rightmost cell to position 0 shifts everything else right.
 */
export function moveItem<T>(items: readonly T[], from: number, to: number): T[] {
  if (from < 0 || from >= items.length || to < 0 || to >= items.length) {
    throw new RangeError(`move ${from} -> ${to} outside list of ${items.length}`);
  }
  const next = items.slice();
  const [moved] = next.splice(from, 1);
  next.splice(to, 0, moved);
  return next;
}

/** True when `order` contains exactly the elements of `expected`, each once. */
export function isPermutationOf(order: readonly string[], expected: readonly string[]): boolean {
  if (order.length !== expected.length) return false;
  const seen = new Set(order);
  if (seen.size !== order.length) return false;
  return expected.every((item) => seen.has(item));
}

/** Candidates in the order the service wants them shown. */
export function presentedOrder(candidates: readonly string[], presentation: readonly number[]): string[] {
  if (!isPermutationOf(presentation.map(String), candidates.map((_, i) => String(i)))) {
    throw new RangeError("presentation_order is not a permutation of the candidate indices");
  }
  return presentation.map((i) => candidates[i]);
}
