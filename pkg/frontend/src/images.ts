/** Image resolution: a URL template over item_id, or generated placeholder tiles. */

import type { AppConfig } from "./types.js";

/** Stable small hash for picking a placeholder hue per item. */
function hashCode(text: string): number {
  let h = 2166136261;
  for (let i = 0; i < text.length; i++) {
    h ^= text.charCodeAt(i);
    h = Math.imul(h, 16777619);
  }
  return h >>> 0;
}

/** Inline SVG tile showing the item id; used when no image host is configured. */
export function placeholderTile(itemId: string): string {
  const hue = hashCode(itemId) % 360;
  const label = itemId.length > 12 ? `${itemId.slice(0, 11)}…` : itemId;
  const svg =
    `<svg xmlns="http://www.w3.org/2000/svg" width="96" height="96">` +
    `<rect width="96" height="96" fill="hsl(${hue},55%,70%)"/>` +
    `<text x="48" y="52" font-size="11" font-family="sans-serif" text-anchor="middle">` +
    `${label}</text></svg>`;
  return `data:image/svg+xml;utf8,${encodeURIComponent(svg)}`;
}

export function imageUrl(config: AppConfig, itemId: string): string {
  if (!config.imageUrlTemplate) return placeholderTile(itemId);
  return config.imageUrlTemplate.replaceAll("{item_id}", encodeURIComponent(itemId));
}
