/**
 * Pure view-model construction: everything the grid and progress line show,
 * computed without touching the DOM so it can be tested directly.
 */

import { lintCellValue } from './grammarLint.js';
import type { PagePayload, PageViewModel, Progress } from './types.js';

export const GRID_CAP = 60;

/**
 * Build the grid model for one page. Draft values (unsent edits kept
 * across navigation) override the server's prior labels. The grid never
 * renders more than the cap, whatever the payload says.
 */
export function buildPageViewModel(
  payload: PagePayload,
  drafts: ReadonlyMap<string, string> = new Map(),
  cap: number = GRID_CAP,
): PageViewModel {
  const images = payload.images.slice(0, cap);
  return {
    pageId: payload.page_id,
    heading: payload.model_label,
    version: payload.version,
    truncated: payload.images.length > cap,
    cells: images.map((image) => {
      const value = drafts.get(image.image_id) ?? image.prior_label;
      return {
        imageId: image.image_id,
        url: image.url,
        value,
        lint: lintCellValue(value).verdict,
      };
    }),
    progress: payload.progress,
  };
}

/** Rounded-down completion percentage over images. */
export function percentDone(progress: Progress): number {
  if (progress.images_total === 0) return 0;
  return Math.floor((100 * progress.images_done) / progress.images_total);
}

/** The explicit overall-progress line, e.g. "0 / 13000 (0%)". */
export function imagesProgressLine(progress: Progress): string {
  return `${progress.images_done} / ${progress.images_total} (${percentDone(progress)}%)`;
}

/** Full indicator: images and pages, e.g. for the header bar. */
export function progressText(progress: Progress): string {
  return (
    `images: ${progress.images_done} / ${progress.images_total}` +
    ` — pages: ${progress.pages_done} / ${progress.pages_total}` +
    ` (${percentDone(progress)}%)`
  );
}

export function isComplete(progress: Progress): boolean {
  return progress.images_total > 0 && progress.images_done >= progress.images_total;
}

/**
 * The POST body labels: only boxes the reviewer actually typed in, verbatim.
 * Empty boxes mean agreement and are never sent.
 */
export function collectLabels(cells: { imageId: string; value: string }[]): Record<string, string> {
  const labels: Record<string, string> = {};
  for (const cell of cells) {
    if (cell.value !== '') labels[cell.imageId] = cell.value;
  }
  return labels;
}
