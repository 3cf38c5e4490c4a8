export interface Progress {
  pages_done: number;
  pages_total: number;
  images_done: number;
  images_total: number;
}

export interface PageImage {
  image_id: string;
  url: string;
  slot: number;
  prior_label: string;
}

export interface PagePayload {
  page_id: string;
  reviewer_id: string;
  model_label: string;
  version: number;
  images: PageImage[];
  progress: Progress;
}

export interface SubmitAck {
  ok: boolean;
  version: number;
  progress: Progress;
}

export type LintVerdict = 'ok' | 'invalid';

export interface Cell {
  imageId: string;
  url: string;
  value: string;
  lint: LintVerdict;
}

export interface PageViewModel {
  pageId: string;
  heading: string;
  version: number;
  cells: Cell[];
  /** true when the payload carried more cells than the grid cap */
  truncated: boolean;
  progress: Progress;
}
