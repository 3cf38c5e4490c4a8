/** Thin typed client for the review service JSON API. */

import type { PagePayload, SubmitAck } from './types.js';

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly detail: string,
  ) {
    super(`HTTP ${status}: ${detail}`);
  }
}

export class ApiClient {
  constructor(
    private readonly reviewerId: string,
    private readonly token: string,
    private readonly fetchImpl: FetchLike = (input, init) => fetch(input, init),
    private readonly base = '',
  ) {}

  private headers(): Record<string, string> {
    return { 'X-Review-Token': this.token, 'Content-Type': 'application/json' };
  }

  private async parse<T>(response: Response): Promise<T> {
    if (!response.ok) {
      let detail = response.statusText;
      try {
        detail = ((await response.json()) as { detail?: string }).detail ?? detail;
      } catch {
        /* non-JSON error body */
      }
      throw new ApiError(response.status, detail);
    }
    return (await response.json()) as T;
  }

  /** null when the campaign is complete (204). */
  async nextPage(): Promise<PagePayload | null> {
    const response = await this.fetchImpl(
      `${this.base}/api/reviewers/${encodeURIComponent(this.reviewerId)}/pages/next`,
      { headers: this.headers() },
    );
    if (response.status === 204) return null;
    return this.parse<PagePayload>(response);
  }

  async getPage(pageId: string): Promise<PagePayload> {
    const response = await this.fetchImpl(
      `${this.base}/api/reviewers/${encodeURIComponent(this.reviewerId)}/pages/${encodeURIComponent(pageId)}`,
      { headers: this.headers() },
    );
    return this.parse<PagePayload>(response);
  }

  async submitPage(
    pageId: string,
    labels: Record<string, string>,
    duration: number,
    version: number,
  ): Promise<SubmitAck> {
    const response = await this.fetchImpl(
      `${this.base}/api/reviewers/${encodeURIComponent(this.reviewerId)}/pages/${encodeURIComponent(pageId)}`,
      {
        method: 'POST',
        headers: this.headers(),
        body: JSON.stringify({ labels, duration, version }),
      },
    );
    return this.parse<SubmitAck>(response);
  }

  imageUrl(url: string): string {
    // <img> tags cannot send headers; the service accepts the token in the query
    return `${this.base}${url}?token=${encodeURIComponent(this.token)}`;
  }
}
