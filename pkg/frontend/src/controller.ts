/**
 * Session controller: navigation, draft persistence, submission.
 *
 * All state lives here so the DOM layer stays a dumb renderer. Unsent
 * textbox edits are kept per page and survive back/next within the
 * session; navigation itself never submits anything.
 */

import { ApiClient, ApiError } from './api.js';
import { ActiveTimer } from './idleTimer.js';
import { buildPageViewModel, collectLabels } from './viewModel.js';
import type { PagePayload, PageViewModel, Progress } from './types.js';

export type SubmitOutcome = 'submitted' | 'conflict-refreshed';

export interface ControllerOptions {
  idleGapS?: number;
  clock?: () => number;
  /** wait between network retries; injectable for tests */
  sleep?: (ms: number) => Promise<void>;
  maxNetworkRetries?: number;
}

const defaultSleep = (ms: number) => new Promise<void>((resolve) => setTimeout(resolve, ms));

export class ReviewController {
  private readonly timer: ActiveTimer;
  private readonly sleep: (ms: number) => Promise<void>;
  private readonly maxNetworkRetries: number;
  private readonly drafts = new Map<string, Map<string, string>>();
  private history: string[] = [];
  private cursor = -1;
  private current: PagePayload | null = null;
  private lastProgress: Progress | null = null;
  complete = false;

  constructor(
    private readonly api: ApiClient,
    options: ControllerOptions = {},
  ) {
    this.timer = new ActiveTimer(options.idleGapS ?? 120, options.clock);
    this.sleep = options.sleep ?? defaultSleep;
    this.maxNetworkRetries = options.maxNetworkRetries ?? 3;
  }

  get page(): PagePayload | null {
    return this.current;
  }

  get progress(): Progress | null {
    return this.current?.progress ?? this.lastProgress;
  }

  noteActivity(): void {
    this.timer.activity();
  }

  viewModel(): PageViewModel | null {
    if (!this.current) return null;
    return buildPageViewModel(this.current, this.pageDrafts(this.current.page_id));
  }

  private pageDrafts(pageId: string): Map<string, string> {
    let drafts = this.drafts.get(pageId);
    if (!drafts) {
      drafts = new Map();
      this.drafts.set(pageId, drafts);
    }
    return drafts;
  }

  setDraft(imageId: string, value: string): void {
    if (!this.current) return;
    this.pageDrafts(this.current.page_id).set(imageId, value);
    this.timer.activity();
  }

  private show(payload: PagePayload): void {
    this.current = payload;
    this.lastProgress = payload.progress;
    this.timer.stop();
    this.timer.start();
  }

  /** Load the lowest-index incomplete page; null means campaign complete. */
  async loadNext(): Promise<PageViewModel | null> {
    const payload = await this.api.nextPage();
    if (payload === null) {
      this.complete = true;
      this.current = null;
      return null;
    }
    this.complete = false;
    if (this.history[this.cursor] !== payload.page_id) {
      this.history = this.history.slice(0, this.cursor + 1);
      this.history.push(payload.page_id);
      this.cursor = this.history.length - 1;
    }
    this.show(payload);
    return this.viewModel();
  }

  get canGoBack(): boolean {
    return this.cursor > 0;
  }

  /** Pure navigation: a GET, never a POST. */
  async goBack(): Promise<PageViewModel | null> {
    if (!this.canGoBack) return this.viewModel();
    this.cursor -= 1;
    const pageId = this.history[this.cursor]!;
    this.show(await this.api.getPage(pageId));
    return this.viewModel();
  }

  /** Forward through history; at the frontier, asks the server for next. */
  async goForward(): Promise<PageViewModel | null> {
    if (this.cursor < this.history.length - 1) {
      this.cursor += 1;
      const pageId = this.history[this.cursor]!;
      this.show(await this.api.getPage(pageId));
      return this.viewModel();
    }
    return this.loadNext();
  }

  /**
   * Submit the current page: non-empty boxes only, verbatim, with the
   * idle-filtered duration. Network failures retry with state intact; a
   * version conflict refetches the page (drafts kept) and reports it so
   * the UI can re-render before the reviewer tries again.
   */
  async submit(): Promise<SubmitOutcome> {
    const page = this.current;
    if (!page) throw new Error('no page loaded');
    const model = buildPageViewModel(page, this.pageDrafts(page.page_id));
    const labels = collectLabels(model.cells);
    const duration = Math.max(this.timer.elapsed(), 0.001);

    let attempt = 0;
    for (;;) {
      try {
        await this.api.submitPage(page.page_id, labels, duration, page.version);
        break;
      } catch (error) {
        if (error instanceof ApiError) {
          if (error.status === 409) {
            this.show(await this.api.getPage(page.page_id));
            return 'conflict-refreshed';
          }
          throw error;
        }
        attempt += 1; // network failure: keep state, retry
        if (attempt > this.maxNetworkRetries) throw error;
        await this.sleep(250 * attempt);
      }
    }
    this.drafts.delete(page.page_id);
    this.timer.stop();
    await this.loadNext();
    return 'submitted';
  }
}
