/**
 * Active-time measurement with idle detection.
 *
 * The reviewers' tool has no pause button, so the timer pauses itself:
 * any gap between activity events longer than the idle threshold only
 * counts up to the threshold, the rest is treated as a break from the
 * page. The clock is injectable so tests can script it.
 */

export type Clock = () => number; // seconds

export class ActiveTimer {
  private readonly idleGapS: number;
  private readonly clock: Clock;
  private lastActivity: number | null = null;
  private activeS = 0;

  constructor(idleGapS = 120, clock: Clock = () => Date.now() / 1000) {
    if (idleGapS <= 0) throw new Error('idleGapS must be positive');
    this.idleGapS = idleGapS;
    this.clock = clock;
  }

  /** Begin (or resume) measuring from now. */
  start(): void {
    this.lastActivity = this.clock();
  }

  /** Record a keyboard/mouse event; accumulates capped inter-event time. */
  activity(): void {
    const now = this.clock();
    if (this.lastActivity !== null) {
      this.activeS += Math.min(now - this.lastActivity, this.idleGapS);
    }
    this.lastActivity = now;
  }

  /** Active seconds, counting time since the last event (capped). */
  elapsed(): number {
    let total = this.activeS;
    if (this.lastActivity !== null) {
      total += Math.min(this.clock() - this.lastActivity, this.idleGapS);
    }
    return total;
  }

  /** Stop and return the measured active duration. */
  stop(): number {
    const total = this.elapsed();
    this.lastActivity = null;
    this.activeS = 0;
    return total;
  }
}
