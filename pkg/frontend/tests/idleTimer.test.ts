import { describe, expect, it } from 'vitest';

import { ActiveTimer } from '../src/idleTimer.js';

/** A clock the test moves by hand, in seconds. */
function scriptedClock(start = 0) {
  let now = start;
  return {
    clock: () => now,
    advance: (s: number) => {
      now += s;
    },
  };
}

describe('active timer', () => {
  it('counts continuous work in full', () => {
    const { clock, advance } = scriptedClock();
    const timer = new ActiveTimer(120, clock);
    timer.start();
    for (let i = 0; i < 6; i++) {
      advance(10);
      timer.activity();
    }
    expect(timer.stop()).toBe(60);
  });

  it('excludes a mid-page idle span beyond the gap', () => {
    const { clock, advance } = scriptedClock();
    const timer = new ActiveTimer(120, clock); // 2 min idle gap
    timer.start();
    advance(30);
    timer.activity(); // 30s of work
    advance(600); // 10 min idle
    timer.activity(); // resume
    advance(30);
    timer.activity(); // 30s more work
    // oracle: sum over gaps of min(gap, idleGap) = 30 + 120 + 30
    expect(timer.stop()).toBe(180);
  });

  it('caps the tail after the last event too', () => {
    const { clock, advance } = scriptedClock();
    const timer = new ActiveTimer(120, clock);
    timer.start();
    advance(10);
    timer.activity();
    advance(100000); // walked away without another event
    expect(timer.elapsed()).toBe(10 + 120);
  });

  it('resets on stop', () => {
    const { clock, advance } = scriptedClock();
    const timer = new ActiveTimer(120, clock);
    timer.start();
    advance(50);
    timer.activity();
    expect(timer.stop()).toBe(50);
    timer.start();
    advance(5);
    expect(timer.elapsed()).toBe(5);
  });

  it('rejects a non-positive idle gap', () => {
    expect(() => new ActiveTimer(0)).toThrow();
  });
});
