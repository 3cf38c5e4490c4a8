import { describe, expect, it } from 'vitest';

import { lintCellValue, lintLabel } from '../src/grammarLint.js';
import fixture from './fixtures/grammar_conformance.json';

describe('grammar lint', () => {
  it('matches the server verdicts on the shared conformance fixture', () => {
    expect(fixture.cases.length).toBeGreaterThan(30);
    for (const { raw, verdict } of fixture.cases) {
      expect(lintLabel(raw).verdict, JSON.stringify(raw)).toBe(verdict);
    }
  });

  it('flags the classic bad entries with a reason', () => {
    for (const raw of ['t4b', '5bb', '531 537', '?']) {
      const result = lintLabel(raw);
      expect(result.verdict).toBe('invalid');
      expect(result.reason).toBeTruthy();
    }
  });

  it('accepts the uncertainty forms', () => {
    for (const raw of ['531@533', '??', '1??8', '182??', '531 %537%']) {
      expect(lintLabel(raw).verdict).toBe('ok');
    }
  });

  it('treats an empty box as agreement, never invalid', () => {
    expect(lintCellValue('').verdict).toBe('ok');
    expect(lintCellValue('   ').verdict).toBe('ok');
    expect(lintCellValue('5bb').verdict).toBe('invalid');
  });
});
