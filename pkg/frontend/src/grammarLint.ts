/**
 * Client-side label lint. Mirrors the server grammar's accept/reject
 * behavior exactly; the conformance test pins it against the fixture
 * exported by `hitl-review grammar-fixture`.
 *
 * The lint warns, it never blocks: a reviewer can always submit.
 */

import type { LintVerdict } from './types.js';

export interface LintResult {
  verdict: LintVerdict;
  reason?: string;
}

const SENTINELS = ['bbb', 'ttt'];
const MAX_CODE_LEN = 4;

const ok: LintResult = { verdict: 'ok' };

function invalid(reason: string): LintResult {
  return { verdict: 'invalid', reason };
}

function lintToken(token: string): LintResult {
  if (SENTINELS.includes(token.toLowerCase())) return ok;
  let digits = 0;
  let expanded = 0;
  let i = 0;
  while (i < token.length) {
    const ch = token[i]!;
    if (ch >= '0' && ch <= '9') {
      digits += 1;
      expanded += 1;
      i += 1;
    } else if (ch === '?') {
      if (token[i + 1] !== '?') return invalid("lone '?' (the unknown mark is '??')");
      expanded += 1;
      i += 2;
    } else {
      return invalid(`invalid character '${ch}' (codes are digits, 'bbb', or 'ttt')`);
    }
  }
  if (digits === 0) return invalid('code has no readable digits');
  if (expanded > MAX_CODE_LEN) return invalid(`code longer than ${MAX_CODE_LEN} characters`);
  return ok;
}

export function lintLabel(raw: string): LintResult {
  const stripped = raw.trim();
  if (!stripped) return invalid('empty label');

  let body = stripped;
  const percents = (stripped.match(/%/g) ?? []).length;
  if (percents > 0) {
    if (percents !== 2) return invalid("unbalanced '%'");
    const open = stripped.indexOf('%');
    if (!stripped.endsWith('%') || open === stripped.length - 1) {
      return invalid("crossed-out text must close the label: '<new> %<old>%'");
    }
    const old = stripped.slice(open + 1, -1);
    if (old.includes('@') || old.includes('?')) {
      return invalid("'@' and '?' are not allowed inside crossed-out text");
    }
    body = stripped.slice(0, open).trim();
    if (!body) return invalid('missing label before crossed-out text');
  }

  if (body === '??') return ok; // could not label the image at all

  if (/\s/.test(body)) return invalid('whitespace inside label (one code per box)');

  for (const token of body.split('@')) {
    if (!token) return invalid("empty alternative around '@'");
    const result = lintToken(token);
    if (result.verdict === 'invalid') return result;
  }
  return ok;
}

/** Empty boxes mean "the model is right" and are always fine. */
export function lintCellValue(value: string): LintResult {
  if (value.trim() === '') return ok;
  return lintLabel(value);
}
