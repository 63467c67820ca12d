import { describe, expect, it } from 'vitest';

import { tokenEditDistance, tokenize } from '../src/editDistance.js';

/** Independent oracle: plain recursive Levenshtein with memoization. */
function referenceDistance(a: string[], b: string[]): number {
  const memo = new Map<string, number>();
  const go = (i: number, j: number): number => {
    if (i === a.length) return b.length - j;
    if (j === b.length) return a.length - i;
    const key = `${i},${j}`;
    const hit = memo.get(key);
    if (hit !== undefined) return hit;
    const sub = go(i + 1, j + 1) + (a[i] === b[j] ? 0 : 1);
    const del = go(i + 1, j) + 1;
    const ins = go(i, j + 1) + 1;
    const best = Math.min(sub, del, ins);
    memo.set(key, best);
    return best;
  };
  return go(0, 0);
}

describe('tokenEditDistance', () => {
  it('is 0 for identical texts', () => {
    expect(tokenEditDistance('press this button', 'press this button')).toBe(0);
  });

  it('ignores case and extra whitespace', () => {
    expect(tokenEditDistance('Press  THIS button', 'press this button')).toBe(0);
  });

  it('counts one substitution', () => {
    expect(tokenEditDistance('press this button', 'press that button')).toBe(1);
  });

  it('fully rewritten text costs the longer token count path', () => {
    // disjoint tokens: max(len) substitutions/insertions
    expect(tokenEditDistance('a b c', 'x y z w')).toBe(4);
  });

  it('matches the recursive oracle on a fixture set', () => {
    const texts = [
      '', 'yes', 'i will have the coffee now',
      'i will have the tea now please', 'we can do that again',
      'the coffee will do', 'coffee coffee coffee',
    ];
    for (const a of texts) {
      for (const b of texts) {
        expect(tokenEditDistance(a, b)).toBe(referenceDistance(tokenize(a), tokenize(b)));
      }
    }
  });
});
