/** Token-level edit distance between a chosen candidate and the committed
 * text, logged locally to mirror how much users rewrite suggestions. */

export function tokenize(text: string): string[] {
  return text.toLowerCase().split(/\s+/).filter((t) => t.length > 0);
}

/** Levenshtein distance over word tokens (insert/delete/substitute = 1). */
export function tokenEditDistance(a: string, b: string): number {
  const s = tokenize(a);
  const t = tokenize(b);
  const rows = s.length + 1;
  const cols = t.length + 1;
  let prev = new Array<number>(cols);
  let curr = new Array<number>(cols);
  for (let j = 0; j < cols; j++) prev[j] = j;
  for (let i = 1; i < rows; i++) {
    curr[0] = i;
    for (let j = 1; j < cols; j++) {
      const subCost = s[i - 1] === t[j - 1] ? 0 : 1;
      curr[j] = Math.min(
        (prev[j] as number) + 1,
        (curr[j - 1] as number) + 1,
        (prev[j - 1] as number) + subCost,
      );
    }
    [prev, curr] = [curr, prev];
  }
  return prev[cols - 1] as number;
}
