/** Rank-change indicators between consecutive slates.
 *
 * Pure arithmetic on document orders; the UI never reorders anything
 * itself — both orders come from service responses.
 */

/** Positive = moved up (toward rank 1); null = not in the previous slate. */
export function computeRankDeltas(
  prev: string[],
  next: string[],
): Map<string, number | null> {
  const prevRank = new Map<string, number>();
  prev.forEach((docId, i) => prevRank.set(docId, i));
  const deltas = new Map<string, number | null>();
  next.forEach((docId, i) => {
    const was = prevRank.get(docId);
    deltas.set(docId, was === undefined ? null : was - i);
  });
  return deltas;
}

/** "↑n" / "↓n" / "＝" / "new" for a delta from computeRankDeltas. */
export function arrowFor(delta: number | null): string {
  if (delta === null) return "new";
  if (delta > 0) return `↑${delta}`;
  if (delta < 0) return `↓${-delta}`;
  return "＝";
}
