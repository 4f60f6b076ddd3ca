export interface Point {
  t: number;
  value: number;
  /** true for operator-poll results so the chart can mark them */
  marked?: boolean;
}

export const DEFAULT_WINDOW = 500;

/**
 * Bounded time-ordered buffer for one (node, kind) series.
 *
 * The stream delivers each record once per connection, but a reconnect
 * backfills from the snapshot endpoint and replays overlap, so pushes
 * dedup on timestamp (timestamps are unique and monotonic per series).
 * When full, the oldest point is evicted first.
 */
export class SeriesBuffer {
  private pts: Point[] = [];
  private have = new Set<number>();

  constructor(readonly limit: number = DEFAULT_WINDOW) {
    if (limit < 1) throw new Error(`bad buffer limit ${limit}`);
  }

  /** Returns false when the point was a duplicate and was dropped. */
  push(point: Point): boolean {
    if (this.have.has(point.t)) return false;
    // common case: in-order append; reconnect overlap may arrive older
    let i = this.pts.length;
    while (i > 0 && this.pts[i - 1].t > point.t) i--;
    this.pts.splice(i, 0, point);
    this.have.add(point.t);
    while (this.pts.length > this.limit) {
      const evicted = this.pts.shift()!;
      this.have.delete(evicted.t);
    }
    return true;
  }

  points(): readonly Point[] {
    return this.pts;
  }

  latest(): Point | undefined {
    return this.pts[this.pts.length - 1];
  }

  get size(): number {
    return this.pts.length;
  }
}
