import { DEFAULT_WINDOW, Point, SeriesBuffer } from './buffer.js';
import type {
  AlarmEvent,
  AlarmInfo,
  ClusterInfo,
  PollReading,
  ReadingEvent,
} from './types.js';
import { engineeringValue } from './units.js';

export type StoreListener = () => void;

/**
 * Single state store for one console session. Every mutation funnels
 * through here so UI updates stay serialized; the server remains the
 * source of truth and the store never invents values.
 */
export class ConsoleStore {
  clusters: ClusterInfo[] = [];
  selectedCluster: number | null = null;
  connected = false;
  session: string | null = null;

  private buffers = new Map<string, SeriesBuffer>();
  private alarmsById = new Map<number, AlarmInfo>();
  private listeners: StoreListener[] = [];

  constructor(readonly window: number = DEFAULT_WINDOW) {}

  subscribe(fn: StoreListener): void {
    this.listeners.push(fn);
  }

  private emit(): void {
    for (const fn of this.listeners) fn();
  }

  setConnected(up: boolean): void {
    this.connected = up;
    this.emit();
  }

  setClusters(clusters: ClusterInfo[]): void {
    this.clusters = clusters;
    this.emit();
  }

  setSelection(cluster: number | null): void {
    this.selectedCluster = cluster;
    this.emit();
  }

  series(node: number, kind: string): SeriesBuffer {
    const key = `${node}/${kind}`;
    let buf = this.buffers.get(key);
    if (!buf) {
      buf = new SeriesBuffer(this.window);
      this.buffers.set(key, buf);
    }
    return buf;
  }

  /** Stream/backfill ingest. Values arrive in wire units; charts hold
   * engineering units. Returns false for reconnect-overlap duplicates. */
  applyReading(ev: ReadingEvent, marked = false): boolean {
    const fresh = this.series(ev.node, ev.kind).push({
      t: ev.t,
      value: engineeringValue(ev.kind, ev.value),
      marked,
    });
    if (fresh) this.emit();
    return fresh;
  }

  applyPollResult(readings: PollReading[]): void {
    for (const r of readings) this.applyReading(r, true);
  }

  applyAlarm(ev: AlarmEvent): void {
    this.alarmsById.set(ev.alarm.id, ev.alarm);
    this.emit();
  }

  setAlarms(alarms: AlarmInfo[]): void {
    this.alarmsById = new Map(alarms.map((a) => [a.id, a]));
    this.emit();
  }

  alarms(): AlarmInfo[] {
    return [...this.alarmsById.values()].sort((a, b) => a.id - b.id);
  }

  /** Rebuild chart history from `GET /snapshot.csv` after a reconnect.
   * Snapshot values are already rendered in engineering units. */
  loadSnapshotCsv(text: string): number {
    let applied = 0;
    for (const line of text.split('\n')) {
      if (!line || line.startsWith('#') || line.startsWith('timestamp,')) {
        continue;
      }
      const [t, node, kind, value] = line.split(',');
      const fresh = this.series(Number(node), kind).push({
        t: Number(t),
        value: Number(value),
      });
      if (fresh) applied++;
    }
    if (applied > 0) this.emit();
    return applied;
  }

  selectedMembers(): number[] {
    const picked = this.clusters.find(
      (c) => c.cluster === this.selectedCluster,
    );
    return picked ? picked.members : [];
  }

  /** Per-node chart data for the current scope; empty when no cluster is
   * selected (the default view only summarizes clusters). */
  visibleSeries(): Map<number, Map<string, readonly Point[]>> {
    const out = new Map<number, Map<string, readonly Point[]>>();
    if (this.selectedCluster === null) return out;
    const members = new Set(this.selectedMembers());
    for (const [key, buf] of this.buffers) {
      const [nodeStr, kind] = key.split('/');
      const node = Number(nodeStr);
      if (!members.has(node) || buf.size === 0) continue;
      let byKind = out.get(node);
      if (!byKind) {
        byKind = new Map();
        out.set(node, byKind);
      }
      byKind.set(kind, buf.points());
    }
    return out;
  }

  /** Latest value per (node, kind), for the all-clusters summary view. */
  latestByNode(): Map<number, Map<string, Point>> {
    const out = new Map<number, Map<string, Point>>();
    for (const [key, buf] of this.buffers) {
      const last = buf.latest();
      if (!last) continue;
      const [nodeStr, kind] = key.split('/');
      const node = Number(nodeStr);
      let byKind = out.get(node);
      if (!byKind) {
        byKind = new Map();
        out.set(node, byKind);
      }
      byKind.set(kind, last);
    }
    return out;
  }
}
