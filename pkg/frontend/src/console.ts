import { Api } from './api.js';
import { consumeStream } from './sse.js';
import { ConsoleStore } from './store.js';
import type { AlarmEvent, ReadingEvent } from './types.js';

const RECONNECT_DELAY_MS = 1000;

const sleep = (ms: number) => new Promise((r) => setTimeout(r, ms));

/**
 * One operator session: owns the event-stream consumer and routes every
 * server message through the store. On reconnect it backfills history from
 * the snapshot endpoint; buffer dedup makes the overlap harmless.
 */
export class ConsoleSession {
  readonly api: Api;
  readonly store: ConsoleStore;
  private stopper: AbortController | null = null;
  private streamDone: Promise<void> | null = null;

  constructor(base: string, store?: ConsoleStore) {
    this.api = new Api(base);
    this.store = store ?? new ConsoleStore();
  }

  async connect(): Promise<void> {
    this.store.setClusters(await this.api.clusters());
    this.store.setAlarms(await this.api.alarms());
    this.store.loadSnapshotCsv(await this.api.snapshotCsv());
    this.stopper = new AbortController();
    this.streamDone = this.runStream(this.stopper.signal);
  }

  private async runStream(signal: AbortSignal): Promise<void> {
    while (!signal.aborted) {
      try {
        await consumeStream(`${this.api.base}/stream`, {
          onEvent: (ev) => this.dispatch(ev.event, ev.data),
          onClose: () => this.store.setConnected(false),
        }, signal);
      } catch {
        // fall through to backfill + retry
      }
      if (signal.aborted) break;
      await sleep(RECONNECT_DELAY_MS);
      try {
        this.store.loadSnapshotCsv(await this.api.snapshotCsv());
        this.store.setAlarms(await this.api.alarms());
      } catch {
        // server still down; the loop will retry
      }
    }
  }

  private async dispatch(event: string, data: string): Promise<void> {
    if (event === 'hello') {
      const { session } = JSON.parse(data) as { session: string };
      this.store.session = session;
      this.store.setConnected(true);
      // stream sessions are server-side state; re-scope after reconnect
      if (this.store.selectedCluster !== null) {
        await this.api.select(session, this.store.selectedCluster);
      }
    } else if (event === 'alarm') {
      this.store.applyAlarm(JSON.parse(data) as AlarmEvent);
    } else {
      this.store.applyReading(JSON.parse(data) as ReadingEvent);
    }
  }

  async selectCluster(cluster: number | null): Promise<void> {
    if (this.store.session) {
      await this.api.select(this.store.session, cluster);
    }
    this.store.setSelection(cluster);
  }

  /** Operator poll: fresh readings come back on the HTTP response and are
   * charted immediately with an on-demand marker. */
  async pollNode(node: number): Promise<void> {
    this.store.applyPollResult(await this.api.poll(node));
  }

  async ackAlarm(alarmId: number): Promise<void> {
    await this.api.ack(alarmId, this.store.session ?? 'console');
  }

  async close(): Promise<void> {
    this.stopper?.abort();
    await this.streamDone?.catch(() => undefined);
  }
}
