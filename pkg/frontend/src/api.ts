import type { AlarmInfo, ClusterInfo, PollReading } from './types.js';

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
  ) {
    super(message);
  }
}

async function asJson(resp: Response): Promise<any> {
  const body = await resp.json();
  if (!resp.ok) {
    throw new ApiError(resp.status, body.error ?? 'Error',
      body.message ?? resp.statusText);
  }
  return body;
}

/** Thin typed wrapper over the server's HTTP endpoints. The console holds
 * no authority: every action here maps 1:1 onto a server endpoint. */
export class Api {
  constructor(readonly base: string) {}

  clusters(): Promise<ClusterInfo[]> {
    return fetch(`${this.base}/clusters`).then(asJson);
  }

  alarms(): Promise<AlarmInfo[]> {
    return fetch(`${this.base}/alarms`).then(asJson);
  }

  async snapshotCsv(): Promise<string> {
    const resp = await fetch(`${this.base}/snapshot.csv`);
    if (!resp.ok) throw new ApiError(resp.status, 'Error', 'snapshot failed');
    return resp.text();
  }

  async select(session: string, cluster: number | null): Promise<void> {
    await asJson(await fetch(`${this.base}/select`, {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify({ session, cluster }),
    }));
  }

  async poll(node: number): Promise<PollReading[]> {
    const body = await asJson(await fetch(`${this.base}/poll`, {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify({ node }),
    }));
    return body.readings;
  }

  async ack(alarmId: number, session: string): Promise<AlarmInfo> {
    const body = await asJson(await fetch(`${this.base}/alarms/${alarmId}/ack`, {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify({ session }),
    }));
    return body.alarm;
  }
}
