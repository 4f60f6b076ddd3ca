/** Shapes of the JSON the monitoring server speaks over HTTP and SSE. */

export interface ClusterInfo {
  cluster: number;
  head: number;
  members: number[];
  live: boolean;
}

export interface ReadingEvent {
  t: number; // milliseconds of sim time, or an ISO stamp in live mode
  node: number;
  kind: string;
  value: number;
}

export interface PollReading {
  t: number;
  node: number;
  kind: string;
  value: number;
  seq: number;
}

export type AlarmState = 'active' | 'acknowledged' | 'cleared';

export interface AlarmInfo {
  id: number;
  rule: string;
  kind: string;
  node: number;
  tripped_at: number;
  state: AlarmState;
  ack_session: string | null;
  ack_at: number | null;
}

export interface AlarmEvent {
  transition: 'tripped' | 'acknowledged' | 'cleared';
  alarm: AlarmInfo;
}
