/** Minimal text/event-stream client on top of fetch. Written against the
 * streams API rather than EventSource so the same code runs in the browser
 * and under vitest on node. */

export interface SseEvent {
  event: string; // "message" unless the block names one
  data: string;
}

/** Incremental parser; feed() returns the events completed by each chunk. */
export class SseParser {
  private buf = '';
  private eventName = 'message';
  private dataLines: string[] = [];

  feed(chunk: string): SseEvent[] {
    this.buf += chunk;
    const out: SseEvent[] = [];
    let nl: number;
    while ((nl = this.buf.indexOf('\n')) >= 0) {
      const line = this.buf.slice(0, nl).replace(/\r$/, '');
      this.buf = this.buf.slice(nl + 1);
      if (line === '') {
        if (this.dataLines.length > 0) {
          out.push({ event: this.eventName, data: this.dataLines.join('\n') });
        }
        this.eventName = 'message';
        this.dataLines = [];
      } else if (line.startsWith(':')) {
        continue; // keepalive comment
      } else if (line.startsWith('event:')) {
        this.eventName = line.slice(6).trim();
      } else if (line.startsWith('data:')) {
        this.dataLines.push(line.slice(5).replace(/^ /, ''));
      }
    }
    return out;
  }
}

export interface StreamHandlers {
  onEvent: (ev: SseEvent) => void;
  onClose?: (err?: unknown) => void;
}

/** Consume one stream until it ends or the signal aborts. Resolves on a
 * clean close; the caller decides whether to reconnect. */
export async function consumeStream(
  url: string,
  handlers: StreamHandlers,
  signal?: AbortSignal,
): Promise<void> {
  let err: unknown;
  try {
    const resp = await fetch(url, { signal });
    if (!resp.ok || !resp.body) {
      throw new Error(`stream request failed: ${resp.status}`);
    }
    const reader = resp.body.getReader();
    const decoder = new TextDecoder();
    const parser = new SseParser();
    for (;;) {
      const { done, value } = await reader.read();
      if (done) break;
      for (const ev of parser.feed(decoder.decode(value, { stream: true }))) {
        handlers.onEvent(ev);
      }
    }
  } catch (e) {
    err = e;
  }
  handlers.onClose?.(err);
  if (err && !signal?.aborted) throw err;
}
