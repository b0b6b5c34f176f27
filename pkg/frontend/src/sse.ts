/** Resumable server-push log stream over fetch.
 *
 * The wire format is server-sent events; this reader works in both the
 * browser and node, and reconnects from the last seen sequence number so a
 * dropped connection (or a page refresh) never loses or repeats a record.
 */

import type { LogRecord } from './types.js';

export interface SSEFrame {
  event: string;
  data: string;
}

/** Incremental SSE frame parser: feed chunks, collect complete frames. */
export class SSEParser {
  private buffer = '';

  push(chunk: string): SSEFrame[] {
    this.buffer += chunk;
    const frames: SSEFrame[] = [];
    let boundary;
    while ((boundary = this.buffer.indexOf('\n\n')) >= 0) {
      const raw = this.buffer.slice(0, boundary);
      this.buffer = this.buffer.slice(boundary + 2);
      let event = 'message';
      const data: string[] = [];
      for (const line of raw.split('\n')) {
        if (line.startsWith('event: ')) event = line.slice(7).trim();
        else if (line.startsWith('data: ')) data.push(line.slice(6));
      }
      if (data.length || event !== 'message') {
        frames.push({ event, data: data.join('\n') });
      }
    }
    return frames;
  }
}

export interface StreamHandle {
  stop(): void;
  done: Promise<void>;
}

/**
 * Follow a run's record stream, reconnecting on any interruption.
 * `onRecord` sees every record exactly once, in seq order.
 */
export function followEvents(
  urlFor: (fromSeq: number) => string,
  onRecord: (record: LogRecord) => void,
  onDone?: () => void,
): StreamHandle {
  let cursor = 0;
  let stopped = false;
  const controller = { current: new AbortController() };

  const done = (async () => {
    while (!stopped) {
      controller.current = new AbortController();
      try {
        const response = await fetch(urlFor(cursor), {
          signal: controller.current.signal,
        });
        if (!response.ok || !response.body) throw new Error(`stream ${response.status}`);
        const reader = response.body.getReader();
        const decoder = new TextDecoder();
        const parser = new SSEParser();
        for (;;) {
          const { value, done: eof } = await reader.read();
          if (eof) break;
          for (const frame of parser.push(decoder.decode(value, { stream: true }))) {
            if (frame.event === 'done') {
              if (onDone) onDone();
              return;
            }
            if (!frame.data) continue;
            const record = JSON.parse(frame.data) as LogRecord;
            if (record.seq < cursor) continue; // guard against replays
            cursor = record.seq + 1;
            onRecord(record);
          }
        }
      } catch {
        if (stopped) return;
      }
      await new Promise((resolve) => setTimeout(resolve, 150));
    }
  })();

  return {
    stop() {
      stopped = true;
      controller.current.abort();
    },
    done,
  };
}
