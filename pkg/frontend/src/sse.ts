// Server-sent-events client over fetch streaming. Works in browsers and in
// node (no EventSource dependency), reconnects automatically, and resumes
// from the last delivered sequence number so a dropped connection is healed
// by replay instead of losing or duplicating events.

import { TERMINAL_PHASES, type MeetingEventData } from './types.js';

export interface SseFrame {
  event: string;
  data: string;
  id?: string;
}

/** Incremental text/event-stream parser; feed it decoded chunks. */
export function createSseParser(onFrame: (frame: SseFrame) => void): (chunk: string) => void {
  let buffer = '';
  return (chunk: string) => {
    buffer += chunk.replace(/\r\n/g, '\n');
    let boundary: number;
    while ((boundary = buffer.indexOf('\n\n')) !== -1) {
      const raw = buffer.slice(0, boundary);
      buffer = buffer.slice(boundary + 2);
      let event = 'message';
      let id: string | undefined;
      const data: string[] = [];
      for (const line of raw.split('\n')) {
        if (!line || line.startsWith(':')) continue;
        const colon = line.indexOf(':');
        if (colon === -1) continue;
        const field = line.slice(0, colon);
        const value = line.slice(colon + 1).replace(/^ /, '');
        if (field === 'event') event = value;
        else if (field === 'data') data.push(value);
        else if (field === 'id') id = value;
      }
      if (data.length > 0) onFrame({ event, data: data.join('\n'), id });
    }
  };
}

export type StreamState = 'connecting' | 'open' | 'reconnecting' | 'closed';

export interface StreamOptions {
  /** Events endpoint URL (without the from_seq query parameter). */
  url: string;
  onEvent: (event: MeetingEventData) => void;
  onState?: (state: StreamState) => void;
  fromSeq?: number;
  fetchImpl?: typeof fetch;
  retryDelayMs?: number;
}

export class EventStreamClient {
  private lastSeq: number;
  private stopped = false;
  private controller: AbortController | null = null;
  private readonly fetchImpl: typeof fetch;
  private readonly retryDelayMs: number;

  constructor(private readonly options: StreamOptions) {
    this.lastSeq = (options.fromSeq ?? 1) - 1;
    this.fetchImpl = options.fetchImpl ?? fetch;
    this.retryDelayMs = options.retryDelayMs ?? 1000;
  }

  get lastDeliveredSeq(): number {
    return this.lastSeq;
  }

  /** Runs until the terminal event arrives or stop() is called. */
  async start(): Promise<void> {
    let attempts = 0;
    while (!this.stopped) {
      this.options.onState?.(attempts === 0 ? 'connecting' : 'reconnecting');
      attempts += 1;
      try {
        const done = await this.connectOnce();
        if (done) break;
      } catch {
        if (this.stopped) break;
      }
      if (this.stopped) break;
      await sleep(this.retryDelayMs);
    }
    this.options.onState?.('closed');
  }

  /** One connection attempt; resolves true when the meeting ended. */
  private async connectOnce(): Promise<boolean> {
    this.controller = new AbortController();
    const url = `${this.options.url}?from_seq=${this.lastSeq + 1}`;
    const response = await this.fetchImpl(url, {
      signal: this.controller.signal,
      headers: { accept: 'text/event-stream' },
    });
    if (!response.ok || !response.body) {
      throw new Error(`stream request failed: HTTP ${response.status}`);
    }
    this.options.onState?.('open');
    let sawTerminal = false;
    const parse = createSseParser((frame) => {
      if (frame.event !== 'message') return; // overflow hints trigger a reconnect
      const event = JSON.parse(frame.data) as MeetingEventData;
      if (typeof event.seq !== 'number' || event.seq <= this.lastSeq) return;
      this.lastSeq = event.seq;
      this.options.onEvent(event);
      if (TERMINAL_PHASES.has(event.phase)) sawTerminal = true;
    });
    const reader = response.body.getReader();
    const decoder = new TextDecoder();
    try {
      for (;;) {
        const { done, value } = await reader.read();
        if (value) parse(decoder.decode(value, { stream: true }));
        if (sawTerminal) return true;
        if (done) return sawTerminal;
      }
    } finally {
      reader.cancel().catch(() => undefined);
    }
  }

  stop(): void {
    this.stopped = true;
    this.controller?.abort();
  }

  /** Drops the underlying connection without stopping the client, as a real
   *  network failure would; the client then reconnects with from_seq. */
  forceDisconnect(): void {
    this.controller?.abort();
  }
}

function sleep(ms: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}
