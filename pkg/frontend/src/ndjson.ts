/** NDJSON subscription plumbing for fetch() streaming bodies. */

export class LineDecoder {
  private buffer = "";
  private decoder = new TextDecoder();

  /** Feed one chunk; returns every complete line it finished. */
  push(chunk: Uint8Array): string[] {
    this.buffer += this.decoder.decode(chunk, { stream: true });
    const out: string[] = [];
    let at = this.buffer.indexOf("\n");
    while (at >= 0) {
      out.push(this.buffer.slice(0, at).replace(/\r$/, ""));
      this.buffer = this.buffer.slice(at + 1);
      at = this.buffer.indexOf("\n");
    }
    return out;
  }

  /** Whatever is left after the stream ends (normally empty). */
  flush(): string {
    const rest = this.buffer + this.decoder.decode();
    this.buffer = "";
    return rest;
  }
}

export interface NdjsonCallbacks {
  onObject: (obj: Record<string, unknown>) => void;
  onStatus: (status: "open" | "dropped" | "reconnecting") => void;
}

const BACKOFF_BASE_MS = 500;
const BACKOFF_CAP_MS = 15_000;

/** One long-lived subscription: POST ?command=subscribe, read frames forever,
 * reconnect with doubling backoff when the body ends or errors.
 */
export class NdjsonSubscription {
  private stopped = false;
  private attempt = 0;
  private controller: AbortController | null = null;

  constructor(
    private readonly url: string,
    private readonly headers: Record<string, string>,
    private readonly callbacks: NdjsonCallbacks,
    private readonly method: string = "POST",
  ) {}

  start(): void {
    void this.loop();
  }

  stop(): void {
    this.stopped = true;
    this.controller?.abort();
  }

  private async loop(): Promise<void> {
    while (!this.stopped) {
      try {
        await this.readOnce();
      } catch {
        // fall through to the backoff below
      }
      if (this.stopped) {
        return;
      }
      this.callbacks.onStatus(this.attempt === 0 ? "dropped" : "reconnecting");
      const wait = Math.min(BACKOFF_BASE_MS * 2 ** this.attempt, BACKOFF_CAP_MS);
      this.attempt += 1;
      await sleep(wait);
    }
  }

  private async readOnce(): Promise<void> {
    this.controller = new AbortController();
    const response = await fetch(this.url, {
      method: this.method,
      headers: this.headers,
      signal: this.controller.signal,
    });
    if (!response.ok || !response.body) {
      throw new Error(`subscribe failed: ${response.status}`);
    }
    this.attempt = 0;
    this.callbacks.onStatus("open");
    const reader = response.body.getReader();
    const lines = new LineDecoder();
    for (;;) {
      const { done, value } = await reader.read();
      if (done) {
        return;
      }
      for (const line of lines.push(value)) {
        if (!line) {
          continue;
        }
        try {
          this.callbacks.onObject(JSON.parse(line));
        } catch {
          // a torn line ends the read; the loop resubscribes
          return;
        }
      }
    }
  }
}

function sleep(ms: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}
