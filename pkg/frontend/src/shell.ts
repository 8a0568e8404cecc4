/** The live half of the widget: executes effects over HTTP, funnels both
 * NDJSON streams plus UI clicks into one ordered queue, and re-renders
 * after every reducer step. All state lives in the reducer; the shell only
 * keeps transport handles (tokens, adaptor object ids, subscriptions).
 */

import { init, step } from "./machine.js";
import { NdjsonSubscription } from "./ndjson.js";
import { project } from "./project.js";
import { html } from "./render.js";
import {
  Config,
  Effect,
  EventFrame,
  Intent,
  LoginDoc,
  NetResult,
  Participant,
  WidgetEvent,
  WidgetState,
} from "./types.js";

const STATS_INTERVAL_MS = 1000;

interface MediaHandles {
  rtp: string | null;
  ice: string | null;
  mic: string | null;
  spk: string | null;
  pipes: string[];
}

export class WidgetShell {
  private state: WidgetState;
  private queue: WidgetEvent[] = [];
  private draining = false;
  private serverToken: string | null = null;
  private adaptorToken: string | null = null;
  private media: MediaHandles = { rtp: null, ice: null, mic: null, spk: null, pipes: [] };
  private loginSub: NdjsonSubscription | null = null;
  private confSub: NdjsonSubscription | null = null;
  private adaptorSub: NdjsonSubscription | null = null;
  private statsTimer: ReturnType<typeof setInterval> | null = null;

  constructor(private readonly root: HTMLElement, config: Config) {
    this.state = init(config);
    root.addEventListener("click", (ev) => this.onClick(ev));
  }

  start(): void {
    this.dispatch({ source: "ui", intent: { action: "open" } });
  }

  stop(): void {
    this.loginSub?.stop();
    this.confSub?.stop();
    this.adaptorSub?.stop();
    if (this.statsTimer !== null) {
      clearInterval(this.statsTimer);
    }
  }

  dispatch(event: WidgetEvent): void {
    this.queue.push(event);
    if (!this.draining) {
      this.draining = true;
      void this.drain();
    }
  }

  private async drain(): Promise<void> {
    while (this.queue.length) {
      const event = this.queue.shift() as WidgetEvent;
      const out = step(this.state, event);
      this.state = out.state;
      this.render();
      for (const effect of out.effects) {
        await this.run(effect).catch(() => undefined);
      }
      this.watchCallLifecycle();
    }
    this.draining = false;
  }

  private render(): void {
    this.root.innerHTML = html(project(this.state));
  }

  // -- DOM events -------------------------------------------------------------

  private onClick(ev: Event): void {
    const target = (ev.target as HTMLElement).closest("[data-action]");
    if (!(target instanceof HTMLElement)) {
      return;
    }
    const intent = this.intentFor(target);
    if (intent) {
      this.dispatch({ source: "ui", intent });
    }
  }

  private intentFor(el: HTMLElement): Intent | null {
    switch (el.dataset.action) {
      case "click-call":
        return { action: "click-call" };
      case "call":
        return el.dataset.aor ? { action: "call", target: el.dataset.aor } : null;
      case "accept":
        return { action: "accept" };
      case "reject":
        return { action: "reject" };
      case "hangup":
        return { action: "hangup" };
      case "page-prev":
        return { action: "page", direction: -1 };
      case "page-next":
        return { action: "page", direction: 1 };
      case "send-chat": {
        const input = this.root.querySelector<HTMLInputElement>("[data-chat-input]");
        const text = input?.value.trim() ?? "";
        if (input) {
          input.value = "";
        }
        return text ? { action: "send-chat", text } : null;
      }
      default:
        return null;
    }
  }

  // -- effect execution ----------------------------------------------------------

  private async run(effect: Effect): Promise<void> {
    switch (effect.do) {
      case "server-auth":
        return this.serverAuth();
      case "adaptor-auth":
        return this.adaptorAuth();
      case "prepare-media":
        return this.prepareMedia();
      case "register":
        return this.register(effect.candidates);
      case "subscribe-login":
        this.loginSub = this.subscribeServer(`/login/${this.state.config.aor}`, "server");
        return;
      case "refresh-roster":
        return this.refreshRoster();
      case "probe":
        return this.probe(effect.target);
      case "create-call":
        return this.createCall();
      case "fetch-conference":
        return this.fetchConference(effect.callPath);
      case "subscribe-conference":
        this.confSub?.stop();
        this.confSub = this.subscribeServer(effect.callPath, "server");
        return;
      case "join-call": {
        const out = await this.server("POST", effect.callPath, effect.session);
        this.report(out.ok
          ? { op: "join", ok: true, pid: String(out.body.participant_id) }
          : { op: "join", ok: false, status: out.status });
        return;
      }
      case "notify-invite": {
        const out = await this.server(
          "POST", `/login/${effect.target}?command=notify`, {
            type: "invitation",
            conference: effect.callPath,
            return: `/login/${this.state.config.aor}`,
          });
        this.report({ op: "invite-sent", ok: out.ok });
        return;
      }
      case "notify-cancel":
        await this.server("POST", `${effect.path}?command=notify`, {
          type: "cancellation",
          conference: effect.conference,
          reason: effect.reason,
        });
        return;
      case "leave-call":
        await this.server("DELETE", `${effect.callPath}/${effect.pid}`);
        return;
      case "ice-run":
        if (this.media.ice) {
          await this.adaptor("POST", `/objects/${this.media.ice}/ice_run`,
            { remote: effect.remote });
        }
        return;
      case "wire-media":
        return this.wireMedia(effect.remote, effect.codec);
      case "teardown-media":
        return this.teardownMedia();
      case "send-chat":
        await this.server("POST", `${effect.callPath}?command=notify`,
          { type: "message", text: effect.text });
        return;
    }
  }

  private report(result: NetResult): void {
    this.dispatch({ source: "net", result });
  }

  private async serverAuth(): Promise<void> {
    const out = await this.server("POST", "/auth", {
      aor: this.state.config.aor,
      secret: this.state.config.secret,
    }, false);
    if (out.ok) {
      this.serverToken = String(out.body.token);
    }
    this.report({ op: "auth", ok: out.ok, status: out.status });
  }

  private async adaptorAuth(): Promise<void> {
    const out = await this.adaptor("POST", "/auth",
      { app_id: `webcall:${this.state.config.aor}` }, false);
    if (out.ok) {
      this.adaptorToken = String(out.body.token);
      this.subscribeAdaptor();
    }
    this.report({ op: "adaptor-auth", ok: out.ok });
  }

  private async prepareMedia(): Promise<void> {
    const rtp = await this.adaptor("POST", "/objects",
      { class: "RtpTransport", params: { port: 0 } });
    if (!rtp.ok) {
      return;
    }
    this.media.rtp = String(rtp.body.object_id);
    const ice = await this.adaptor("POST", "/objects",
      { class: "IceTransport", params: { components: [this.media.rtp] } });
    if (ice.ok) {
      this.media.ice = String(ice.body.object_id);
    }
  }

  private async register(candidates: unknown): Promise<void> {
    const out = await this.server("POST", `/login/${this.state.config.aor}`, {
      candidates,
      presence: { status: "online" },
    });
    this.report(out.ok
      ? { op: "register", ok: true, contactId: String(out.body.contact_id) }
      : { op: "register", ok: false });
  }

  private async refreshRoster(): Promise<void> {
    const seen: string[] = [];
    let offset = 0;
    for (;;) {
      const out = await this.server("GET", `/login?offset=${offset}&limit=20`);
      if (!out.ok) {
        this.report({ op: "roster-page", ok: false });
        return;
      }
      const items = (out.body.items as string[]) ?? [];
      this.report({
        op: "roster-page", ok: true,
        total: Number(out.body.total), items,
      });
      seen.push(...items);
      offset += items.length;
      if (offset >= Number(out.body.total) || items.length === 0) {
        break;
      }
    }
    const known = Object.keys(this.state.roster.entries);
    for (const aor of new Set([...seen, ...known])) {
      if (aor === this.state.config.aor) {
        continue;
      }
      const doc = await this.server("GET", `/login/${aor}`);
      this.report({
        op: "login-doc", ok: true, aor,
        doc: doc.ok ? (doc.body as unknown as LoginDoc) : null,
      });
    }
  }

  private async probe(target: string): Promise<void> {
    const out = await this.server("GET", `/login/${target}`);
    this.report({ op: "probe", ok: out.ok, target, status: out.status });
  }

  private async createCall(): Promise<void> {
    const out = await this.server("POST", "/call");
    this.report(out.ok
      ? { op: "call-created", ok: true, callPath: String(out.body.call_path) }
      : { op: "call-created", ok: false });
  }

  private async fetchConference(callPath: string): Promise<void> {
    const out = await this.server("GET", callPath);
    this.report(out.ok
      ? {
        op: "conference-doc", ok: true,
        participants: (out.body.participants ?? []) as Participant[],
      }
      : { op: "conference-doc", ok: false, status: out.status });
  }

  private async wireMedia(remote: { address: string; port: number },
                          codec: string): Promise<void> {
    try {
      if (!this.media.rtp) {
        throw new Error("no transport");
      }
      await this.adaptorOrThrow("POST", `/objects/${this.media.rtp}/set_remote`,
        { to: [remote.address, remote.port] });
      const mic = await this.adaptorOrThrow("POST", "/objects",
        { class: "Microphone", params: { codec } });
      this.media.mic = String(mic.object_id);
      const spk = await this.adaptorOrThrow("POST", "/objects",
        { class: "Speaker", params: {} });
      this.media.spk = String(spk.object_id);
      const p1 = await this.adaptorOrThrow("POST",
        `/objects/${this.media.mic}/connect`, { sink: this.media.rtp });
      const p2 = await this.adaptorOrThrow("POST",
        `/objects/${this.media.rtp}/connect`, { sink: this.media.spk });
      this.media.pipes = [String(p1.pipeline), String(p2.pipeline)];
      this.startStats();
      this.report({ op: "media-wired", ok: true });
    } catch {
      this.report({ op: "media-wired", ok: false, reason: "no-codec" });
    }
  }

  private async teardownMedia(): Promise<void> {
    this.stopStats();
    const doomed = [...this.media.pipes, this.media.mic, this.media.spk,
      this.media.ice, this.media.rtp];
    this.media = { rtp: null, ice: null, mic: null, spk: null, pipes: [] };
    for (const oid of doomed) {
      if (oid) {
        await this.adaptor("DELETE", `/objects/${oid}`).catch(() => undefined);
      }
    }
  }

  private startStats(): void {
    this.stopStats();
    this.statsTimer = setInterval(() => {
      void (async () => {
        if (!this.media.spk) {
          return;
        }
        const out = await this.adaptor("POST", `/objects/${this.media.spk}/stats`, {});
        if (out.ok) {
          this.report({
            op: "stats", ok: true,
            frames: Number(out.body.frames), gaps: Number(out.body.gaps),
          });
        }
      })();
    }, STATS_INTERVAL_MS);
  }

  private stopStats(): void {
    if (this.statsTimer !== null) {
      clearInterval(this.statsTimer);
      this.statsTimer = null;
    }
  }

  /** Close call-scoped handles once the reducer says the call is over. */
  private watchCallLifecycle(): void {
    const s = this.state.call.state;
    if ((s === "ended" || s === "failed") && this.confSub) {
      this.confSub.stop();
      this.confSub = null;
    }
    if (s !== "in-call" && this.statsTimer !== null && !this.media.spk) {
      this.stopStats();
    }
  }

  // -- transports ---------------------------------------------------------------

  private subscribeServer(resource: string, stream: "server"): NdjsonSubscription {
    const sub = new NdjsonSubscription(
      `${this.state.config.serverUrl}${resource}?command=subscribe`,
      this.serverToken ? { Authorization: `Bearer ${this.serverToken}` } : {},
      {
        onObject: (obj) => {
          if (typeof obj.type === "string") {
            this.dispatch({ source: "server", frame: obj as unknown as EventFrame });
          }
        },
        onStatus: (status) => {
          this.dispatch({
            source: "stream", stream,
            status: status === "dropped" ? "reconnecting" : status,
          });
        },
      });
    sub.start();
    return sub;
  }

  private subscribeAdaptor(): void {
    this.adaptorSub?.stop();
    const sub = new NdjsonSubscription(
      `${this.state.config.adaptorUrl}/events?token=${this.adaptorToken}`,
      {},
      {
        onObject: (obj) => {
          if (typeof obj.type === "string") {
            this.dispatch({ source: "adaptor", frame: obj as unknown as EventFrame });
          }
        },
        onStatus: (status) => {
          this.dispatch({
            source: "stream", stream: "adaptor",
            status: status === "dropped" ? "reconnecting" : status,
          });
        },
      },
      "GET");
    sub.start();
    this.adaptorSub = sub;
  }

  private server(method: string, path: string, body?: unknown,
                 withAuth = true): Promise<HttpOut> {
    const headers: Record<string, string> = {};
    if (withAuth && this.serverToken) {
      headers.Authorization = `Bearer ${this.serverToken}`;
    }
    return request(`${this.state.config.serverUrl}${path}`, method, headers, body);
  }

  private adaptor(method: string, path: string, body?: unknown,
                  withAuth = true): Promise<HttpOut> {
    const headers: Record<string, string> = {};
    if (withAuth && this.adaptorToken) {
      headers.Authorization = `Bearer ${this.adaptorToken}`;
    }
    return request(`${this.state.config.adaptorUrl}${path}`, method, headers, body);
  }

  private async adaptorOrThrow(method: string, path: string,
                               body?: unknown): Promise<Record<string, unknown>> {
    const out = await this.adaptor(method, path, body);
    if (!out.ok) {
      throw new Error(`adaptor ${path}: ${out.status}`);
    }
    return out.body;
  }
}

interface HttpOut {
  ok: boolean;
  status: number;
  body: Record<string, unknown>;
}

async function request(url: string, method: string,
                       headers: Record<string, string>,
                       body?: unknown): Promise<HttpOut> {
  try {
    if (body !== undefined) {
      headers["Content-Type"] = "application/json";
    }
    const response = await fetch(url, {
      method,
      headers,
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    let parsed: Record<string, unknown> = {};
    try {
      parsed = await response.json() as Record<string, unknown>;
    } catch {
      parsed = {};
    }
    return { ok: response.ok, status: response.status, body: parsed };
  } catch {
    return { ok: false, status: 0, body: {} };
  }
}
