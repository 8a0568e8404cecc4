/** Shared vocabulary: config, wire frames, reducer events, effects, view model. */

export type WidgetMode = "click-to-call" | "phone" | "conference";

/** Host-page configuration, snake_case to match the embed snippet. */
export interface WidgetConfig {
  server_url: string;
  adaptor_url?: string;
  mode?: WidgetMode;
  /** click-to-call: the address to dial; conference: the /call/{id} path to join. */
  target?: string;
  aor?: string;
  secret?: string;
}

export interface Config {
  serverUrl: string;
  adaptorUrl: string;
  mode: WidgetMode;
  target: string | null;
  aor: string;
  secret: string;
}

export const DEFAULT_ADAPTOR_URL = "http://127.0.0.1:9191";

export function normalizeConfig(raw: WidgetConfig): Config {
  const mode = raw.mode ?? "click-to-call";
  if (mode !== "click-to-call" && mode !== "phone" && mode !== "conference") {
    throw new Error(`unknown widget mode ${String(mode)}`);
  }
  if (mode !== "phone" && !raw.target) {
    throw new Error(`${mode} mode needs a target`);
  }
  return {
    serverUrl: (raw.server_url ?? "").replace(/\/+$/, ""),
    adaptorUrl: (raw.adaptor_url ?? DEFAULT_ADAPTOR_URL).replace(/\/+$/, ""),
    mode,
    target: raw.target ?? null,
    aor: raw.aor ?? "",
    secret: raw.secret ?? "",
  };
}

// -- wire shapes -------------------------------------------------------------

/** One NDJSON frame as both services emit it. */
export interface EventFrame {
  seq: number;
  type: string;
  resource: string;
  timestamp: number;
  payload: Record<string, unknown>;
}

export interface Candidate {
  kind: string;
  address: string;
  port: number;
  priority: number;
}

export interface Session {
  candidates: Candidate[];
  codecs_supported: string[];
  codecs_preferred: string[];
}

export interface Participant {
  participant_id: string;
  aor: string;
  session: Session;
  joined_at: number;
}

export interface ContactDoc {
  contact_id: string;
  candidates: Candidate[];
  presence: Record<string, unknown>;
  expires_at: number;
}

export interface LoginDoc {
  aor: string;
  contacts: ContactDoc[];
}

export interface Invitation {
  from: string;
  conference: string;
  return?: string;
}

// -- reducer input -----------------------------------------------------------

export type Intent =
  | { action: "open" }
  | { action: "click-call" }
  | { action: "call"; target: string }
  | { action: "accept" }
  | { action: "reject" }
  | { action: "hangup" }
  | { action: "send-chat"; text: string }
  | { action: "page"; direction: 1 | -1 };

/** Outcome of one HTTP request the shell ran on the widget's behalf. */
export type NetResult =
  | { op: "auth"; ok: boolean; status?: number }
  | { op: "adaptor-auth"; ok: boolean }
  | { op: "register"; ok: boolean; contactId?: string }
  | { op: "roster-page"; ok: boolean; total?: number; items?: string[] }
  | { op: "login-doc"; ok: boolean; aor: string; doc?: LoginDoc | null }
  | { op: "probe"; ok: boolean; target: string; status?: number }
  | { op: "call-created"; ok: boolean; callPath?: string }
  | { op: "conference-doc"; ok: boolean; status?: number; participants?: Participant[] }
  | { op: "join"; ok: boolean; pid?: string; status?: number }
  | { op: "invite-sent"; ok: boolean }
  | { op: "media-wired"; ok: boolean; reason?: string }
  | { op: "stats"; ok: boolean; frames?: number; gaps?: number };

export type StreamName = "server" | "adaptor";
export type StreamHealth = "connecting" | "open" | "reconnecting";

export type WidgetEvent =
  | { source: "ui"; intent: Intent }
  | { source: "server"; frame: EventFrame }
  | { source: "adaptor"; frame: EventFrame }
  | { source: "net"; result: NetResult }
  | { source: "stream"; stream: StreamName; status: StreamHealth };

// -- reducer output ----------------------------------------------------------

export type Effect =
  | { do: "server-auth" }
  | { do: "adaptor-auth" }
  | { do: "prepare-media" }
  | { do: "register"; candidates: Candidate[] }
  | { do: "subscribe-login" }
  | { do: "refresh-roster" }
  | { do: "probe"; target: string }
  | { do: "create-call" }
  | { do: "fetch-conference"; callPath: string }
  | { do: "subscribe-conference"; callPath: string }
  | { do: "join-call"; callPath: string; session: Session }
  | { do: "notify-invite"; target: string; callPath: string }
  | { do: "notify-cancel"; path: string; conference: string; reason: string }
  | { do: "leave-call"; callPath: string; pid: string }
  | { do: "ice-run"; remote: Candidate[] }
  | { do: "wire-media"; remote: { address: string; port: number }; codec: string }
  | { do: "teardown-media" }
  | { do: "send-chat"; callPath: string; text: string };

// -- state -------------------------------------------------------------------

export type CallState =
  | "idle" | "registering" | "online" | "inviting" | "invited"
  | "joining" | "in-call" | "ended" | "failed";

export type Stage =
  | null
  | "caller-probe" | "caller-call" | "caller-media" | "caller-join"
  | "callee-media" | "callee-join"
  | "conf-fetch" | "conf-join";

export interface CallCore {
  state: CallState;
  reason: string | null;
  peer: string | null;
  callPath: string | null;
  callId: string | null;
  pid: string | null;
  peerPid: string | null;
  invitation: Invitation | null;
  participants: Participant[];
  cancelled: string[];
  registered: boolean;
  contactId: string | null;
  stage: Stage;
  sessionLocal: Session | null;
  sessionRemote: Session | null;
}

export type IcePhase = "none" | "new" | "gathering" | "gathered" | "checking"
  | "connected" | "failed";

export interface MediaState {
  icePhase: IcePhase;
  candidates: Candidate[];
  wired: boolean;
}

export interface RosterState {
  /** aor -> latest login document; an aor disappears when it goes offline. */
  entries: Record<string, LoginDoc>;
  loaded: boolean;
  page: number;
}

export interface WidgetState {
  config: Config;
  opened: boolean;
  serverAuthed: boolean;
  adaptorAuthed: boolean;
  call: CallCore;
  media: MediaState;
  roster: RosterState;
  streams: { server: StreamHealth; adaptor: StreamHealth };
  panels: { installPrompt: boolean; conferenceEnded: boolean };
  stats: { frames: number; gaps: number } | null;
  remoteLevel: number | null;
  chat: { from: string; text: string }[];
  history: string[];
}

export interface StepResult {
  state: WidgetState;
  effects: Effect[];
}

// -- view model ----------------------------------------------------------------

export interface RosterRow {
  aor: string;
  status: string;
}

export interface Tile {
  pid: string;
  aor: string;
  self: boolean;
  level: number | null;
}

export interface ViewModel {
  mode: WidgetMode;
  progress: { state: CallState; label: string; reason: string | null };
  peer: string | null;
  button: { label: string; enabled: boolean } | null;
  incomingCall: { from: string; conference: string } | null;
  roster: {
    placeholder: boolean;
    stale: boolean;
    page: number;
    pageCount: number;
    total: number;
    rows: RosterRow[];
  } | null;
  tiles: Tile[];
  stats: { frames: number; gaps: number } | null;
  chat: { from: string; text: string }[];
  history: string[] | null;
  panels: { installPrompt: boolean; conferenceEnded: boolean };
  connection: { server: StreamHealth; adaptor: StreamHealth };
}
