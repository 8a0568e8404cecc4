/** View-model projection: everything the renderer shows, as plain data.
 *
 * The label is a lookup on the call state and nothing else, tiles come
 * straight from the last membership-change, and click-to-call can never
 * produce an incoming-call surface (the machine drops invitations in that
 * mode and the projection guards it again).
 */

import { CallState, RosterRow, Tile, ViewModel, WidgetState } from "./types.js";

export const PAGE_SIZE = 20;

export const LABELS: Record<CallState, string> = {
  "idle": "call",
  "registering": "connecting",
  "online": "call",
  "inviting": "calling",
  "invited": "incoming call",
  "joining": "connecting media",
  "in-call": "in call",
  "ended": "call ended",
  "failed": "call failed",
};

export const BUTTON_LABELS: Record<CallState, string> = {
  "idle": "call",
  "registering": "call",
  "online": "call",
  "inviting": "ringing",
  "invited": "call",
  "joining": "ringing",
  "in-call": "hang up",
  "ended": "call",
  "failed": "call",
};

export function project(state: WidgetState): ViewModel {
  const mode = state.config.mode;
  const call = state.call;
  return {
    mode,
    progress: { state: call.state, label: LABELS[call.state], reason: call.reason },
    peer: call.peer,
    button: mode === "click-to-call" ? projectButton(state) : null,
    incomingCall: projectIncoming(state),
    roster: mode === "phone" ? projectRoster(state) : null,
    tiles: projectTiles(state),
    stats: state.stats,
    chat: state.chat.slice(),
    history: mode === "click-to-call" ? state.history.slice() : null,
    panels: { ...state.panels },
    connection: { ...state.streams },
  };
}

function projectButton(state: WidgetState): ViewModel["button"] {
  const s = state.call.state;
  const busy = s === "idle" || s === "registering";
  return {
    label: BUTTON_LABELS[s],
    enabled: !busy && !state.panels.installPrompt,
  };
}

function projectIncoming(state: WidgetState): ViewModel["incomingCall"] {
  if (state.config.mode === "click-to-call") {
    return null;
  }
  if (state.call.state !== "invited" || !state.call.invitation) {
    return null;
  }
  return {
    from: state.call.invitation.from ?? "?",
    conference: state.call.invitation.conference,
  };
}

function projectRoster(state: WidgetState): ViewModel["roster"] {
  const aors = Object.keys(state.roster.entries)
    .filter((aor) => aor !== state.config.aor)
    .sort();
  const total = aors.length;
  const pageCount = Math.max(1, Math.ceil(total / PAGE_SIZE));
  const page = Math.min(state.roster.page, pageCount - 1);
  const rows: RosterRow[] = aors
    .slice(page * PAGE_SIZE, (page + 1) * PAGE_SIZE)
    .map((aor) => ({ aor, status: presenceOf(state, aor) }));
  return {
    placeholder: state.roster.loaded && total === 0,
    stale: state.streams.server !== "open" && state.roster.loaded,
    page,
    pageCount,
    total,
    rows,
  };
}

function presenceOf(state: WidgetState, aor: string): string {
  const doc = state.roster.entries[aor];
  for (const contact of doc?.contacts ?? []) {
    const status = contact.presence?.status;
    if (typeof status === "string") {
      return status;
    }
  }
  return "online";
}

function projectTiles(state: WidgetState): Tile[] {
  const call = state.call;
  const visible = call.state === "joining" || call.state === "in-call"
    || state.config.mode === "conference";
  if (!visible) {
    return [];
  }
  return call.participants.map((p) => ({
    pid: p.participant_id,
    aor: p.aor,
    self: p.aor === state.config.aor,
    level: p.aor === call.peer ? state.remoteLevel : null,
  }));
}
