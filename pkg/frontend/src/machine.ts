/** The widget reducer: a pure mirror of the user-agent call machine.
 *
 * step(state, event) is total. Events it cannot use in the current state
 * are dropped, never thrown on; the shell can replay any recorded log and
 * land exactly where the live run landed. Side effects come back as data
 * for the shell to execute (or for a replay to ignore).
 */

import {
  CallCore,
  CallState,
  Candidate,
  Config,
  Effect,
  EventFrame,
  Intent,
  Invitation,
  NetResult,
  Participant,
  Session,
  StepResult,
  WidgetEvent,
  WidgetState,
} from "./types.js";

export const AUDIO_CODECS = ["tone", "pcm16"];
export const HISTORY_SIZE = 10;

const FRESH_CALL: CallCore = {
  state: "idle",
  reason: null,
  peer: null,
  callPath: null,
  callId: null,
  pid: null,
  peerPid: null,
  invitation: null,
  participants: [],
  cancelled: [],
  registered: false,
  contactId: null,
  stage: null,
  sessionLocal: null,
  sessionRemote: null,
};

export function init(config: Config): WidgetState {
  return {
    config,
    opened: false,
    serverAuthed: false,
    adaptorAuthed: false,
    call: { ...FRESH_CALL },
    media: { icePhase: "none", candidates: [], wired: false },
    roster: { entries: {}, loaded: false, page: 0 },
    streams: { server: "connecting", adaptor: "connecting" },
    panels: { installPrompt: false, conferenceEnded: false },
    stats: null,
    remoteLevel: null,
    chat: [],
    history: [],
  };
}

export function step(state: WidgetState, event: WidgetEvent): StepResult {
  switch (event.source) {
    case "ui":
      return onIntent(state, event.intent);
    case "net":
      return onNet(state, event.result);
    case "server":
      return onServerFrame(state, event.frame);
    case "adaptor":
      return onAdaptorFrame(state, event.frame);
    case "stream":
      return onStream(state, event.stream, event.status);
  }
}

// -- small helpers -------------------------------------------------------------

function keep(state: WidgetState): StepResult {
  return { state, effects: [] };
}

function patchCall(state: WidgetState, patch: Partial<CallCore>): WidgetState {
  return { ...state, call: { ...state.call, ...patch } };
}

function transition(state: WidgetState, next: CallState,
                    reason: string | null = null): WidgetState {
  return patchCall(state, { state: next, reason, ...(isFinal(next) ? { stage: null } : {}) });
}

function isFinal(s: CallState): boolean {
  return s === "ended" || s === "failed";
}

/** A finished call clears the deck; the session is online again. */
function silentReset(state: WidgetState): WidgetState {
  return {
    ...patchCall(state, {
      state: "online",
      reason: null,
      peer: null,
      callPath: null,
      callId: null,
      pid: null,
      peerPid: null,
      invitation: null,
      participants: [],
      stage: null,
      sessionLocal: null,
      sessionRemote: null,
    }),
    stats: null,
    remoteLevel: null,
    chat: [],
  };
}

function localSession(state: WidgetState): Session {
  return {
    candidates: state.media.candidates,
    codecs_supported: AUDIO_CODECS.slice(),
    codecs_preferred: [AUDIO_CODECS[0]],
  };
}

/** Both sides rank by participant id and pick the lower one as offerer. */
function selectCodec(call: CallCore): string | null {
  if (!call.pid || !call.peerPid || !call.sessionLocal || !call.sessionRemote) {
    return null;
  }
  const sessions: Record<string, Session> = {
    [call.pid]: call.sessionLocal,
    [call.peerPid]: call.sessionRemote,
  };
  const ids = Object.keys(sessions).sort();
  const offer = sessions[ids[0]];
  const answer = sessions[ids[ids.length - 1]];
  const offered = offer.codecs_preferred.length
    ? offer.codecs_preferred : offer.codecs_supported;
  const chosen = offered.find((c) => answer.codecs_supported.includes(c)) ?? null;
  return chosen !== null && AUDIO_CODECS.includes(chosen) ? chosen : null;
}

function udpCandidates(session: Session | null): Candidate[] {
  return (session?.candidates ?? []).filter((c) => c.kind === "udp");
}

/** Effects that abandon whatever call machinery is currently live. */
function abandonEffects(state: WidgetState): Effect[] {
  const out: Effect[] = [];
  if (state.call.pid && state.call.callPath) {
    out.push({ do: "leave-call", callPath: state.call.callPath, pid: state.call.pid });
  }
  if (state.media.icePhase !== "none") {
    out.push({ do: "teardown-media" });
  }
  return out;
}

function dropMedia(state: WidgetState): WidgetState {
  return { ...state, media: { icePhase: "none", candidates: [], wired: false } };
}

// -- intents -------------------------------------------------------------------

function onIntent(state: WidgetState, intent: Intent): StepResult {
  switch (intent.action) {
    case "open":
      return onOpen(state);
    case "click-call":
      return onClickCall(state);
    case "call":
      return dial(state, intent.target, false);
    case "accept":
      return onAccept(state);
    case "reject":
      return state.call.state === "invited" ? decline(state, "rejected") : keep(state);
    case "hangup":
      return onHangup(state);
    case "send-chat":
      return onSendChat(state, intent.text);
    case "page":
      return onPage(state, intent.direction);
  }
}

function onOpen(state: WidgetState): StepResult {
  if (state.opened || state.call.state !== "idle") {
    return keep(state);
  }
  return {
    state: transition({ ...state, opened: true }, "registering"),
    effects: [{ do: "server-auth" }, { do: "adaptor-auth" }],
  };
}

/** The one click-to-call button: dial, and hang up on the second click. */
function onClickCall(state: WidgetState): StepResult {
  const target = state.config.target;
  if (state.panels.installPrompt || !target) {
    return keep(state);
  }
  const s = state.call.state;
  if (s === "inviting" || s === "joining" || s === "in-call") {
    return onHangup(state);
  }
  return dial(state, target, true);
}

function dial(state: WidgetState, target: string, remember: boolean): StepResult {
  if (state.panels.installPrompt) {
    return keep(state);
  }
  let next = state;
  if (isFinal(next.call.state) && next.call.registered) {
    next = silentReset(next);
  }
  if (next.call.state !== "online") {
    return keep(state);
  }
  if (remember) {
    next = { ...next, history: [...next.history, target].slice(-HISTORY_SIZE) };
  }
  next = patchCall(next, { peer: target, stage: "caller-probe" });
  return { state: next, effects: [{ do: "probe", target }] };
}

function onAccept(state: WidgetState): StepResult {
  if (state.call.state !== "invited" || !state.call.invitation) {
    return keep(state);
  }
  if (state.call.cancelled.includes(state.call.invitation.conference)) {
    return { state: transition(state, "ended", "cancelled"), effects: [] };
  }
  return ensureMediaThen(state, "callee");
}

/** Reach a gathered ICE agent, then run the side-specific join sequence. */
function ensureMediaThen(state: WidgetState, side: "caller" | "callee"): StepResult {
  if (state.media.icePhase === "gathered") {
    return side === "caller" ? startCallerJoin(state) : startCalleeJoin(state);
  }
  const stage = side === "caller" ? "caller-media" : "callee-media";
  const next = dropMedia(patchCall(state, { stage }));
  return { state: next, effects: [{ do: "prepare-media" }] };
}

function startCallerJoin(state: WidgetState): StepResult {
  const callPath = state.call.callPath;
  if (!callPath) {
    return keep(state);
  }
  const session = localSession(state);
  const next = patchCall(state, { stage: "caller-join", sessionLocal: session });
  return { state: next, effects: [{ do: "join-call", callPath, session }] };
}

function startCalleeJoin(state: WidgetState): StepResult {
  const callPath = state.call.callPath;
  if (!callPath) {
    return keep(state);
  }
  const next = patchCall(state, { stage: "callee-join" });
  return {
    state: next,
    effects: [
      { do: "subscribe-conference", callPath },
      { do: "fetch-conference", callPath },
    ],
  };
}

function onHangup(state: WidgetState): StepResult {
  const s = state.call.state;
  if (s === "in-call" || s === "joining") {
    const effects = abandonEffects(state);
    return { state: dropMedia(transition(state, "ended", "hangup")), effects };
  }
  if (s === "inviting") {
    const effects = abandonEffects(state);
    if (state.call.peer && state.call.callPath) {
      effects.push({
        do: "notify-cancel",
        path: `/login/${state.call.peer}`,
        conference: state.call.callPath,
        reason: "cancelled",
      });
    }
    return { state: dropMedia(transition(state, "ended", "cancelled")), effects };
  }
  if (s === "invited") {
    return decline(state, "rejected");
  }
  return keep(state);
}

function decline(state: WidgetState, reason: string): StepResult {
  const invitation = state.call.invitation;
  const effects: Effect[] = [];
  if (invitation?.return) {
    effects.push({
      do: "notify-cancel",
      path: invitation.return,
      conference: invitation.conference,
      reason,
    });
  }
  return { state: transition(state, "ended", reason), effects };
}

function onSendChat(state: WidgetState, text: string): StepResult {
  if (state.call.state !== "in-call" || !state.call.callPath || !text) {
    return keep(state);
  }
  return {
    state,
    effects: [{ do: "send-chat", callPath: state.call.callPath, text }],
  };
}

function onPage(state: WidgetState, direction: 1 | -1): StepResult {
  const page = Math.max(0, state.roster.page + direction);
  return keep({ ...state, roster: { ...state.roster, page } });
}

// -- request outcomes ------------------------------------------------------------

function onNet(state: WidgetState, result: NetResult): StepResult {
  switch (result.op) {
    case "auth":
      if (!result.ok) {
        return { state: transition(state, "failed", "auth"), effects: [] };
      }
      return bothAuthed({ ...state, serverAuthed: true });
    case "adaptor-auth":
      if (!result.ok) {
        const next = { ...state, panels: { ...state.panels, installPrompt: true } };
        return { state: transition(next, "failed", "install-hint"), effects: [] };
      }
      return bothAuthed({ ...state, adaptorAuthed: true });
    case "register":
      return onRegistered(state, result.ok, result.contactId);
    case "roster-page":
      if (!result.ok) {
        return keep(state);
      }
      return keep({ ...state, roster: { ...state.roster, loaded: true } });
    case "login-doc":
      return onLoginDoc(state, result.aor, result.ok ? result.doc ?? null : null);
    case "probe":
      return onProbe(state, result.ok, result.status);
    case "call-created":
      return onCallCreated(state, result.ok, result.callPath);
    case "conference-doc":
      return onConferenceDoc(state, result);
    case "join":
      return onJoined(state, result.ok, result.pid);
    case "invite-sent":
      return onInviteSent(state, result.ok);
    case "media-wired":
      return onMediaWired(state, result.ok, result.reason);
    case "stats":
      if (!result.ok) {
        return keep(state);
      }
      return keep({
        ...state,
        stats: { frames: result.frames ?? 0, gaps: result.gaps ?? 0 },
      });
  }
}

function bothAuthed(state: WidgetState): StepResult {
  if (state.serverAuthed && state.adaptorAuthed && state.call.state === "registering"
      && state.media.icePhase === "none") {
    return { state, effects: [{ do: "prepare-media" }] };
  }
  return keep(state);
}

function onRegistered(state: WidgetState, ok: boolean, contactId?: string): StepResult {
  if (state.call.state !== "registering") {
    return keep(state);
  }
  if (!ok) {
    return { state: transition(state, "failed", "register"), effects: [] };
  }
  let next = transition(
    patchCall(state, { registered: true, contactId: contactId ?? null }), "online");
  const effects: Effect[] = [{ do: "subscribe-login" }];
  if (next.config.mode === "phone") {
    effects.push({ do: "refresh-roster" });
  } else if (next.config.mode === "conference" && next.config.target) {
    const callPath = next.config.target;
    next = patchCall(next, {
      callPath,
      callId: callPath.split("/").pop() ?? callPath,
      stage: "conf-fetch",
    });
    effects.push({ do: "subscribe-conference", callPath });
    effects.push({ do: "fetch-conference", callPath });
  }
  return { state: next, effects };
}

function onLoginDoc(state: WidgetState, aor: string, doc: { aor: string; contacts: unknown[] } | null): StepResult {
  if (aor === state.config.aor) {
    return keep(state);
  }
  const entries = { ...state.roster.entries };
  if (doc === null) {
    delete entries[aor];
  } else {
    entries[aor] = doc as WidgetState["roster"]["entries"][string];
  }
  return keep({ ...state, roster: { ...state.roster, entries, loaded: true } });
}

function onProbe(state: WidgetState, ok: boolean, status?: number): StepResult {
  if (state.call.stage !== "caller-probe") {
    return keep(state);
  }
  if (!ok) {
    const reason = status === 404 ? "offline" : "error";
    return { state: transition(state, "failed", reason), effects: [] };
  }
  return {
    state: patchCall(state, { stage: "caller-call" }),
    effects: [{ do: "create-call" }],
  };
}

function onCallCreated(state: WidgetState, ok: boolean, callPath?: string): StepResult {
  if (state.call.stage !== "caller-call") {
    return keep(state);
  }
  if (!ok || !callPath) {
    return { state: transition(state, "failed", "error"), effects: [] };
  }
  const next = patchCall(state, {
    callPath,
    callId: callPath.split("/").pop() ?? callPath,
  });
  return ensureMediaThen(next, "caller");
}

function onConferenceDoc(
  state: WidgetState,
  result: { ok: boolean; status?: number; participants?: Participant[] },
): StepResult {
  const stage = state.call.stage;
  if (stage === "callee-join") {
    if (!result.ok) {
      return { state: transition(state, "ended", "cancelled"), effects: [] };
    }
    const peer = (result.participants ?? []).find((p) => p.aor !== state.config.aor);
    if (!peer) {
      return { state: transition(state, "ended", "cancelled"), effects: [] };
    }
    const session = localSession(state);
    const next = patchCall(state, {
      sessionRemote: peer.session,
      peerPid: peer.participant_id,
      sessionLocal: session,
    });
    return {
      state: next,
      effects: [{ do: "join-call", callPath: next.call.callPath as string, session }],
    };
  }
  if (stage === "conf-fetch") {
    if (!result.ok) {
      if (result.status === 404) {
        const next = patchCall(
          { ...state, panels: { ...state.panels, conferenceEnded: true } },
          { stage: null, callPath: null, callId: null });
        return keep(next);
      }
      return { state: transition(state, "failed", "error"), effects: [] };
    }
    const peer = (result.participants ?? []).find((p) => p.aor !== state.config.aor);
    const session = localSession(state);
    const next = patchCall(state, {
      stage: "conf-join",
      sessionLocal: session,
      sessionRemote: peer?.session ?? null,
      peerPid: peer?.participant_id ?? null,
      peer: peer?.aor ?? null,
    });
    return {
      state: next,
      effects: [{ do: "join-call", callPath: next.call.callPath as string, session }],
    };
  }
  return keep(state);
}

function onJoined(state: WidgetState, ok: boolean, pid?: string): StepResult {
  const stage = state.call.stage;
  if (stage === "caller-join") {
    if (!ok) {
      return { state: transition(state, "failed", "error"), effects: [] };
    }
    const next = patchCall(state, { pid: pid ?? null });
    return {
      state: next,
      effects: [
        { do: "subscribe-conference", callPath: next.call.callPath as string },
        {
          do: "notify-invite",
          target: next.call.peer as string,
          callPath: next.call.callPath as string,
        },
      ],
    };
  }
  if (stage === "callee-join") {
    if (!ok) {
      return { state: transition(state, "ended", "cancelled"), effects: [] };
    }
    const next = transition(patchCall(state, { pid: pid ?? null, stage: null }), "joining");
    return { state: next, effects: [{ do: "ice-run", remote: udpCandidates(next.call.sessionRemote) }] };
  }
  if (stage === "conf-join") {
    if (!ok) {
      return { state: transition(state, "failed", "error"), effects: [] };
    }
    let next = patchCall(state, { pid: pid ?? null, stage: null });
    if (next.call.sessionRemote) {
      next = transition(next, "joining");
      return { state: next, effects: [{ do: "ice-run", remote: udpCandidates(next.call.sessionRemote) }] };
    }
    return { state: transition(next, "in-call"), effects: [] };
  }
  return keep(state);
}

function onInviteSent(state: WidgetState, ok: boolean): StepResult {
  if (state.call.stage !== "caller-join") {
    return keep(state);
  }
  if (!ok) {
    // callee dropped off between the probe and the invite
    const effects = abandonEffects(state);
    return { state: dropMedia(transition(state, "failed", "offline")), effects };
  }
  return { state: transition(patchCall(state, { stage: null }), "inviting"), effects: [] };
}

function onMediaWired(state: WidgetState, ok: boolean, reason?: string): StepResult {
  if (state.call.state === "joining") {
    if (!ok) {
      return {
        state: dropMedia(transition(state, "failed", reason ?? "no-codec")),
        effects: [{ do: "teardown-media" }],
      };
    }
    const next = { ...state, media: { ...state.media, wired: true } };
    return { state: transition(next, "in-call"), effects: [] };
  }
  if (state.call.state === "in-call" && ok) {
    return keep({ ...state, media: { ...state.media, wired: true } });
  }
  return keep(state);
}

// -- server frames ----------------------------------------------------------------

function onServerFrame(state: WidgetState, frame: EventFrame): StepResult {
  if (frame.resource === `/login/${state.config.aor}`) {
    if (frame.type === "invitation") {
      return onInvitation(state, frame.payload as unknown as Invitation);
    }
    if (frame.type === "cancellation") {
      return onCancellation(state, frame.payload);
    }
    return keep(state);
  }
  if (state.call.callPath && frame.resource === state.call.callPath) {
    if (frame.type === "membership-change") {
      return onMembership(state, frame.payload);
    }
    if (frame.type === "message") {
      return onChatFrame(state, frame.payload);
    }
    return keep(state);
  }
  return keep(state);
}

function onInvitation(state: WidgetState, payload: Invitation): StepResult {
  // click-to-call is meant to dial one number, not receive
  if (state.config.mode === "click-to-call") {
    return keep(state);
  }
  if (!payload.conference || typeof payload.conference !== "string") {
    return keep(state);
  }
  let next = state;
  if (isFinal(next.call.state) && next.call.registered) {
    next = silentReset(next);
  }
  if (next.call.state === "online") {
    return keep(becomeInvited(next, payload));
  }
  if (next.call.state === "inviting" && payload.from === next.call.peer) {
    return resolveGlare(next, payload);
  }
  if (payload.conference !== next.call.callPath && payload.return) {
    return {
      state: next,
      effects: [{
        do: "notify-cancel",
        path: payload.return,
        conference: payload.conference,
        reason: "busy",
      }],
    };
  }
  return keep(next);
}

function becomeInvited(state: WidgetState, payload: Invitation): WidgetState {
  const callPath = payload.conference;
  return transition(patchCall(state, {
    invitation: payload,
    peer: payload.from ?? null,
    callPath,
    callId: callPath.split("/").pop() ?? callPath,
    stage: null,
  }), "invited");
}

/** Crossed calls: the conference with the smaller id wins on both sides. */
function resolveGlare(state: WidgetState, payload: Invitation): StepResult {
  const theirs = payload.conference.split("/").pop() ?? payload.conference;
  if (!state.call.callId || theirs >= state.call.callId) {
    return keep(state); // our call has the smaller id; they will fold
  }
  const effects = abandonEffects(state);
  let next = silentReset(dropMedia(state));
  next = becomeInvited(next, payload);
  const accepted = onAccept(next);
  return { state: accepted.state, effects: [...effects, ...accepted.effects] };
}

function onCancellation(state: WidgetState, payload: Record<string, unknown>): StepResult {
  const conference = typeof payload.conference === "string" ? payload.conference : null;
  let next = state;
  if (conference) {
    next = patchCall(next, { cancelled: [...next.call.cancelled, conference] });
  }
  const reason = typeof payload.reason === "string" ? payload.reason : "cancelled";
  if (next.call.state === "invited" && next.call.invitation
      && next.call.invitation.conference === conference) {
    return { state: transition(next, "ended", "cancelled"), effects: [] };
  }
  if (conference && conference === next.call.callPath
      && ["inviting", "joining", "in-call"].includes(next.call.state)) {
    const effects = abandonEffects(next);
    return { state: dropMedia(transition(next, "ended", reason)), effects };
  }
  return keep(next);
}

function onMembership(state: WidgetState, payload: Record<string, unknown>): StepResult {
  const participants = Array.isArray(payload.participants)
    ? (payload.participants as Participant[]) : [];
  const action = payload.action;
  const aor = typeof payload.aor === "string" ? payload.aor : null;
  let next = patchCall(state, { participants });

  if (action === "join" && aor && aor !== next.config.aor) {
    if (next.call.state === "inviting") {
      const entry = participants.find(
        (p) => p.participant_id === payload.participant_id);
      if (!entry) {
        return keep(next);
      }
      next = transition(patchCall(next, {
        sessionRemote: entry.session,
        peerPid: entry.participant_id,
      }), "joining");
      return { state: next, effects: [{ do: "ice-run", remote: udpCandidates(entry.session) }] };
    }
    if (next.config.mode === "conference" && next.call.state === "in-call"
        && !next.call.peerPid) {
      const entry = participants.find(
        (p) => p.participant_id === payload.participant_id);
      if (entry && next.media.icePhase === "gathered") {
        next = patchCall(next, {
          sessionRemote: entry.session,
          peerPid: entry.participant_id,
          peer: entry.aor,
        });
        return { state: next, effects: [{ do: "ice-run", remote: udpCandidates(entry.session) }] };
      }
    }
    return keep(next);
  }

  if (action === "leave" && aor && aor === next.call.peer
      && ["joining", "in-call"].includes(next.call.state)) {
    if (next.config.mode === "conference") {
      const effects: Effect[] = next.media.icePhase !== "none"
        ? [{ do: "teardown-media" }] : [];
      next = dropMedia(patchCall(next, { peer: null, peerPid: null, sessionRemote: null }));
      return { state: { ...next, remoteLevel: null }, effects };
    }
    const effects = abandonEffects(next);
    return { state: dropMedia(transition(next, "ended", "peer-hangup")), effects };
  }
  return keep(next);
}

function onChatFrame(state: WidgetState, payload: Record<string, unknown>): StepResult {
  const text = typeof payload.text === "string" ? payload.text : null;
  const from = typeof payload.from === "string" ? payload.from : "?";
  if (text === null) {
    return keep(state);
  }
  return keep({ ...state, chat: [...state.chat, { from, text }] });
}

// -- adaptor frames ------------------------------------------------------------------

function onAdaptorFrame(state: WidgetState, frame: EventFrame): StepResult {
  if (frame.type === "ice-phase") {
    return onIcePhase(state, frame.payload);
  }
  if (frame.type === "media-frame") {
    const data = typeof frame.payload.data === "string" ? frame.payload.data : "";
    return keep({ ...state, remoteLevel: levelOf(data) });
  }
  return keep(state);
}

function onIcePhase(state: WidgetState, payload: Record<string, unknown>): StepResult {
  const phase = payload.phase;
  if (typeof phase !== "string") {
    return keep(state);
  }
  if (phase === "gathering" || phase === "checking") {
    return keep({ ...state, media: { ...state.media, icePhase: phase } });
  }
  if (phase === "gathered") {
    const candidates = Array.isArray(payload.candidates)
      ? (payload.candidates as Candidate[]) : [];
    const next = { ...state, media: { ...state.media, icePhase: "gathered" as const, candidates } };
    return afterGathered(next);
  }
  if (phase === "connected") {
    const next = { ...state, media: { ...state.media, icePhase: "connected" as const } };
    return afterConnected(next, payload);
  }
  if (phase === "failed") {
    const next = { ...state, media: { ...state.media, icePhase: "failed" as const } };
    if (next.call.state === "joining") {
      return {
        state: dropMedia(transition(next, "failed", "no-path")),
        effects: [{ do: "teardown-media" }],
      };
    }
    return keep(next);
  }
  return keep(state);
}

function afterGathered(state: WidgetState): StepResult {
  if (state.call.state === "registering") {
    return { state, effects: [{ do: "register", candidates: state.media.candidates }] };
  }
  if (state.call.stage === "caller-media") {
    return startCallerJoin(state);
  }
  if (state.call.stage === "callee-media") {
    return startCalleeJoin(state);
  }
  return keep(state);
}

function afterConnected(state: WidgetState, payload: Record<string, unknown>): StepResult {
  const okState = state.call.state === "joining"
    || (state.config.mode === "conference" && state.call.state === "in-call");
  if (!okState || state.media.wired) {
    return keep(state);
  }
  const pair = payload.selected_pair as
    { remote?: { address?: string; port?: number } } | undefined;
  const remote = pair?.remote;
  if (!remote || typeof remote.address !== "string" || typeof remote.port !== "number") {
    return keep(state);
  }
  const codec = selectCodec(state.call);
  if (codec === null) {
    return {
      state: dropMedia(transition(state, "failed", "no-codec")),
      effects: [{ do: "teardown-media" }],
    };
  }
  return {
    state,
    effects: [{
      do: "wire-media",
      remote: { address: remote.address, port: remote.port },
      codec,
    }],
  };
}

/** Mean deviation from silence, 0..1; enough for a synthesized waveform bar. */
export function levelOf(b64: string): number | null {
  if (!b64) {
    return null;
  }
  let raw: string;
  try {
    raw = atob(b64);
  } catch {
    return null;
  }
  if (raw.length === 0) {
    return null;
  }
  let total = 0;
  for (let i = 0; i < raw.length; i += 1) {
    total += Math.abs(raw.charCodeAt(i) - 128);
  }
  return Math.round((total / raw.length / 128) * 100) / 100;
}

// -- streams -------------------------------------------------------------------------

function onStream(state: WidgetState, stream: "server" | "adaptor",
                  status: WidgetState["streams"]["server"]): StepResult {
  const was = state.streams[stream];
  const next = { ...state, streams: { ...state.streams, [stream]: status } };
  if (stream === "server" && was === "reconnecting" && status === "open"
      && next.config.mode === "phone" && next.call.registered) {
    // resubscribed after a gap; pull the roster back to truth
    return { state: next, effects: [{ do: "refresh-roster" }] };
  }
  return keep(next);
}
