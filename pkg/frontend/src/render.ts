/** View model -> HTML string. Pure; the shell assigns it to innerHTML and
 * routes clicks by data-action, so rendering stays testable without a DOM.
 */

import { ViewModel } from "./types.js";

export function esc(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export function html(vm: ViewModel): string {
  const parts: string[] = [`<div class="webcall" data-mode="${esc(vm.mode)}">`];
  parts.push(header(vm));
  if (vm.panels.installPrompt) {
    parts.push(installPrompt());
  }
  if (vm.panels.conferenceEnded) {
    parts.push(`<div class="panel" data-surface="conference-ended">`
      + `this conference has ended</div>`);
  }
  if (vm.incomingCall) {
    parts.push(incomingCall(vm));
  }
  if (vm.button) {
    parts.push(clickToCall(vm));
  }
  if (vm.roster) {
    parts.push(roster(vm));
  }
  if (vm.tiles.length) {
    parts.push(tiles(vm));
  }
  if (vm.stats) {
    parts.push(`<div class="stats" data-surface="stats">`
      + `frames ${vm.stats.frames} · gaps ${vm.stats.gaps}</div>`);
  }
  if (vm.mode !== "click-to-call" && (vm.progress.state === "in-call" || vm.chat.length)) {
    parts.push(chat(vm));
  }
  parts.push("</div>");
  return parts.join("\n");
}

function header(vm: ViewModel): string {
  const reason = vm.progress.reason ? ` (${esc(vm.progress.reason)})` : "";
  const peer = vm.peer ? `<span class="peer">${esc(vm.peer)}</span>` : "";
  return `<div class="header" data-state="${esc(vm.progress.state)}">`
    + `<span class="label">${esc(vm.progress.label)}${reason}</span>${peer}`
    + `<span class="conn">${esc(vm.connection.server)}/${esc(vm.connection.adaptor)}</span>`
    + `</div>`;
}

function installPrompt(): string {
  return `<div class="panel" data-surface="install-prompt">`
    + `no adaptor daemon found on this machine; install and restart it, `
    + `then reload this page</div>`;
}

function incomingCall(vm: ViewModel): string {
  const inc = vm.incomingCall as NonNullable<ViewModel["incomingCall"]>;
  return `<div class="panel" data-surface="incoming-call">`
    + `<span>incoming call from ${esc(inc.from)}</span>`
    + `<button data-action="accept">accept</button>`
    + `<button data-action="reject">reject</button>`
    + `</div>`;
}

function clickToCall(vm: ViewModel): string {
  const btn = vm.button as NonNullable<ViewModel["button"]>;
  const disabled = btn.enabled ? "" : " disabled";
  const history = (vm.history ?? [])
    .map((h) => `<option>${esc(h)}</option>`)
    .join("");
  const dropdown = history
    ? `<select class="history" data-surface="history">${history}</select>` : "";
  return `<div class="click-to-call">`
    + `<button data-action="click-call"${disabled}>${esc(btn.label)}</button>`
    + dropdown
    + `</div>`;
}

function roster(vm: ViewModel): string {
  const r = vm.roster as NonNullable<ViewModel["roster"]>;
  const stale = r.stale ? `<span class="badge" data-surface="stale">stale</span>` : "";
  if (r.placeholder) {
    return `<div class="roster" data-surface="roster">${stale}`
      + `<div class="placeholder">no contacts</div></div>`;
  }
  const rows = r.rows
    .map((row) => `<li data-action="call" data-aor="${esc(row.aor)}">`
      + `<span class="presence presence-${esc(row.status)}"></span>${esc(row.aor)}</li>`)
    .join("");
  const pager = r.pageCount > 1
    ? `<div class="pager"><button data-action="page-prev">&lt;</button>`
      + `<span>${r.page + 1}/${r.pageCount}</span>`
      + `<button data-action="page-next">&gt;</button></div>`
    : "";
  return `<div class="roster" data-surface="roster">${stale}`
    + `<ul>${rows}</ul>${pager}</div>`;
}

function tiles(vm: ViewModel): string {
  const cells = vm.tiles
    .map((t) => {
      const level = t.level === null ? "" : `<div class="wave" style="--level:${t.level}"></div>`;
      const who = t.self ? "you" : t.aor;
      return `<div class="tile" data-pid="${esc(t.pid)}">`
        + `<span>${esc(who)}</span>${level}</div>`;
    })
    .join("");
  const controls = vm.progress.state === "in-call" || vm.progress.state === "joining"
    ? `<button data-action="hangup">hang up</button>` : "";
  return `<div class="tiles" data-surface="tiles">${cells}${controls}</div>`;
}

function chat(vm: ViewModel): string {
  const lines = vm.chat
    .map((c) => `<li><b>${esc(c.from)}</b> ${esc(c.text)}</li>`)
    .join("");
  return `<div class="chat" data-surface="chat"><ul>${lines}</ul>`
    + `<input data-chat-input placeholder="message" />`
    + `<button data-action="send-chat">send</button></div>`;
}
