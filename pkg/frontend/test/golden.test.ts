/** Golden replays: the three recorded logs must project to exactly the
 * stored view-model snapshot sequences, and land in the states the live
 * run landed in. Regenerate goldens with UPDATE_GOLDENS=1 after auditing.
 */

import { readFileSync, writeFileSync } from "node:fs";
import { describe, expect, it } from "vitest";

import { replay, LoggedEvent } from "../src/replay.js";
import { normalizeConfig, ViewModel, WidgetConfig } from "../src/types.js";

interface Fixture {
  config: WidgetConfig;
  log: LoggedEvent[];
}

function fixturePath(name: string): URL {
  return new URL(`./fixtures/${name}`, import.meta.url);
}

function loadFixture(name: string): Fixture {
  return JSON.parse(readFileSync(fixturePath(`${name}.log.json`), "utf8"));
}

function runFixture(name: string) {
  const fixture = loadFixture(name);
  return replay(normalizeConfig(fixture.config), fixture.log);
}

function checkGolden(name: string, snapshots: ViewModel[]): void {
  const path = fixturePath(`${name}.golden.json`);
  if (process.env.UPDATE_GOLDENS) {
    writeFileSync(path, JSON.stringify({ snapshots }, null, 1) + "\n");
    return;
  }
  const golden = JSON.parse(readFileSync(path, "utf8"));
  expect(snapshots).toEqual(golden.snapshots);
}

describe("happy path (phone caller)", () => {
  const out = runFixture("happy-path");

  it("walks register -> call -> in-call -> ended by peer hangup", () => {
    const states = out.snapshots.map((vm) => vm.progress.state);
    expect(states[0]).toBe("idle");
    expect(states).toContain("registering");
    expect(states).toContain("online");
    expect(states).toContain("inviting");
    expect(states).toContain("joining");
    expect(states).toContain("in-call");
    expect(out.final.call.state).toBe("ended");
    expect(out.final.call.reason).toBe("peer-hangup");
  });

  it("shows the peer in the roster before the call", () => {
    const online = out.snapshots.find(
      (vm) => vm.progress.state === "online" && vm.roster?.total === 1);
    expect(online?.roster?.rows).toEqual([
      { aor: "bob@example.net", status: "online" },
    ]);
  });

  it("raises tiles on membership and clears the peer tile on leave", () => {
    const inCall = out.snapshots.filter((vm) => vm.progress.state === "in-call");
    expect(inCall[0].tiles.map((t) => t.aor).sort()).toEqual(
      ["alice@example.net", "bob@example.net"]);
    const last = out.snapshots[out.snapshots.length - 1];
    expect(last.tiles).toEqual([]);
  });

  it("ticks stats and collects both chat lines", () => {
    const last = out.snapshots[out.snapshots.length - 1];
    expect(last.stats).toEqual({ frames: 62, gaps: 0 });
    expect(last.chat).toEqual([
      { from: "alice@example.net", text: "hello from the widget" },
      { from: "bob@example.net", text: "hi back" },
    ]);
  });

  it("matches the stored golden snapshots", () => {
    checkGolden("happy-path", out.snapshots);
  });
});

describe("rejected call (click-to-call)", () => {
  const out = runFixture("rejected-call");

  it("cycles the button call -> ringing -> call", () => {
    const labels = out.snapshots.map((vm) => vm.button?.label);
    expect(labels[0]).toBe("call");
    expect(labels).toContain("ringing");
    expect(labels[labels.length - 1]).toBe("call");
  });

  it("ends rejected and remembers the target in history", () => {
    expect(out.final.call.state).toBe("ended");
    expect(out.final.call.reason).toBe("rejected");
    const last = out.snapshots[out.snapshots.length - 1];
    expect(last.history).toEqual(["bob@example.net"]);
  });

  it("never shows an incoming-call surface", () => {
    for (const vm of out.snapshots) {
      expect(vm.incomingCall).toBeNull();
    }
  });

  it("matches the stored golden snapshots", () => {
    checkGolden("rejected-call", out.snapshots);
  });
});

describe("cancelled call (phone callee)", () => {
  const out = runFixture("cancelled-call");

  it("surfaces the incoming call, then dismisses it on cancellation", () => {
    const shown = out.snapshots.filter((vm) => vm.incomingCall !== null);
    expect(shown.length).toBe(1);
    expect(shown[0].incomingCall).toEqual({
      from: "bob@example.net",
      conference: "/call/c100",
    });
    const last = out.snapshots[out.snapshots.length - 1];
    expect(last.incomingCall).toBeNull();
    expect(last.progress.state).toBe("ended");
    expect(last.progress.reason).toBe("cancelled");
  });

  it("matches the stored golden snapshots", () => {
    checkGolden("cancelled-call", out.snapshots);
  });
});

describe("replay determinism", () => {
  it("replaying a log twice yields byte-identical snapshots", () => {
    for (const name of ["happy-path", "rejected-call", "cancelled-call"]) {
      const a = JSON.stringify(runFixture(name).snapshots);
      const b = JSON.stringify(runFixture(name).snapshots);
      expect(a).toBe(b);
    }
  });
});
