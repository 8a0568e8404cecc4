/** Deterministic replay: feed a recorded event log through the reducer and
 * collect one view-model snapshot per event (index 0 is the initial view).
 * Replaying the same log always yields byte-identical snapshots.
 */

import { init, step } from "./machine.js";
import { project } from "./project.js";
import { Config, Effect, ViewModel, WidgetEvent, WidgetState } from "./types.js";

export interface LoggedEvent {
  /** milliseconds since the recording started; ignored by the reducer */
  t?: number;
  event: WidgetEvent;
}

export interface ReplayResult {
  snapshots: ViewModel[];
  final: WidgetState;
  effects: Effect[][];
}

export function replay(config: Config, log: LoggedEvent[]): ReplayResult {
  let state = init(config);
  const snapshots: ViewModel[] = [project(state)];
  const effects: Effect[][] = [];
  for (const entry of log) {
    const out = step(state, entry.event);
    state = out.state;
    snapshots.push(project(state));
    effects.push(out.effects);
  }
  return { snapshots, final: state, effects };
}
