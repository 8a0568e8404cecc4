/** Public surface: mountWidget for host pages, plus the pure core for
 * embedders and tests.
 */

import { WidgetShell } from "./shell.js";
import { normalizeConfig, WidgetConfig } from "./types.js";

export { init, step, levelOf, AUDIO_CODECS, HISTORY_SIZE } from "./machine.js";
export { project, LABELS, BUTTON_LABELS, PAGE_SIZE } from "./project.js";
export { replay } from "./replay.js";
export type { LoggedEvent, ReplayResult } from "./replay.js";
export { html, esc } from "./render.js";
export { LineDecoder, NdjsonSubscription } from "./ndjson.js";
export { WidgetShell } from "./shell.js";
export { normalizeConfig, DEFAULT_ADAPTOR_URL } from "./types.js";
export type * from "./types.js";

export function mountWidget(root: HTMLElement, config: WidgetConfig): WidgetShell {
  const shell = new WidgetShell(root, normalizeConfig(config));
  shell.start();
  return shell;
}
