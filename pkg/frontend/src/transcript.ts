/** Pure reduction of raw log entries into operator-facing transcript items.

The log pairs every tool_call with the next tool_result; other kinds may land
between the two (a reflection, a robot utterance from speak, an injected
event), so the reducer carries the pending call across them and emits items
in log order. Failed acts get an attribution line that names the call and the
simulator's status text, which is what an operator needs to see when the
emergency stop blocks a grasp.
*/

import type { BeliefRow, LogEntry, TranscriptItem } from "./types.js";

interface ActPayload {
  action?: unknown;
  params?: unknown;
}

/** Render an act payload as name(arg, ...); tolerates malformed payloads. */
export function renderCall(tool: string, payload: Record<string, unknown>): string {
  if (tool === "act") {
    const act = payload as ActPayload;
    const name = typeof act.action === "string" ? act.action : "?";
    const params = Array.isArray(act.params) ? act.params.map(String) : [];
    return `${name}(${params.join(", ")})`;
  }
  return `${tool}()`;
}

function str(value: unknown): string {
  return typeof value === "string" ? value : JSON.stringify(value);
}

export function reduceTranscript(entries: LogEntry[]): TranscriptItem[] {
  const items: TranscriptItem[] = [];
  let pending: LogEntry | null = null;

  const flushOrphan = () => {
    if (pending === null) return;
    const tool = str(pending.payload.tool);
    items.push({
      kind: "tool",
      tick: pending.tick,
      text: `${renderCall(tool, pending.payload.payload as Record<string, unknown> ?? {})} (no result recorded)`,
    });
    pending = null;
  };

  for (const entry of entries) {
    switch (entry.kind) {
      case "utterance": {
        const role = str(entry.payload.role);
        items.push({
          kind: role === "user" ? "user" : "robot_speech",
          tick: entry.tick,
          text: str(entry.payload.text),
        });
        break;
      }
      case "routing": {
        const actionable = entry.payload.actionable === true;
        items.push({
          kind: "routing",
          tick: entry.tick,
          text: actionable
            ? "routed to the planner-executor"
            : "routed to the chatbot",
        });
        break;
      }
      case "reflection":
        items.push({ kind: "reflection", tick: entry.tick, text: str(entry.payload.text) });
        break;
      case "tool_call":
        flushOrphan();
        pending = entry;
        break;
      case "tool_result": {
        if (pending === null) break;
        const tool = str(pending.payload.tool);
        const payload = (pending.payload.payload as Record<string, unknown>) ?? {};
        pending = null;
        if (tool === "reflect") break; // the reflection entry already carries the text
        const ok = entry.payload.ok === true;
        const kind = str(entry.payload.kind);
        const text = str(entry.payload.text);
        if (tool === "act") {
          const call = renderCall(tool, payload);
          if (kind === "parameter_error") {
            items.push({
              kind: "action",
              tick: entry.tick,
              call,
              text: `${call} rejected: ${text}`,
              rejected: true,
            });
          } else if (!ok) {
            items.push({
              kind: "action",
              tick: entry.tick,
              call,
              text: `${call} failed: ${text}`,
              failed: true,
            });
          } else {
            items.push({ kind: "action", tick: entry.tick, call, text: `${call}: ${text}` });
          }
          break;
        }
        // read-only tools: one line, result truncated to its first line
        const firstLine = text.split("\n", 1)[0];
        const suffix = text.includes("\n") ? " ..." : "";
        items.push({
          kind: "tool",
          tick: entry.tick,
          text: `${renderCall(tool, payload)}: ${firstLine}${suffix}`,
        });
        break;
      }
      case "event":
        items.push({
          kind: "event",
          tick: entry.tick,
          text: `event #${str(entry.payload.seq)}: ${str(entry.payload.text)}`,
        });
        break;
      case "final_text":
        items.push({ kind: "final", tick: entry.tick, text: str(entry.payload.text) });
        break;
      case "critic_verdict": {
        const round = str(entry.payload.round);
        const decision = str(entry.payload.decision);
        const reason = str(entry.payload.reason);
        items.push({
          kind: "critic",
          tick: entry.tick,
          text: `critic round ${round}: ${decision} (${reason})`,
        });
        break;
      }
    }
  }
  flushOrphan();
  return items;
}

/** Failure attributions in log order, e.g. "pick(screwdriver_1) failed: arm cannot be actuated". */
export function failureAttributions(entries: LogEntry[]): string[] {
  return reduceTranscript(entries)
    .filter((item) => item.failed)
    .map((item) => item.text);
}

const AGE_SUFFIX = /^(.*) \[age=(\d+)\]$/;

/** Parse the snapshot's rendered predicate lines into belief-pane rows. */
export function parseSnapshot(renderedText: string, freshnessWindow: number): BeliefRow[] {
  const rows: BeliefRow[] = [];
  for (const line of renderedText.split("\n")) {
    if (!line.trim()) continue;
    const match = AGE_SUFFIX.exec(line);
    if (match) {
      const age = Number(match[2]);
      rows.push({ predicate: match[1], age, stale: age > freshnessWindow });
    } else {
      rows.push({ predicate: line, age: null, stale: false });
    }
  }
  return rows;
}
