/** Browser wiring for the operator console.

Left pane: the live transcript streamed over SSE. Right panes: the robot's
belief snapshot next to the simulator ground truth, polled once per second so
an operator can watch the two drift apart and reconverge after a perceive.
Controls cover the whole operator surface: start or follow up by utterance,
engage and release the emergency stop, inject free-text or preset events.
*/

import { ConsoleApi } from "./api.js";
import { parseSnapshot, reduceTranscript } from "./transcript.js";
import type { LogEntry, StateView } from "./types.js";

const api = new ConsoleApi("");

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (node === null) throw new Error(`missing element #${id}`);
  return node as T;
}

const scenarioBox = el<HTMLTextAreaElement>("scenario-box");
const policyBox = el<HTMLTextAreaElement>("policy-box");
const seedInput = el<HTMLInputElement>("seed-input");
const createButton = el<HTMLButtonElement>("create-button");
const sessionLabel = el<HTMLElement>("session-label");
const statusLabel = el<HTMLElement>("status-label");
const utteranceInput = el<HTMLInputElement>("utterance-input");
const utteranceButton = el<HTMLButtonElement>("utterance-button");
const estopEngage = el<HTMLButtonElement>("estop-engage");
const estopRelease = el<HTMLButtonElement>("estop-release");
const eventInput = el<HTMLInputElement>("event-input");
const eventButton = el<HTMLButtonElement>("event-button");
const transcriptList = el<HTMLElement>("transcript");
const beliefTable = el<HTMLElement>("belief-pane");
const truthTable = el<HTMLElement>("truth-pane");
const reportPre = el<HTMLElement>("report-pane");
const errorBar = el<HTMLElement>("error-bar");

let sessionId: string | null = null;
let streamAbort: AbortController | null = null;
let pollTimer: number | null = null;

function showError(err: unknown): void {
  errorBar.textContent = err instanceof Error ? err.message : String(err);
  errorBar.classList.remove("hidden");
  window.setTimeout(() => errorBar.classList.add("hidden"), 6000);
}

function requireSession(): string {
  if (sessionId === null) throw new Error("create a session first");
  return sessionId;
}

function renderTranscript(entries: LogEntry[]): void {
  transcriptList.replaceChildren();
  for (const item of reduceTranscript(entries)) {
    const row = document.createElement("li");
    row.className = `item ${item.kind}${item.failed ? " failed" : ""}${item.rejected ? " rejected" : ""}`;
    const tick = document.createElement("span");
    tick.className = "tick";
    tick.textContent = `t${item.tick}`;
    const text = document.createElement("span");
    text.textContent = item.text;
    row.append(tick, text);
    transcriptList.append(row);
  }
  transcriptList.scrollTop = transcriptList.scrollHeight;
}

function renderTruth(state: StateView): void {
  const rows: [string, string][] = [
    ["status", state.status],
    ["tick", String(state.tick)],
    ["location", state.robot.location ?? "(between locations)"],
    ["gripped", state.robot.gripped_object ?? "(nothing)"],
    ["e-stop", state.robot.estop_engaged ? "ENGAGED" : "released"],
  ];
  if (state.platform === "indoor") {
    rows.push(["arm posture", state.robot.arm_posture ?? "?"]);
  } else {
    rows.push(
      ["battery", `${state.robot.battery_percent}% (${state.robot.battery_class})`],
      ["docked", String(state.robot.docked)],
    );
  }
  for (const [id, object] of Object.entries(state.objects)) {
    rows.push([id, `${object.placement.kind} ${object.placement.ref}`]);
  }
  truthTable.replaceChildren();
  for (const [label, value] of rows) {
    const row = document.createElement("tr");
    const labelCell = document.createElement("td");
    labelCell.textContent = label;
    const valueCell = document.createElement("td");
    valueCell.textContent = value;
    row.append(labelCell, valueCell);
    truthTable.append(row);
  }
  statusLabel.textContent = state.status;
  statusLabel.className = `status ${state.status}`;
}

async function refreshPanes(): Promise<void> {
  if (sessionId === null) return;
  try {
    const [state, snapshot, report] = await Promise.all([
      api.getState(sessionId),
      api.getSnapshot(sessionId),
      api.getReport(sessionId),
    ]);
    renderTruth(state);
    beliefTable.replaceChildren();
    for (const row of parseSnapshot(snapshot.rendered_text, snapshot.freshness_window)) {
      const tr = document.createElement("tr");
      tr.className = row.stale ? "stale" : "";
      const predicate = document.createElement("td");
      predicate.textContent = row.predicate;
      const age = document.createElement("td");
      age.textContent = row.age === null ? "" : `age ${row.age}${row.stale ? " (stale)" : ""}`;
      tr.append(predicate, age);
      beliefTable.append(tr);
    }
    reportPre.textContent = JSON.stringify(report, null, 2);
  } catch (err) {
    showError(err);
  }
}

async function followLog(): Promise<void> {
  if (sessionId === null) return;
  streamAbort?.abort();
  streamAbort = new AbortController();
  const entries: LogEntry[] = [];
  try {
    for await (const entry of api.streamEntries(sessionId, streamAbort.signal)) {
      entries.push(entry);
      renderTranscript(entries);
    }
    await refreshPanes();
  } catch (err) {
    if (!(err instanceof DOMException && err.name === "AbortError")) showError(err);
  }
}

createButton.addEventListener("click", async () => {
  try {
    const info = await api.createSession({
      scenario: scenarioBox.value,
      policy: policyBox.value.trim() ? policyBox.value : undefined,
      seed: Number(seedInput.value) || 1,
    });
    sessionId = info.session_id;
    sessionLabel.textContent = `${info.session_id} (${info.scenario_id}, seed ${info.seed})`;
    transcriptList.replaceChildren();
    void followLog();
    if (pollTimer !== null) window.clearInterval(pollTimer);
    pollTimer = window.setInterval(() => void refreshPanes(), 1000);
    void refreshPanes();
  } catch (err) {
    showError(err);
  }
});

utteranceButton.addEventListener("click", async () => {
  try {
    const text = utteranceInput.value.trim();
    if (!text) return;
    await api.sendUtterance(requireSession(), text);
    utteranceInput.value = "";
  } catch (err) {
    showError(err);
  }
});

estopEngage.addEventListener("click", async () => {
  try {
    await api.setEstop(requireSession(), true);
    void refreshPanes();
  } catch (err) {
    showError(err);
  }
});

estopRelease.addEventListener("click", async () => {
  try {
    await api.setEstop(requireSession(), false);
    void refreshPanes();
  } catch (err) {
    showError(err);
  }
});

eventButton.addEventListener("click", async () => {
  try {
    const text = eventInput.value.trim();
    if (!text) return;
    await api.injectEvent(requireSession(), text);
    eventInput.value = "";
  } catch (err) {
    showError(err);
  }
});

for (const preset of document.querySelectorAll<HTMLButtonElement>("button[data-event]")) {
  preset.addEventListener("click", () => {
    eventInput.value = preset.dataset.event ?? "";
  });
}
