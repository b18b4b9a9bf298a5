/** End-to-end console flow against a real service process.

Boots `python3 -m planexec.cli --serve` from the repository root, then drives
the live-operator escalation run entirely through the HTTP API the console
uses: issue the command, engage the emergency stop inside the pause before
the first grasp, watch the failure attribution appear in the streamed
transcript, release the stop, state a preference, and check the revised plan.
Reconnecting afterwards must reproduce the identical transcript.
*/

import { type ChildProcess, spawn } from "node:child_process";
import { existsSync, mkdtempSync, readFileSync, rmSync } from "node:fs";
import { createServer } from "node:net";
import { tmpdir } from "node:os";
import * as path from "node:path";
import { fileURLToPath } from "node:url";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ConsoleApi } from "../src/api.js";
import { failureAttributions, reduceTranscript } from "../src/transcript.js";
import type { LogEntry } from "../src/types.js";

const repoRoot = path.resolve(path.dirname(fileURLToPath(import.meta.url)), "..", "..");
const distIndex = path.join(repoRoot, "frontend", "dist", "index.html");

let server: ChildProcess;
let serverOutput = "";
let logDir: string;
let baseUrl: string;
let api: ConsoleApi;

function freePort(): Promise<number> {
  return new Promise((resolve, reject) => {
    const probe = createServer();
    probe.once("error", reject);
    probe.listen(0, "127.0.0.1", () => {
      const address = probe.address();
      if (address === null || typeof address === "string") {
        reject(new Error("no port assigned"));
        return;
      }
      probe.close(() => resolve(address.port));
    });
  });
}

async function waitFor(check: () => boolean, what: string, timeoutMs = 30_000): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  while (Date.now() < deadline) {
    if (check()) return;
    await new Promise((r) => setTimeout(r, 50));
  }
  throw new Error(`timed out waiting for ${what}\nserver output:\n${serverOutput}`);
}

beforeAll(async () => {
  const port = await freePort();
  baseUrl = `http://127.0.0.1:${port}`;
  logDir = mkdtempSync(path.join(tmpdir(), "planexec-live-"));
  server = spawn(
    "python3",
    ["-m", "planexec.cli", "--serve", "--host", "127.0.0.1", "--port", String(port), "--log-dir", logDir],
    { cwd: repoRoot, stdio: ["ignore", "pipe", "pipe"] },
  );
  server.stdout?.on("data", (chunk: Buffer) => (serverOutput += chunk.toString()));
  server.stderr?.on("data", (chunk: Buffer) => (serverOutput += chunk.toString()));

  const deadline = Date.now() + 25_000;
  while (true) {
    if (server.exitCode !== null) {
      throw new Error(`server exited early (${server.exitCode}):\n${serverOutput}`);
    }
    try {
      const res = await fetch(`${baseUrl}/healthz`);
      if (res.ok) break;
    } catch {
      // not listening yet
    }
    if (Date.now() > deadline) throw new Error(`service never came up:\n${serverOutput}`);
    await new Promise((r) => setTimeout(r, 200));
  }
  api = new ConsoleApi(baseUrl);
});

afterAll(async () => {
  if (server && server.exitCode === null) {
    server.kill("SIGTERM");
    await new Promise((resolve) => {
      const force = setTimeout(() => {
        server.kill("SIGKILL");
        resolve(null);
      }, 5000);
      server.once("exit", () => {
        clearTimeout(force);
        resolve(null);
      });
    });
  }
  if (logDir) rmSync(logDir, { recursive: true, force: true });
});

describe("live operator session", () => {
  it("streams the estop refusal and the revised plan, and replays identically", async () => {
    const scenario = readFileSync(path.join(repoRoot, "scenarios", "indoor_exp2_live.yaml"), "utf-8");
    const policy = readFileSync(path.join(repoRoot, "policies", "exp2_live.yaml"), "utf-8");

    const info = await api.createSession({ scenario, policy, seed: 1 });
    expect(info.status).toBe("idle");
    const sid = info.session_id;

    // tail the log over SSE from the very start; the generator returns
    // only once the service sends its end frame after the session finishes
    const live: LogEntry[] = [];
    const tail = (async () => {
      for await (const entry of api.streamEntries(sid)) live.push(entry);
    })();

    const started = await api.sendUtterance(sid, "pick a tool I can use to screw with");
    expect(started.mode).toBe("started");

    // the policy pauses before the first grasp; engage the stop inside it
    await waitFor(
      () => live.some((e) => e.kind === "reflection" && e.payload.text === "Reaching for the screwdriver next."),
      "the pre-grasp reflection",
    );
    await api.setEstop(sid, true);

    await waitFor(
      () =>
        live.some(
          (e) =>
            e.kind === "tool_result" &&
            e.payload.ok === false &&
            String(e.payload.text).includes("arm cannot be actuated"),
        ),
      "the refused grasp",
    );
    const paused = await api.getInfo(sid);
    expect(paused.status).toBe("awaiting_operator");

    // the reducer must attribute the failure to the exact call
    const attributions = failureAttributions(live);
    expect(attributions).toHaveLength(1);
    expect(attributions[0]).toMatch(/^pick\(screwdriver_1\) failed: .*arm cannot be actuated/);

    const stateDuringStop = await api.getState(sid);
    expect(stateDuringStop.robot.estop_engaged).toBe(true);
    expect(stateDuringStop.robot.gripped_object).toBeNull();

    await api.setEstop(sid, false);
    const followUp = await api.sendUtterance(sid, "I prefer the power drill");
    expect(followUp.mode).toBe("event");

    await tail; // ends only when the service reports the session finished
    const finished = await api.getInfo(sid);
    expect(finished.status).toBe("finished");

    const report = await api.getReport(sid);
    expect(report.ok).toBe(true);
    expect(report.action_failures).toBe(1);
    expect(report.goals).toEqual({ "gripped(power_drill_1)": true, "on(screwdriver_1, table_1)": true });
    expect(report.invariant_problems).toEqual([]);

    // the transcript shows the preference event and the plan revision
    const items = reduceTranscript(live);
    expect(items.some((i) => i.kind === "event" && i.text.includes("user: I prefer the power drill"))).toBe(true);
    expect(items.some((i) => i.kind === "action" && i.text.startsWith("pick(power_drill_1): "))).toBe(true);
    const finals = items.filter((i) => i.kind === "final");
    expect(finals.at(-1)?.text).toContain("Plan revised: you prefer the power drill");

    const ground = await api.getState(sid);
    expect(ground.robot.gripped_object).toBe("power_drill_1");
    expect(ground.objects.screwdriver_1.placement).toEqual({ kind: "on", ref: "table_1" });

    // reconnect twice: both replays must match the live transcript byte for byte
    const replayOnce: LogEntry[] = [];
    for await (const entry of api.streamEntries(sid)) replayOnce.push(entry);
    const replayTwice: LogEntry[] = [];
    for await (const entry of api.streamEntries(sid)) replayTwice.push(entry);
    expect(replayOnce).toEqual(live);
    expect(replayTwice).toEqual(live);
    expect(reduceTranscript(replayOnce)).toEqual(items);
  });

  it("keeps the plain log endpoint consistent with the stream", async () => {
    const scenario = readFileSync(path.join(repoRoot, "scenarios", "indoor_exp1.yaml"), "utf-8");
    const policy = readFileSync(path.join(repoRoot, "policies", "exp1_fetch.yaml"), "utf-8");
    const info = await api.createSession({ scenario, policy, seed: 1 });
    await api.sendUtterance(info.session_id, "put the multimeter inside the box and bring it to table 2");

    const streamed: LogEntry[] = [];
    for await (const entry of api.streamEntries(info.session_id)) streamed.push(entry);
    const plain = await api.getLog(info.session_id);
    expect(plain.entries).toEqual(streamed);
    const report = await api.getReport(info.session_id);
    expect(report.status).toBe("finished");
    expect(report.ok).toBe(true);
  });

  it.runIf(existsSync(distIndex))("serves the built console page", async () => {
    const page = await fetch(`${baseUrl}/console`);
    expect(page.ok).toBe(true);
    expect(await page.text()).toContain("planexec operator console");
    const script = await fetch(`${baseUrl}/console-assets/console.js`);
    expect(script.ok).toBe(true);
    const styles = await fetch(`${baseUrl}/console-assets/styles.css`);
    expect(styles.ok).toBe(true);
  });
});
