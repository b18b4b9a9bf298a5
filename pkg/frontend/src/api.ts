/** Typed fetch client for the planexec service. */

import { parseSseStream } from "./sse.js";
import type { LogEntry, Report, SessionInfo, SnapshotView, StateView } from "./types.js";

export interface CreateSessionOptions {
  scenario: string;
  policy?: string;
  seed?: number;
  budget?: number;
  maxCriticRounds?: number;
}

export class ApiError extends Error {
  constructor(
    public status: number,
    detail: string,
  ) {
    super(detail);
  }
}

async function asJson<T>(response: Response): Promise<T> {
  if (!response.ok) {
    let detail = `${response.status} ${response.statusText}`;
    try {
      const body = (await response.json()) as { detail?: string };
      if (body.detail) detail = body.detail;
    } catch {
      // non-JSON error body; keep the status line
    }
    throw new ApiError(response.status, detail);
  }
  return (await response.json()) as T;
}

export class ConsoleApi {
  constructor(private baseUrl: string = "") {}

  private async post<T>(path: string, body: unknown): Promise<T> {
    const response = await fetch(this.baseUrl + path, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
    return asJson<T>(response);
  }

  private async get<T>(path: string): Promise<T> {
    return asJson<T>(await fetch(this.baseUrl + path));
  }

  createSession(options: CreateSessionOptions): Promise<SessionInfo> {
    return this.post("/scenario", {
      scenario: options.scenario,
      policy: options.policy ?? null,
      seed: options.seed ?? 1,
      budget: options.budget ?? 120,
      max_critic_rounds: options.maxCriticRounds ?? 3,
    });
  }

  listSessions(): Promise<{ sessions: SessionInfo[] }> {
    return this.get("/sessions");
  }

  getInfo(sessionId: string): Promise<SessionInfo> {
    return this.get(`/sessions/${sessionId}`);
  }

  sendUtterance(sessionId: string, text: string): Promise<{ accepted: boolean; mode: string }> {
    return this.post(`/sessions/${sessionId}/utterance`, { text });
  }

  setEstop(sessionId: string, engaged: boolean): Promise<{ engaged: boolean }> {
    return this.post(`/sessions/${sessionId}/estop`, { engaged });
  }

  injectEvent(sessionId: string, text: string): Promise<{ accepted: boolean; seq: number }> {
    return this.post(`/sessions/${sessionId}/events`, { text });
  }

  getState(sessionId: string): Promise<StateView> {
    return this.get(`/sessions/${sessionId}/state`);
  }

  getSnapshot(sessionId: string): Promise<SnapshotView> {
    return this.get(`/sessions/${sessionId}/snapshot`);
  }

  getLog(sessionId: string): Promise<{ entries: LogEntry[] }> {
    return this.get(`/sessions/${sessionId}/log`);
  }

  getReport(sessionId: string): Promise<Report> {
    return this.get(`/sessions/${sessionId}/report`);
  }

  /** Stream log entries from the top until the service signals the end.
   * Yields the full backlog first, then live entries; returns when the
   * session is finished, so a reconnect replays the identical transcript. */
  async *streamEntries(sessionId: string, signal?: AbortSignal): AsyncGenerator<LogEntry> {
    const response = await fetch(`${this.baseUrl}/sessions/${sessionId}/log?follow=true`, {
      signal,
    });
    if (!response.ok || response.body === null) {
      throw new ApiError(response.status, `log stream failed: ${response.status}`);
    }
    for await (const message of parseSseStream(response.body)) {
      if (message.event === "end") return;
      yield JSON.parse(message.data) as LogEntry;
    }
  }
}
