/** Wire types for the planexec service endpoints the console consumes. */

export interface LogEntry {
  kind:
    | "utterance"
    | "routing"
    | "reflection"
    | "tool_call"
    | "tool_result"
    | "event"
    | "final_text"
    | "critic_verdict";
  tick: number;
  payload: Record<string, unknown>;
}

export interface SessionInfo {
  session_id: string;
  scenario_id: string;
  seed: number;
  status: "idle" | "running" | "awaiting_operator" | "finished";
  tick: number;
  log_entries: number;
}

export interface RobotView {
  x: number;
  y: number;
  arm_posture: string | null;
  gripped_object: string | null;
  estop_engaged: boolean;
  battery_percent: number | null;
  battery_class: string | null;
  docked: boolean | null;
  in_shelter: boolean | null;
  location: string | null;
}

export interface StateView {
  platform: "indoor" | "outdoor";
  tick: number;
  seed: number;
  status: string;
  robot: RobotView;
  locations: Record<string, { kind: string; x: number; y: number }>;
  objects: Record<
    string,
    {
      category: string;
      placement: { kind: string; ref: string };
      grasp_difficulty: string;
    }
  >;
  scans: [string, number][];
  pending_utterances: string[];
}

export interface SnapshotView {
  tick: number;
  rendered_text: string;
  freshness_window: number;
}

export interface Report {
  scenario: string;
  seed: number;
  status: string;
  ticks: number;
  actions_by_name: Record<string, number>;
  action_failures: number;
  parameter_errors: number;
  events_injected: number;
  events_consumed: number;
  scans: [string, number][];
  critic_rounds: number;
  final_texts: string[];
  goals: Record<string, boolean>;
  goals_met: boolean;
  invariant_problems: string[];
  ok: boolean;
}

/** One rendered line of the streamed transcript. */
export interface TranscriptItem {
  kind:
    | "user"
    | "robot_speech"
    | "routing"
    | "reflection"
    | "action"
    | "tool"
    | "event"
    | "final"
    | "critic";
  tick: number;
  text: string;
  /** Set on action items: the act call rendered as name(arg, ...). */
  call?: string;
  /** Set on action items that hit a precondition or injected failure. */
  failed?: boolean;
  /** Set on action items the tool interface rejected before execution. */
  rejected?: boolean;
}

/** One parsed predicate line from the agent-visible snapshot. */
export interface BeliefRow {
  predicate: string;
  age: number | null;
  stale: boolean;
}
