"""Command line entry point.

Default mode runs a scenario headlessly against a policy and exits 0 only if
every goal predicate holds and no invariant tripped. --replay re-executes a
recorded log from its embedded inputs and diffs the result. --serve starts
the HTTP service instead.
"""

from __future__ import annotations

import argparse
import json
import sys
from typing import Optional

from .backends import PolicyBundle, PolicyError, RemoteBackend, load_policy_file, load_policy_text
from .logbook import LogEntry
from .scenario import Scenario, ScenarioError, load_scenario_file, load_scenario_text
from .session import Session, SessionConfig

LOG_FORMAT = 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="planexec",
        description="run, replay, or serve planner-executor sessions over simulated robots",
    )
    parser.add_argument("--scenario", help="path to a scenario YAML file")
    parser.add_argument("--policy", help="path to a scripted policy YAML file")
    parser.add_argument("--seed", type=int, default=1, help="simulation seed (default 1)")
    parser.add_argument(
        "--backend", choices=("scripted", "remote"), default="scripted",
        help="decision backend for all agents (default scripted)",
    )
    parser.add_argument("--max-critic-rounds", type=int, default=3, help="critic round cap (default 3)")
    parser.add_argument("--budget", type=int, default=120, help="planner tool call budget per round (default 120)")
    parser.add_argument("--report", help="write a JSON run report to this path")
    parser.add_argument("--log", help="write the execution log (JSONL) to this path")
    parser.add_argument("--replay", metavar="LOGFILE", help="re-run a recorded log and diff against it")
    parser.add_argument("--serve", action="store_true", help="start the HTTP service instead of running")
    parser.add_argument("--host", default="127.0.0.1", help="bind address for --serve")
    parser.add_argument("--port", type=int, default=8000, help="port for --serve")
    parser.add_argument("--log-dir", default="session_logs", help="per-session log directory for --serve")
    parser.add_argument("--remote-url", help="chat-completions endpoint for --backend remote")
    parser.add_argument("--remote-model", default="o3", help="model id for --backend remote")
    parser.add_argument("--remote-effort", default="low", help="reasoning effort for --backend remote")
    parser.add_argument("--remote-timeout", type=float, default=60.0, help="timeout in seconds for remote calls")
    return parser


def run_session(
    scenario: Scenario,
    policies: Optional[PolicyBundle],
    config: SessionConfig,
    utterance: Optional[str] = None,
    planner_backend=None,
    router_backend=None,
    chatbot_backend=None,
    critic_backend=None,
) -> Session:
    session = Session(
        scenario,
        policies=policies,
        config=config,
        planner_backend=planner_backend,
        router_backend=router_backend,
        chatbot_backend=chatbot_backend,
        critic_backend=critic_backend,
    )
    text = utterance if utterance is not None else scenario.instruction
    if not text:
        raise ScenarioError(f"scenario '{scenario.id}' has no instruction and no utterance was given")
    session.run(text)
    return session


def log_header(scenario: Scenario, policies: Optional[PolicyBundle], config: SessionConfig) -> dict:
    return {
        "kind": "header",
        "tick": 0,
        "payload": {
            "format": LOG_FORMAT,
            "scenario_id": scenario.id,
            "seed": config.seed,
            "budget": config.budget,
            "max_critic_rounds": config.max_critic_rounds,
            "scenario_text": scenario.raw_text,
            "policy_text": policies.source_text if policies else "",
        },
    }


def write_log_file(path: str, session: Session, policies: Optional[PolicyBundle]) -> None:
    header = log_header(session.scenario, policies, session.config)
    lines = [json.dumps(header, sort_keys=True, separators=(",", ":"))]
    lines.extend(entry.to_json() for entry in session.log.entries())
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def _run_command(args) -> int:
    if not args.scenario:
        print("error: --scenario is required", file=sys.stderr)
        return 2
    try:
        scenario = load_scenario_file(args.scenario)
    except (ScenarioError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    policies = None
    remote = None
    if args.backend == "scripted":
        if not args.policy:
            print("error: --policy is required with the scripted backend", file=sys.stderr)
            return 2
        try:
            policies = load_policy_file(args.policy)
        except (PolicyError, OSError) as err:
            print(f"error: {err}", file=sys.stderr)
            return 2
    else:
        if not args.remote_url:
            print("error: --remote-url is required with the remote backend", file=sys.stderr)
            return 2
        remote = RemoteBackend(args.remote_url, args.remote_model, args.remote_effort, args.remote_timeout)
    config = SessionConfig(seed=args.seed, budget=args.budget, max_critic_rounds=args.max_critic_rounds)
    try:
        session = run_session(
            scenario,
            policies,
            config,
            planner_backend=remote,
            router_backend=remote,
            chatbot_backend=remote,
            critic_backend=remote,
        )
    except (ScenarioError, PolicyError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    if args.log:
        write_log_file(args.log, session, policies)
    report = session.report()
    if args.report:
        with open(args.report, "w", encoding="utf-8") as fh:
            json.dump(report, fh, indent=2, sort_keys=True)
            fh.write("\n")
    for goal, ok in report["goals"].items():
        print(f"goal {goal}: {'satisfied' if ok else 'NOT satisfied'}")
    for problem in report["invariant_problems"]:
        print(f"invariant: {problem}")
    print(f"result: {'ok' if report['ok'] else 'failed'} "
          f"({report['ticks']} ticks, {report['action_failures']} action failure(s), "
          f"{report['critic_rounds']} critic round(s))")
    return 0 if report["ok"] else 1


def replay_log(path: str) -> tuple[str, Optional[int], str]:
    """Re-run a recorded log. Returns (verdict, first_divergence_index, detail)."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = [line for line in fh.read().splitlines() if line.strip()]
    if not lines:
        return "error", None, "log file is empty"
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as err:
        return "error", None, f"corrupt header line: {err}"
    if header.get("kind") != "header":
        return "error", None, "first line is not a header entry"
    payload = header.get("payload") or {}
    try:
        scenario = load_scenario_text(payload["scenario_text"], source=f"{path}<header>")
        policies = load_policy_text(payload.get("policy_text") or "", source=f"{path}<header>")
        config = SessionConfig(
            seed=int(payload["seed"]),
            budget=int(payload.get("budget", 120)),
            max_critic_rounds=int(payload.get("max_critic_rounds", 3)),
        )
    except (KeyError, ScenarioError, PolicyError) as err:
        return "error", None, f"cannot rebuild run from header: {err}"
    session = run_session(scenario, policies, config)
    fresh = [entry.to_json() for entry in session.log.entries()]
    recorded = lines[1:]
    for index, (old, new) in enumerate(zip(recorded, fresh)):
        if old != new:
            try:
                kind = json.loads(old).get("kind")
            except json.JSONDecodeError:
                kind = "?"
            return "mismatch", index, f"first divergence at entry {index} (recorded kind: {kind})"
    if len(recorded) != len(fresh):
        index = min(len(recorded), len(fresh))
        return "mismatch", index, (
            f"length differs: recorded {len(recorded)} entries, replay produced {len(fresh)}"
        )
    return "ok", None, f"replayed {len(fresh)} entries with no divergence"


def _replay_command(args) -> int:
    try:
        verdict, index, detail = replay_log(args.replay)
    except OSError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    print(f"replay {verdict}: {detail}")
    if verdict == "ok":
        return 0
    return 2 if verdict == "error" else 1


def _serve_command(args) -> int:
    import uvicorn

    from .service import create_app

    app = create_app(log_dir=args.log_dir, console_dir=_default_console_dir())
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def _default_console_dir() -> Optional[str]:
    import os

    here = os.path.dirname(os.path.abspath(__file__))
    for base in (os.getcwd(), os.path.dirname(os.path.dirname(here))):
        candidate = os.path.join(base, "frontend", "dist")
        if os.path.isdir(candidate):
            return candidate
    return None


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if args.serve:
        return _serve_command(args)
    if args.replay:
        return _replay_command(args)
    return _run_command(args)


def console_main() -> None:
    sys.exit(main())


if __name__ == "__main__":
    sys.exit(main())
