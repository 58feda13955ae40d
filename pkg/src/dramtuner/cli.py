"""Command-line front end.

Subcommands: simulate | tune | compare | explain | gen-trace. Reports are
emitted both as CSV (one row per partition or step) and as JSON (structured
object); with --out both files are written next to each other, without it
the chosen --format goes to stdout. All outputs are byte-deterministic
functions of (config, trace, seed).
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import sys
from pathlib import Path

import numpy as np

from . import trace as trace_mod
from .config import ConfigError, RunConfig, load_run_config
from .controller import (ACTION_ARITIES, ACTION_SPACE, METRIC_NAMES,
                         action_labels, config_from_action,
                         partitions_to_requests, simulate_partition,
                         TuningEnvironment)
from .explain import explain_decision
from .rl import (LearnerConfig, load_qtables, reward_vector, run_episode,
                 save_qtables, total_reward)

_METRIC_COLS = [f"m_{name}" for name in METRIC_NAMES]
_REWARD_COLS = [f"r_{name}" for name in METRIC_NAMES]
_ACTION_COLS = [f"a_{name}" for name, _ in ACTION_SPACE]

# Improvement sign conventions: positive means better for all three.
_IMPROVE_BASE_MINUS_TUNED = ("energy", "latency")
_IMPROVE_TUNED_MINUS_BASE = ("bandwidth",)


class CliError(RuntimeError):
    pass


def _sha256_file(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _csv_text(header: list[str], rows: list[list]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def _emit(out: str | None, fmt: str, header: list[str], rows: list[list],
          obj: dict) -> list[str]:
    """Write report files (both forms) or dump one form to stdout.

    Returns the list of paths written.
    """
    json_text = json.dumps(obj, indent=2) + "\n"
    csv_text = _csv_text(header, rows)
    if out:
        csv_path = Path(f"{out}.csv")
        json_path = Path(f"{out}.json")
        csv_path.write_text(csv_text, encoding="utf-8")
        json_path.write_text(json_text, encoding="utf-8")
        return [str(csv_path), str(json_path)]
    sys.stdout.write(csv_text if fmt == "csv" else json_text)
    return []


def _load_trace_partitions(cfg: RunConfig, trace_path: str):
    records = trace_mod.parse_trace_file(trace_path)
    parts = trace_mod.split(records, cfg.trace_split)
    if not parts:
        raise CliError("no partitions: trace is empty")
    return parts, _sha256_file(trace_path), len(records)


def _aggregate(metric_rows: list[tuple[float, ...]]) -> dict[str, float]:
    n = len(metric_rows)
    return {name: sum(row[i] for row in metric_rows) / n
            for i, name in enumerate(METRIC_NAMES)}


def _overrides(args) -> dict:
    return {
        "timesteps": getattr(args, "timesteps", None),
        "warmup": getattr(args, "warmup", None),
        "alpha": getattr(args, "alpha", None),
        "gamma": getattr(args, "gamma", None),
        "epsilon_old": getattr(args, "epsilon_old", None),
        "epsilon_new": getattr(args, "epsilon_new", None),
        "base_seed": getattr(args, "seed", None),
        "trace_split": getattr(args, "trace_split", None),
    }


def cmd_simulate(args) -> int:
    cfg = load_run_config(args.config, _overrides(args))
    parts, trace_sha, n_records = _load_trace_partitions(cfg, args.trace)
    requests = partitions_to_requests(parts)
    state = None
    rows = []
    steps_json = []
    metric_rows = []
    cumulative = 0.0
    for i, part in enumerate(requests, start=1):
        metrics, state = simulate_partition(part, cfg.baseline, cfg.system, state)
        rewards = reward_vector(cfg.learner.targets, metrics)
        r_total = total_reward(rewards)
        if i >= cfg.learner.warmup:
            cumulative += r_total
        obs = metrics.as_tuple()
        metric_rows.append(obs)
        rows.append([i, *obs, *rewards, r_total, cumulative])
        steps_json.append({
            "partition": i,
            "metrics": dict(zip(METRIC_NAMES, obs)),
            "rewards": dict(zip(METRIC_NAMES, rewards)),
            "reward_total": r_total,
            "reward_cumulative": cumulative,
        })
    obj = {
        "kind": "simulate",
        "trace_sha256": trace_sha,
        "trace_records": n_records,
        "trace_split": cfg.trace_split,
        "warmup": cfg.learner.warmup,
        "aggregate": _aggregate(metric_rows),
        "cumulative_reward": cumulative,
        "partitions": steps_json,
    }
    header = ["partition", *_METRIC_COLS, *_REWARD_COLS, "r_total", "r_cumulative"]
    written = _emit(args.out, args.format, header, rows, obj)
    for path in written:
        print(f"wrote {path}")
    return 0


def cmd_tune(args) -> int:
    cfg = load_run_config(args.config, _overrides(args))
    parts, trace_sha, n_records = _load_trace_partitions(cfg, args.trace)
    env = TuningEnvironment(partitions_to_requests(parts), cfg.system)
    want_explanations = args.explanations is not None
    result = run_episode(env, cfg.learner, record_explanations=want_explanations)

    rows = []
    steps_json = []
    post_warmup = []
    for s in result.steps:
        obs = s.metrics.as_tuple()
        rows.append([s.step, s.epsilon, *s.action, *obs, *s.rewards,
                     s.reward_total, s.reward_cumulative])
        steps_json.append({
            "step": s.step,
            "epsilon": s.epsilon,
            "action": list(s.action),
            "metrics": dict(zip(METRIC_NAMES, obs)),
            "rewards": dict(zip(METRIC_NAMES, s.rewards)),
            "reward_total": s.reward_total,
            "reward_cumulative": s.reward_cumulative,
        })
        if s.step >= cfg.learner.warmup:
            post_warmup.append(obs)

    final_action = result.final_greedy_action()
    final_config = config_from_action(final_action)
    labels = action_labels()
    obj = {
        "kind": "tune",
        "trace_sha256": trace_sha,
        "trace_records": n_records,
        "trace_split": cfg.trace_split,
        "timesteps": cfg.learner.timesteps,
        "warmup": cfg.learner.warmup,
        "seed": cfg.learner.base_seed,
        "aggregate": _aggregate(post_warmup),
        "cumulative_reward": result.cumulative_reward,
        "final_state": list(result.final_state),
        "final_greedy_action": list(final_action),
        "final_config": {name: labels[i][final_action[i]]
                         for i, (name, _) in enumerate(ACTION_SPACE)},
        "steps": steps_json,
    }
    header = ["step", "epsilon", *_ACTION_COLS, *_METRIC_COLS, *_REWARD_COLS,
              "r_total", "r_cumulative"]
    written = _emit(args.out, args.format, header, rows, obj)

    qtables_path = args.qtables or (f"{args.out}.qtables" if args.out else None)
    if qtables_path:
        save_qtables(qtables_path, result.qtables)
        written.append(qtables_path)

    if want_explanations:
        ex_header, ex_rows = _explanation_rows(
            [(step, agent, expl) for step, agent, expl in result.explanations])
        Path(args.explanations).write_text(_csv_text(ex_header, ex_rows),
                                           encoding="utf-8")
        written.append(args.explanations)

    for path in written:
        print(f"wrote {path}")
    print(f"cumulative_reward {result.cumulative_reward!r}")
    return 0


def _improvement(metric: str, base: float, tuned: float):
    """Percent improvement with the documented sign conventions; None when
    not defined for the metric, 'undefined' on a zero baseline."""
    if metric in _IMPROVE_BASE_MINUS_TUNED:
        if base == 0:
            return "undefined"
        return (base - tuned) / base * 100.0
    if metric in _IMPROVE_TUNED_MINUS_BASE:
        if base == 0:
            return "undefined"
        return (tuned - base) / base * 100.0
    return None


def _load_report(path: str) -> dict:
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise CliError(f"{path}: not a JSON report ({exc})") from None
    for key in ("aggregate", "cumulative_reward", "trace_sha256"):
        if key not in obj:
            raise CliError(f"{path}: report is missing {key!r}")
    return obj


def cmd_compare(args) -> int:
    base = _load_report(args.baseline)
    tuned = _load_report(args.tuned)
    if base["trace_sha256"] != tuned["trace_sha256"]:
        raise CliError("reports cover different traces")
    rows = []
    metrics_json = {}
    for name in METRIC_NAMES:
        b = float(base["aggregate"][name])
        t = float(tuned["aggregate"][name])
        imp = _improvement(name, b, t)
        rows.append([name, b, t, "" if imp is None else imp])
        metrics_json[name] = {"baseline": b, "tuned": t,
                              "improvement_pct": imp}
    rows.append(["cumulative_reward", base["cumulative_reward"],
                 tuned["cumulative_reward"], ""])
    obj = {
        "kind": "compare",
        "trace_sha256": base["trace_sha256"],
        "metrics": metrics_json,
        "baseline_cumulative_reward": base["cumulative_reward"],
        "tuned_cumulative_reward": tuned["cumulative_reward"],
    }
    header = ["metric", "baseline", "tuned", "improvement_pct"]
    written = _emit(args.out, args.format, header, rows, obj)
    for path in written:
        print(f"wrote {path}")
    if not written:
        return 0
    for name in ("energy", "bandwidth", "latency"):
        imp = metrics_json[name]["improvement_pct"]
        shown = f"{imp:.2f}%" if isinstance(imp, float) else str(imp)
        print(f"{name} improvement: {shown}")
    return 0


def _explanation_rows(records, generic: bool = False) -> tuple[list[str], list[list]]:
    labels = action_labels()
    names = [name for name, _ in ACTION_SPACE]
    header = (["step", "agent", "parameter", "state", "chosen", "chosen_label",
               "alternative", "alternative_label"]
              + [f"d_{m}" for m in METRIC_NAMES]
              + ["disadvantage", "necessity_v", "msx_plus", "msx_minus",
                 "rationale"])
    rows = []
    for step, agent, e in records:
        param = f"agent{agent}" if generic else names[agent]
        if generic:
            chosen_label, alt_label = str(e.chosen), str(e.alternative)
        else:
            chosen_label = labels[agent][e.chosen]
            alt_label = labels[agent][e.alternative]
        rows.append([step, agent, param, e.state, e.chosen, chosen_label,
                     e.alternative, alt_label, *e.delta.deltas,
                     e.disadvantage,
                     "" if e.necessity_v is None else e.necessity_v,
                     "" if e.msx_plus is None else ";".join(map(str, e.msx_plus)),
                     "" if e.msx_minus is None else ";".join(map(str, e.msx_minus)),
                     e.rationale])
    return header, rows


def cmd_explain(args) -> int:
    try:
        tables = load_qtables(args.qtables)
    except (OSError, ValueError) as exc:
        raise CliError(f"cannot load q-tables: {exc}") from None

    if args.state is not None:
        try:
            state = [int(x) for x in args.state.split(",")]
        except ValueError:
            raise CliError(f"--state must be comma-separated integers, got {args.state!r}") from None
    elif args.step is not None:
        if not args.log:
            raise CliError("--step requires --log pointing at a tune report (.json)")
        log = _load_report(args.log)
        steps = log.get("steps", [])
        if not 1 <= args.step <= len(steps):
            raise CliError(f"--step {args.step} out of range 1..{len(steps)}")
        state = list(steps[args.step - 1]["action"])
    else:
        raise CliError("explain needs --state or --step")

    if len(state) != len(tables):
        raise CliError(f"state has {len(state)} entries but the file holds {len(tables)} agents")
    matches_action_space = tuple(t.shape[0] for t in tables) == ACTION_ARITIES

    records = []
    ties = 0
    for i, table in enumerate(tables):
        arity = table.shape[0]
        if not 0 <= state[i] < arity:
            raise CliError(f"state[{i}]={state[i]} out of range for arity {arity}")
        greedy = int(np.argmax(table[state[i]].sum(axis=1)))
        alts = [a for a in range(arity) if a != greedy]
        lab = list(action_labels()[i]) if matches_action_space else None
        for e in explain_decision(table, state[i], greedy, alts,
                                  action_labels=lab):
            records.append((0, i, e))
            if e.is_tie:
                ties += 1

    header, rows = _explanation_rows(records, generic=not matches_action_space)
    # The step column is meaningless for a point-in-time dump.
    header = header[1:]
    rows = [r[1:] for r in rows]
    obj = {
        "kind": "explain",
        "state": state,
        "ties": ties,
        "explanations": [dict(zip(header, row)) for row in rows],
    }
    written = _emit(args.out, args.format, header, rows, obj)
    for path in written:
        print(f"wrote {path}")
    if ties and written:
        print(f"note: {ties} comparisons show no preference")
    return 0


def cmd_gen_trace(args) -> int:
    if args.kind == "stream":
        records = trace_mod.gen_stream(args.count, args.start, args.stride,
                                       args.gap)
    elif args.kind == "gemm":
        records = trace_mod.gen_gemm(args.n, args.block, args.gap)
    else:
        records = trace_mod.gen_irregular(args.count, args.space,
                                          args.seed if args.seed is not None else 0,
                                          args.gap)
    trace_mod.write_trace_file(args.out, records)
    print(f"wrote {args.out} ({len(records)} records)")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dramtuner",
        description="Trace-driven DRAM controller simulator with an explainable SARSA autotuner")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, trace=True):
        p.add_argument("--config", help="run configuration YAML")
        if trace:
            p.add_argument("--trace", required=True, help="trace file")
        p.add_argument("--out", help="output stem; writes <out>.csv and <out>.json")
        p.add_argument("--format", choices=("csv", "json"), default="csv",
                       help="stdout format when --out is omitted")
        p.add_argument("--seed", type=int, help="override the learner base seed")
        p.add_argument("--trace-split", type=int, dest="trace_split",
                       help="records per partition")

    def learner_flags(p):
        p.add_argument("--timesteps", type=int)
        p.add_argument("--warmup", type=int)
        p.add_argument("--alpha", type=float)
        p.add_argument("--gamma", type=float)
        p.add_argument("--epsilon-new", type=float, dest="epsilon_new")
        p.add_argument("--epsilon-old", type=float, dest="epsilon_old")

    p = sub.add_parser("simulate", help="run the baseline controller over a trace")
    common(p)
    learner_flags(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("tune", help="run the learner over a trace")
    common(p)
    learner_flags(p)
    p.add_argument("--qtables", help="q-table output path (default <out>.qtables)")
    p.add_argument("--explanations", help="write per-decision explanations (CSV)")
    p.set_defaults(func=cmd_tune)

    p = sub.add_parser("compare", help="compare a baseline and a tuned report")
    p.add_argument("--baseline", required=True, help="baseline report (.json)")
    p.add_argument("--tuned", required=True, help="tuned report (.json)")
    p.add_argument("--out")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("explain", help="explain greedy decisions from saved q-tables")
    p.add_argument("--qtables", required=True)
    p.add_argument("--state", help="comma-separated per-agent local state")
    p.add_argument("--step", type=int, help="use this step's action from --log as the state")
    p.add_argument("--log", help="tune report (.json) backing --step")
    p.add_argument("--out")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.set_defaults(func=cmd_explain)

    p = sub.add_parser("gen-trace", help="generate a synthetic trace")
    p.add_argument("kind", choices=trace_mod.GENERATORS)
    p.add_argument("--out", required=True)
    p.add_argument("--count", type=int, default=10000)
    p.add_argument("--start", type=lambda s: int(s, 0), default=0)
    p.add_argument("--stride", type=int, default=64)
    p.add_argument("--n", type=int, default=32)
    p.add_argument("--block", type=int, default=8)
    p.add_argument("--space", type=lambda s: int(s, 0), default=1 << 26)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--gap", type=int, default=4)
    p.set_defaults(func=cmd_gen_trace)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (CliError, ConfigError, trace_mod.TraceFormatError, ValueError,
            OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
