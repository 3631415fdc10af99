"""Command line interface: simulate, compare, bench, serve.

Scenario arguments accept either a file path or the name of a bundled
scenario (stable_box, unstable_box, limit_cycle_box, goal_loop_3d,
teach_blank). Exit code 0 on success, 2 on validation/usage failure.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import kernels
from .errors import SafemotionError
from .scenario import CONTROLLERS, compare_controllers, load_scenario, resolve_starts, run_scenario
from .server import bundled_scenario_path
from .traces import emit_trace


def _scenario_path(arg: str) -> Path:
    p = Path(arg)
    if p.is_file():
        return p
    bundled = bundled_scenario_path(arg)
    if bundled.is_file():
        return bundled
    raise SafemotionError(f"no scenario file or bundled scenario named {arg!r}")


def _cmd_simulate(args) -> int:
    scenario = load_scenario(_scenario_path(args.scenario), controller=args.controller)
    result = run_scenario(scenario, record_timing=not args.no_timing)
    if args.out:
        dims = (scenario.system.dim, scenario.system.input_dim, len(scenario.barriers))
        emit_trace(result.records, args.out, fmt=args.format, dims=dims)
    summary = result.metrics.to_dict()
    summary["backend"] = kernels.backend_name()
    summary["trace"] = args.out or None
    print(json.dumps(summary, indent=2, sort_keys=True))
    return 0


def _cmd_compare(args) -> int:
    scenario = load_scenario(_scenario_path(args.scenario))
    report = compare_controllers(scenario, controllers=args.controllers)
    doc = report.to_dict()
    text = json.dumps(doc, indent=2, sort_keys=True)
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
    print(text)
    return 0


def _percentiles(samples: np.ndarray) -> dict:
    return {
        "calls": int(samples.size),
        "mean_us": float(np.mean(samples) * 1e6),
        "median_us": float(np.median(samples) * 1e6),
        "p95_us": float(np.percentile(samples, 95) * 1e6),
        "max_us": float(np.max(samples) * 1e6),
    }


def _bench_backend(impl, name: str, scenario, states, iters: int) -> dict:
    from .safety import build_constraints

    problems = []
    for x in states:
        cm = build_constraints(scenario.barriers, scenario.system, x)
        problems.append((np.zeros(scenario.system.input_dim), cm.A, cm.b))
    times = []
    for i in range(iters):
        u_o, A, b = problems[i % len(problems)]
        t0 = time.perf_counter()
        impl.qp_filter(u_o, A, b, 1e-8, 1e-10)
        times.append(time.perf_counter() - t0)
    report = {"backend": name, "filter_call": _percentiles(np.array(times))}

    code, fp, goal, has_goal = kernels.pack_field(scenario.system)
    n_steps = 20000
    t0 = time.perf_counter()
    impl.rollout(code, fp, goal, has_goal, scenario.stop_radius,
                 scenario.barriers.normal_matrix, scenario.barriers.offsets,
                 scenario.barriers.gains, np.array(states[0]), scenario.integrator.dt,
                 n_steps)
    wall = time.perf_counter() - t0
    report["rollout_steps_per_s"] = float(n_steps / wall)
    return report


def _cmd_bench(args) -> int:
    scenario = load_scenario(_scenario_path(args.scenario))
    if scenario.controller != "zcbf":
        scenario = load_scenario(_scenario_path(args.scenario), controller="zcbf")
    starts = resolve_starts(scenario)
    # Sample states along one rollout so the latency mix includes active steps.
    result = run_scenario(scenario)
    records = result.start_results[0].records
    stride = max(1, len(records) // 32)
    states = [np.array(r.x) for r in records[::stride]][:32] or [np.array(starts[0])]

    backends = [(kernels.pure, "pure")]
    try:
        from .kernels import _speedups
        backends.insert(0, (_speedups, "compiled"))
    except ImportError:
        pass
    reports = [_bench_backend(impl, name, scenario, states, args.iters)
               for impl, name in backends]
    doc = {
        "scenario": scenario.name,
        "constraints": len(scenario.barriers),
        "selected_backend": kernels.backend_name(),
        "backends": reports,
    }
    if len(reports) == 2:
        doc["speedup_filter_call"] = (
            reports[1]["filter_call"]["mean_us"] / reports[0]["filter_call"]["mean_us"]
        )
        doc["speedup_rollout"] = (
            reports[0]["rollout_steps_per_s"] / reports[1]["rollout_steps_per_s"]
        )
    print(json.dumps(doc, indent=2, sort_keys=True))
    return 0


def _cmd_serve(args) -> int:
    from .server import serve

    serve(scenario_path=str(_scenario_path(args.scenario)) if args.scenario else None,
          host=args.host, port=args.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="safemotion",
        description="Safe motion generation: filtered dynamical systems inside "
                    "learned linear barrier sets.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="run a scenario and emit a trace")
    p_sim.add_argument("--scenario", required=True)
    p_sim.add_argument("--controller", choices=CONTROLLERS, default=None)
    p_sim.add_argument("--out", default=None)
    p_sim.add_argument("--format", choices=("csv", "jsonl"), default="csv")
    p_sim.add_argument("--no-timing", action="store_true",
                       help="zero the solve_time column for reproducible traces")
    p_sim.set_defaults(func=_cmd_simulate)

    p_cmp = sub.add_parser("compare", help="run a scenario under several controllers")
    p_cmp.add_argument("--scenario", required=True)
    p_cmp.add_argument("--controllers", nargs="+", choices=CONTROLLERS,
                       default=list(CONTROLLERS))
    p_cmp.add_argument("--out", default=None)
    p_cmp.set_defaults(func=_cmd_compare)

    p_bench = sub.add_parser("bench", help="filter latency and rollout throughput per backend")
    p_bench.add_argument("--scenario", required=True)
    p_bench.add_argument("--iters", type=int, default=2000)
    p_bench.set_defaults(func=_cmd_bench)

    p_serve = sub.add_parser("serve", help="run the teaching gateway")
    p_serve.add_argument("--scenario", default=None)
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=8000)
    p_serve.set_defaults(func=_cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except SafemotionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
