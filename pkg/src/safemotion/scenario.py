"""Scenario-driven simulation: load a scenario document, roll out filtered
trajectories under one of three controllers, and summarize the run.

A scenario bundles a dynamical system, a barrier set, start states (explicit
or sampled), an ordered goal list (looped: capturing one goal switches to the
next), an integrator config, and a controller choice:

* zcbf: the analytic minimally invasive filter (the main subject);
* rcbf: the reciprocal log-barrier baseline (interior only);
* co:   one-step numeric position projection (aggressive baseline).

Builtin fields under zcbf with Euler integration run on the fused kernel;
everything else goes through the generic python step loop.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import yaml

from . import kernels, safety
from .barriers import AdmissibleSet, LinearBarrier, feasibility_probe, membership
from .errors import (
    BlowUpError,
    InfeasibleFilterError,
    ScenarioError,
    UndefinedBarrierError,
)
from .systems import (
    DynamicalSystem,
    IntegratorConfig,
    load_seds_params,
    make_builtin_system,
    seds_params_from_dict,
    step,
    validate_system,
)
from .traces import TraceRecord, make_record

CONTROLLERS = ("zcbf", "rcbf", "co")

DEFAULT_MAX_STEPS = 5000
DEFAULT_STOP_RADIUS = 1e-3

# Margin used when sampling interior starts, and the band for exterior ones.
INTERIOR_MARGIN = 0.05
EXTERIOR_H_RANGE = (-0.3, -0.05)


@dataclass(frozen=True)
class StartSpec:
    """Explicit start points, or a sampler (interior / exterior band)."""

    kind: str = "list"  # list | sample_interior | sample_exterior
    points: tuple = ()
    count: int = 0
    h_range: tuple[float, float] = EXTERIOR_H_RANGE
    margin: float = INTERIOR_MARGIN


@dataclass(frozen=True)
class Scenario:
    name: str
    system: DynamicalSystem
    barriers: AdmissibleSet
    starts: StartSpec
    goals: tuple = ()
    controller: str = "zcbf"
    integrator: IntegratorConfig = field(default_factory=IntegratorConfig)
    seed: int = 0
    max_steps: int = DEFAULT_MAX_STEPS
    stop_radius: float = DEFAULT_STOP_RADIUS


@dataclass(frozen=True)
class StartResult:
    start: tuple[float, ...]
    records: tuple[TraceRecord, ...]
    captures: int
    stop_reason: str  # steps | captured | infeasible | blowup | undefined_barrier
    failure: str = ""
    max_step_disp: float = 0.0


@dataclass(frozen=True)
class SummaryMetrics:
    controller: str
    n_starts: int
    min_h: float
    captures_per_start: tuple[int, ...]
    n_captures: int
    max_u_norm: float
    mean_solve_time: float
    max_solve_time: float
    total_steps: int
    wall_time: float
    max_step_disp: float
    failures: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "controller": self.controller,
            "n_starts": self.n_starts,
            "min_h": self.min_h,
            "captures_per_start": list(self.captures_per_start),
            "n_captures": self.n_captures,
            "max_u_norm": self.max_u_norm,
            "mean_solve_time": self.mean_solve_time,
            "max_solve_time": self.max_solve_time,
            "total_steps": self.total_steps,
            "wall_time": self.wall_time,
            "max_step_disp": self.max_step_disp,
            "failures": list(self.failures),
        }


@dataclass(frozen=True)
class ScenarioResult:
    scenario: Scenario
    start_results: tuple[StartResult, ...]
    metrics: SummaryMetrics

    @property
    def records(self) -> list[TraceRecord]:
        out: list[TraceRecord] = []
        for sr in self.start_results:
            out.extend(sr.records)
        return out


def _parse_barriers(doc_list) -> AdmissibleSet:
    barriers = []
    for i, raw in enumerate(doc_list):
        barriers.append(LinearBarrier(
            normal=np.array(raw["normal"], dtype=float),
            offset=float(raw["offset"]),
            gain=float(raw.get("gain", 10.0)),
            id=str(raw.get("id", f"b{i + 1}")),
        ))
    return AdmissibleSet(tuple(barriers))


def _parse_system(doc: dict, goals, base_dir: Path) -> DynamicalSystem:
    kind = doc["kind"]
    dim = int(doc.get("dim", 2))
    params = dict(doc.get("params", {}))
    if "params_file" in doc:
        params["mixture"] = load_seds_params(base_dir / doc["params_file"])
    elif "mixture" in params and isinstance(params["mixture"], dict):
        params["mixture"] = seds_params_from_dict(params["mixture"])
    goal = np.array(goals[0], dtype=float) if goals else None
    return make_builtin_system(kind, dim=dim, goal=goal, params=params)


def load_scenario(path, controller: str | None = None) -> Scenario:
    """Read a scenario YAML document and validate it.

    `controller` overrides the document's choice (the CLI flag). Validation:
    known controller, consistent dimensions, a feasible barrier set, every
    goal strictly inside it, a sane system, and for rcbf no exterior starts.
    """
    path = Path(path)
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = yaml.safe_load(fh)
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ScenarioError(f"malformed scenario document: {exc}") from exc
    try:
        goals = tuple(tuple(float(v) for v in g) for g in doc.get("goals", []))
        system = _parse_system(doc["system"], goals, path.parent)
        barriers = _parse_barriers(doc.get("barriers", []))
        raw_starts = doc.get("starts", {})
        if isinstance(raw_starts, list):
            starts = StartSpec(kind="list",
                               points=tuple(tuple(float(v) for v in p) for p in raw_starts))
        else:
            starts = StartSpec(
                kind=raw_starts.get("kind", "list"),
                points=tuple(tuple(float(v) for v in p) for p in raw_starts.get("points", [])),
                count=int(raw_starts.get("count", 0)),
                h_range=tuple(raw_starts.get("h_range", EXTERIOR_H_RANGE)),
                margin=float(raw_starts.get("margin", INTERIOR_MARGIN)),
            )
        integ = doc.get("integrator", {})
        scenario = Scenario(
            name=str(doc.get("name", path.stem)),
            system=system,
            barriers=barriers,
            starts=starts,
            goals=goals,
            controller=str(controller or doc.get("controller", "zcbf")),
            integrator=IntegratorConfig(
                dt=float(integ.get("dt", 0.002)),
                method=str(integ.get("method", "euler")),
            ),
            seed=int(doc.get("seed", 0)),
            max_steps=int(doc.get("max_steps", DEFAULT_MAX_STEPS)),
            stop_radius=float(doc.get("stop_radius", DEFAULT_STOP_RADIUS)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ScenarioError(f"invalid scenario {path.name}: {exc}") from exc
    validate_scenario(scenario)
    return scenario


def validate_scenario(s: Scenario, check_starts: bool = True) -> None:
    if s.controller not in CONTROLLERS:
        raise ScenarioError(f"unknown controller {s.controller!r}; known: {CONTROLLERS}")
    if s.max_steps <= 0 or s.stop_radius <= 0:
        raise ScenarioError("max_steps and stop_radius must be positive")
    try:
        validate_system(s.system, seed=s.seed)
    except Exception as exc:
        raise ScenarioError(f"system validation failed: {exc}") from exc
    n = s.system.dim
    if len(s.barriers) and s.barriers.dim != n:
        raise ScenarioError(f"barrier dimension {s.barriers.dim} != system dimension {n}")
    if len(s.barriers) and feasibility_probe(s.barriers) is None:
        raise ScenarioError("barrier set has no strict interior")
    for g in s.goals:
        if len(g) != n:
            raise ScenarioError(f"goal dimension {len(g)} != {n}")
        if len(s.barriers):
            h = s.barriers.evaluate_all(np.array(g))
            if float(h.min()) <= 1e-6:
                raise ScenarioError(f"goal {g} is not strictly inside the barrier set")
    if s.starts.kind not in ("list", "sample_interior", "sample_exterior"):
        raise ScenarioError(f"unknown start spec kind {s.starts.kind!r}")
    if s.starts.kind == "list" and not s.starts.points:
        raise ScenarioError("start spec lists no points")
    if s.starts.kind != "list" and s.starts.count <= 0:
        raise ScenarioError("sampled start spec needs a positive count")
    if check_starts and s.controller == "rcbf" and len(s.barriers):
        for p in resolve_starts(s):
            if not membership(s.barriers, np.array(p)):
                raise ScenarioError(
                    "rcbf runs are undefined outside the barrier set; "
                    f"start {tuple(p)} is exterior"
                )
    if s.starts.kind == "sample_exterior" and s.controller == "rcbf":
        raise ScenarioError("rcbf cannot use exterior start sampling")


def _sampling_box(aset: AdmissibleSet, pad: float) -> float:
    half = max(1.0, float(np.max(np.abs(aset.offsets)))) if len(aset) else 1.0
    return half + pad


def resolve_starts(s: Scenario) -> list[np.ndarray]:
    """Materialize the start list; samplers are deterministic in the seed."""
    if s.starts.kind == "list":
        return [np.array(p, dtype=float) for p in s.starts.points]
    if not len(s.barriers):
        raise ScenarioError("sampled starts need a barrier set")
    rng = np.random.default_rng(s.seed)
    half = _sampling_box(s.barriers, pad=0.5)
    out: list[np.ndarray] = []
    lo, hi = s.starts.h_range
    for _ in range(200 * s.starts.count):
        x = rng.uniform(-half, half, size=s.system.dim)
        hmin = float(s.barriers.evaluate_all(x).min())
        if s.starts.kind == "sample_interior":
            ok = hmin >= s.starts.margin
        else:
            ok = lo <= hmin <= hi
        if ok:
            out.append(x)
            if len(out) == s.starts.count:
                return out
    raise ScenarioError(
        f"could not sample {s.starts.count} {s.starts.kind} starts in "
        f"{200 * s.starts.count} draws"
    )


def _fused_eligible(s: Scenario) -> bool:
    return (
        s.controller == "zcbf"
        and s.integrator.method == "euler"
        and s.system.G is None
        and s.system.kind in ("unstable_linear", "limit_cycle", "linear_goal", "seds_like")
    )


def _run_start_fused(s: Scenario, x0: np.ndarray) -> StartResult:
    N = s.barriers.normal_matrix
    offs = s.barriers.offsets
    gains = s.barriers.gains
    dt = s.integrator.dt
    goals = [np.array(g, dtype=float) for g in s.goals]
    goal_index = 0
    system = s.system
    records: list[TraceRecord] = []
    captures = 0
    step_base = 0
    x = np.asarray(x0, dtype=float)
    stop_reason = "steps"
    max_disp = 0.0
    zeros_m = np.zeros(s.system.dim)

    while step_base < s.max_steps:
        if goals:
            system = system.with_goal(goals[goal_index])
        code, fp, goal_vec, has_goal = kernels.pack_field(system)
        budget = s.max_steps - step_base
        xs, us, act, st, tsol, done, stop = kernels.rollout(
            code, fp, goal_vec, has_goal and bool(goals), s.stop_radius,
            N, offs, gains, x, dt, budget,
        )
        H = xs @ N.T + offs if len(s.barriers) else np.zeros((done + 1, 0))
        for k in range(done):
            records.append(make_record(
                step_base + k, (step_base + k) * dt, xs[k], zeros_m, us[k],
                H[k], act[k] if len(s.barriers) else (), "execute", tsol[k],
            ))
        if done:
            disp = float(np.max(np.linalg.norm(np.diff(xs[:done + 1], axis=0), axis=1)))
            max_disp = max(max_disp, disp)
        x = xs[done].copy()
        step_base += done
        if stop == kernels.STOP_CAPTURED:
            captures += 1
            goal_index = (goal_index + 1) % len(goals)
            if len(goals) == 1:
                stop_reason = "captured"
                break
            continue
        if stop == kernels.STOP_INFEASIBLE:
            stop_reason = "infeasible"
            break
        if stop == kernels.STOP_BLOWUP:
            stop_reason = "blowup"
            break
        if done == 0:
            break
    failure = stop_reason if stop_reason in ("infeasible", "blowup") else ""
    return StartResult(tuple(float(v) for v in x0), tuple(records), captures,
                       stop_reason, failure, max_disp)


def _controller_step(s: Scenario, system: DynamicalSystem, x: np.ndarray):
    """One (u, active, h, solve_time) under the scenario's controller."""
    if s.controller == "zcbf":
        if len(s.barriers):
            res = safety.filter(s.barriers, system, x)
            return res.u_star, res.active_mask.astype(np.uint8), res.h, res.solve_time
        return np.zeros(system.input_dim), np.zeros(0, np.uint8), np.zeros(0), 0.0
    if s.controller == "rcbf":
        if len(s.barriers):
            res = safety.rcbf_filter(s.barriers, system, x)
            return res.u_star, res.active_mask.astype(np.uint8), res.h, res.solve_time
        return np.zeros(system.input_dim), np.zeros(0, np.uint8), np.zeros(0), 0.0
    # co: one-step numeric projection
    h = s.barriers.evaluate_all(x) if len(s.barriers) else np.zeros(0)
    t0 = time.perf_counter()
    if len(s.barriers):
        u = safety.co_baseline_step(s.barriers, system, x, s.integrator.dt)
    else:
        u = np.zeros(system.input_dim)
    dt_solve = time.perf_counter() - t0
    return u, np.zeros(len(s.barriers), np.uint8), h, dt_solve


def _run_start_python(s: Scenario, x0: np.ndarray) -> StartResult:
    goals = [np.array(g, dtype=float) for g in s.goals]
    goal_index = 0
    system = s.system.with_goal(goals[0]) if goals else s.system
    records: list[TraceRecord] = []
    captures = 0
    x = np.asarray(x0, dtype=float).copy()
    stop_reason = "steps"
    failure = ""
    max_disp = 0.0
    dt = s.integrator.dt
    zeros_m = np.zeros(system.input_dim)

    for k in range(s.max_steps):
        try:
            u, act, h, tsol = _controller_step(s, system, x)
        except UndefinedBarrierError as exc:
            stop_reason = "undefined_barrier"
            failure = str(exc)
            break
        except InfeasibleFilterError as exc:
            stop_reason = "infeasible"
            failure = str(exc)
            break
        records.append(make_record(k, k * dt, x, zeros_m, u, h, act, "execute", tsol))
        try:
            x_next = step(system, x, u, s.integrator)
        except BlowUpError as exc:
            stop_reason = "blowup"
            failure = str(exc)
            break
        max_disp = max(max_disp, float(np.linalg.norm(x_next - x)))
        x = x_next
        if goals and float(np.linalg.norm(x - goals[goal_index])) < s.stop_radius:
            captures += 1
            goal_index = (goal_index + 1) % len(goals)
            if len(goals) == 1:
                stop_reason = "captured"
                break
            system = system.with_goal(goals[goal_index])
    return StartResult(tuple(float(v) for v in x0), tuple(records), captures,
                       stop_reason, failure, max_disp)


def run_scenario(s: Scenario, strict: bool = True,
                 record_timing: bool = True) -> ScenarioResult:
    """Roll out every start and summarize.

    strict: re-raise per-start failures (infeasibility, blow-up, undefined
    barriers) as ScenarioError; with strict=False they are recorded in the
    metrics instead, which is what compare_controllers uses to demonstrate
    baseline failure modes.

    record_timing: keep per-step solver wall times in the trace records.
    Pass False to zero the solve_time column; everything else in a trace is
    a pure function of the scenario, so two runs then produce bit-identical
    files.
    """
    starts = resolve_starts(s)
    wall0 = time.perf_counter()
    results: list[StartResult] = []
    fused = _fused_eligible(s)
    for x0 in starts:
        sr = _run_start_fused(s, x0) if fused else _run_start_python(s, x0)
        if not record_timing:
            sr = replace(sr, records=tuple(
                replace(r, solve_time=0.0) for r in sr.records))
        if strict and sr.stop_reason in ("infeasible", "blowup", "undefined_barrier"):
            raise ScenarioError(
                f"start {sr.start}: rollout failed ({sr.stop_reason}) {sr.failure}"
            )
        results.append(sr)
    wall = time.perf_counter() - wall0

    all_solve = [r.solve_time for sr in results for r in sr.records]
    all_h = [min(r.h) for sr in results for r in sr.records if r.h]
    all_u = [float(np.linalg.norm(r.u_star)) for sr in results for r in sr.records]
    metrics = SummaryMetrics(
        controller=s.controller,
        n_starts=len(starts),
        min_h=float(min(all_h)) if all_h else float("inf"),
        captures_per_start=tuple(sr.captures for sr in results),
        n_captures=sum(sr.captures for sr in results),
        max_u_norm=float(max(all_u)) if all_u else 0.0,
        mean_solve_time=float(np.mean(all_solve)) if all_solve else 0.0,
        max_solve_time=float(max(all_solve)) if all_solve else 0.0,
        total_steps=sum(len(sr.records) for sr in results),
        wall_time=wall,
        max_step_disp=max((sr.max_step_disp for sr in results), default=0.0),
        failures=tuple(f"{sr.start}: {sr.stop_reason} {sr.failure}".strip()
                       for sr in results if sr.failure or
                       sr.stop_reason == "undefined_barrier"),
    )
    return ScenarioResult(s, tuple(results), metrics)


@dataclass(frozen=True)
class ComparisonReport:
    scenario_name: str
    metrics: dict  # controller -> SummaryMetrics

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario_name,
            "controllers": {k: v.to_dict() for k, v in self.metrics.items()},
        }


def compare_controllers(s: Scenario, controllers=CONTROLLERS) -> ComparisonReport:
    """Run the same scenario under several controllers side by side.

    Failures are recorded, not raised: an exterior start under rcbf is
    expected to fail with an undefined barrier, and that failure is part of
    the report. Starts are resolved once so every controller sees the same
    points.
    """
    starts = tuple(tuple(float(v) for v in p) for p in resolve_starts(s))
    base = replace(s, starts=StartSpec(kind="list", points=starts))
    metrics: dict = {}
    for ctrl in controllers:
        variant = replace(base, controller=ctrl)
        validate_scenario(variant, check_starts=False)
        metrics[ctrl] = run_scenario(variant, strict=False).metrics
    return ComparisonReport(s.name, metrics)
