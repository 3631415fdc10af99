"""Teaching-session state machine.

Runs the live loop around the filtered dynamical system: in execute mode the
state advances by filtered integration steps at the tick rate; while the
client holds the virtual end-effector (teach mode) the commanded position is
taken as ground truth, decimated to the training rate, and streamed into the
barrier learner. Mode changes, barrier changes, and per-tick state are
reported as wire messages.

This module is pure: handle_message and tick map (state, input) to
(state, messages) and never touch sockets or clocks. The server wraps them.

Wire protocol (newline-delimited JSON objects, all carrying v, kind, t,
payload):

  client -> server: grab{}, release{}, move{x}, set_goal{goal}, reset{},
                    config{delta?, gamma?, dt?}
  server -> client: state{t, x, u, h_values, active_ids, mode, goal_index,
                    captures}, barrier_added{barrier}, barrier_removed{id},
                    barrier_refined{barrier}, event{name, ...}, error{message}

Timestamps are session seconds assigned by the server; a recorded message log
replayed through handle_message reproduces the barrier set exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import learning, safety
from .barriers import AdmissibleSet, LinearBarrier
from .errors import (
    DegenerateFitError,
    InfeasibleFilterError,
    ProtocolError,
)
from .learning import LearnerConfig, TrainingBuffer
from .scenario import Scenario
from .systems import DynamicalSystem, step

PROTOCOL_VERSION = 1
TICK_HZ = 100.0
CLIENT_KINDS = ("grab", "release", "move", "set_goal", "reset", "config")

_DECIMATION_EPS = 1e-9


@dataclass(frozen=True)
class SessionState:
    t: float
    mode: str  # execute | teach
    x: tuple[float, ...]
    system: DynamicalSystem
    aset: AdmissibleSet
    buf: TrainingBuffer
    stats: dict
    learner_cfg: LearnerConfig
    goals: tuple[tuple[float, ...], ...]
    goal_index: int
    captures: int
    stop_radius: float
    dt: float
    last_teach_sample_t: float
    fault: str = ""
    # Snapshot for reset.
    initial_x: tuple[float, ...] = ()
    initial_aset: AdmissibleSet = field(default_factory=AdmissibleSet)


def make_message(kind: str, t: float, payload: dict) -> dict:
    return {"v": PROTOCOL_VERSION, "kind": kind, "t": float(t), "payload": payload}


def _barrier_payload(b: LinearBarrier) -> dict:
    return {
        "id": b.id,
        "normal": [float(v) for v in b.normal],
        "offset": float(b.offset),
        "gain": float(b.gain),
    }


def new_session(scenario: Scenario, start=None, delta: float = learning.DEFAULT_DELTA,
                decimation_hz: float = learning.DEFAULT_DECIMATION_HZ,
                tick_hz: float = TICK_HZ) -> SessionState:
    """Fresh session over a scenario: its system, barriers, and goals."""
    if start is None:
        from .scenario import resolve_starts
        start = resolve_starts(scenario)[0]
    x = tuple(float(v) for v in np.asarray(start, dtype=float))
    goals = tuple(tuple(float(v) for v in g) for g in scenario.goals)
    goal = np.array(goals[0]) if goals else np.zeros(scenario.system.dim)
    system = scenario.system.with_goal(goal) if goals else scenario.system
    cfg = LearnerConfig(goal=goal, delta=delta, decimation_hz=decimation_hz)
    return SessionState(
        t=0.0,
        mode="execute",
        x=x,
        system=system,
        aset=scenario.barriers,
        buf=TrainingBuffer(capacity=scenario.system.dim),
        stats={},
        learner_cfg=cfg,
        goals=goals,
        goal_index=0,
        captures=0,
        stop_radius=scenario.stop_radius,
        dt=1.0 / tick_hz,
        last_teach_sample_t=-np.inf,
        initial_x=x,
        initial_aset=scenario.barriers,
    )


def _state_message(st: SessionState, u=None) -> dict:
    x = np.array(st.x)
    h = st.aset.evaluate_all(x) if len(st.aset) else np.zeros(0)
    payload = {
        "x": [float(v) for v in st.x],
        "u": [float(v) for v in (u if u is not None else np.zeros(len(st.x)))],
        "h_values": [float(v) for v in h],
        "active_ids": [],
        "mode": st.mode,
        "goal_index": st.goal_index,
        "goal": list(st.goals[st.goal_index]) if st.goals else None,
        "captures": st.captures,
        "fault": st.fault,
    }
    return payload


def _events_to_messages(events, t: float) -> list[dict]:
    out = []
    for ev in events:
        if ev.kind == "barrier_added":
            out.append(make_message("barrier_added", t, {"barrier": _barrier_payload(ev.barrier)}))
        elif ev.kind == "barrier_removed":
            out.append(make_message("barrier_removed", t, {"id": ev.barrier_id}))
        elif ev.kind == "barrier_refined":
            out.append(make_message("barrier_refined", t, {"barrier": _barrier_payload(ev.barrier)}))
        elif ev.kind == "point_on_barrier":
            payload = {"name": "point_on_barrier", "id": ev.barrier_id}
            if ev.ambiguous_ids:
                payload["ambiguous_ids"] = list(ev.ambiguous_ids)
            out.append(make_message("event", t, payload))
        elif ev.kind == "point_buffered":
            out.append(make_message("event", t, {"name": "point_buffered"}))
    return out


def parse_client_message(msg: dict) -> tuple[str, float, dict]:
    """Validate shape and version; raises ProtocolError on malformed input."""
    if not isinstance(msg, dict):
        raise ProtocolError("message must be an object")
    if msg.get("v") != PROTOCOL_VERSION:
        raise ProtocolError(f"unsupported protocol version {msg.get('v')!r}")
    kind = msg.get("kind")
    if kind not in CLIENT_KINDS:
        raise ProtocolError(f"unknown client message kind {kind!r}")
    t = msg.get("t")
    if not isinstance(t, (int, float)) or not np.isfinite(t):
        raise ProtocolError("message t must be a finite number")
    payload = msg.get("payload", {})
    if not isinstance(payload, dict):
        raise ProtocolError("payload must be an object")
    return kind, float(t), payload


def _vector_from(payload: dict, key: str, dim: int) -> np.ndarray:
    raw = payload.get(key)
    if (not isinstance(raw, (list, tuple)) or len(raw) != dim
            or not all(isinstance(v, (int, float)) for v in raw)):
        raise ProtocolError(f"{key} must be a list of {dim} numbers")
    vec = np.asarray(raw, dtype=float)
    if not np.all(np.isfinite(vec)):
        raise ProtocolError(f"{key} must be finite")
    return vec


def handle_message(st: SessionState, msg: dict) -> tuple[SessionState, list[dict]]:
    """Apply one client message; returns the new state and server replies.

    Malformed messages produce an error reply and leave the session
    unchanged. Teach points are decimated here: a move is ingested only when
    at least one decimation period has passed since the previous sample.
    """
    try:
        kind, t, payload = parse_client_message(msg)
    except ProtocolError as exc:
        return st, [make_message("error", st.t, {"message": str(exc)})]

    dim = len(st.x)
    if kind == "grab":
        if st.mode == "teach":
            return st, [make_message("event", t, {"name": "already_teaching"})]
        st = replace(st, mode="teach")
        return st, [make_message("event", t, {"name": "mode_changed", "mode": "teach"})]

    if kind == "release":
        if st.mode == "execute":
            return st, [make_message("event", t, {"name": "already_executing"})]
        st = replace(st, mode="execute")
        return st, [make_message("event", t, {"name": "mode_changed", "mode": "execute"})]

    if kind == "move":
        try:
            x_cmd = _vector_from(payload, "x", dim)
        except ProtocolError as exc:
            return st, [make_message("error", st.t, {"message": str(exc)})]
        if st.mode != "teach":
            return st, [make_message("event", t, {"name": "move_ignored",
                                                  "reason": "not in teach mode"})]
        st = replace(st, x=tuple(float(v) for v in x_cmd))
        out: list[dict] = []
        if t - st.last_teach_sample_t >= 1.0 / st.learner_cfg.decimation_hz - _DECIMATION_EPS:
            try:
                aset, buf, events, stats = learning.ingest(
                    x_cmd, t, st.learner_cfg, st.aset, st.buf, st.stats
                )
            except DegenerateFitError as exc:
                # Unusable cluster (collinear or goal-coincident): drop it and
                # keep the session alive.
                st = replace(st, buf=replace(st.buf, points=()), last_teach_sample_t=t)
                return st, [make_message("error", t, {"message": f"fit discarded: {exc}"})]
            st = replace(st, aset=aset, buf=buf, stats=stats, last_teach_sample_t=t)
            out.extend(_events_to_messages(events, t))
        return st, out

    if kind == "set_goal":
        try:
            goal = _vector_from(payload, "goal", dim)
        except ProtocolError as exc:
            return st, [make_message("error", st.t, {"message": str(exc)})]
        if len(st.aset):
            h = st.aset.evaluate_all(goal)
            if float(h.min()) <= 1e-6:
                return st, [make_message("error", t, {
                    "message": "goal must be strictly inside the barrier set"})]
        if st.system.goal is None:
            return st, [make_message("error", t, {
                "message": f"system {st.system.kind} has no goal to set"})]
        st = replace(
            st,
            goals=(tuple(float(v) for v in goal),),
            goal_index=0,
            system=st.system.with_goal(goal),
            learner_cfg=replace(st.learner_cfg, goal=goal),
        )
        return st, [make_message("event", t, {"name": "goal_changed",
                                              "goal": [float(v) for v in goal]})]

    if kind == "reset":
        st = replace(
            st,
            mode="execute",
            x=st.initial_x,
            aset=st.initial_aset,
            buf=replace(st.buf, points=()),
            stats={},
            goal_index=0,
            captures=0,
            fault="",
        )
        return st, [make_message("event", t, {"name": "reset"}),
                    make_message("state", t, _state_message(st))]

    if kind == "config":
        updates = {}
        cfg = st.learner_cfg
        try:
            if "delta" in payload:
                cfg = replace(cfg, delta=float(payload["delta"]))
                updates["delta"] = cfg.delta
            if "gamma" in payload:
                cfg = replace(cfg, gain=float(payload["gamma"]))
                updates["gamma"] = cfg.gain
            dt = st.dt
            if "dt" in payload:
                dt = float(payload["dt"])
                if not 0.0 < dt <= 0.1:
                    raise ValueError("dt must be in (0, 0.1]")
                updates["dt"] = dt
        except (TypeError, ValueError) as exc:
            return st, [make_message("error", st.t, {"message": f"bad config: {exc}"})]
        st = replace(st, learner_cfg=cfg, dt=dt)
        return st, [make_message("event", t, {"name": "config_changed", **updates})]

    return st, [make_message("error", st.t, {"message": f"unhandled kind {kind!r}"})]


def tick(st: SessionState, dt: float | None = None) -> tuple[SessionState, dict]:
    """Advance session time by one tick and broadcast the state.

    In execute mode this performs one filtered integration step, advancing
    the goal cyclically on capture; in teach mode the position is a client
    passthrough and only time moves. An infeasible filter freezes motion and
    reports a fault instead of raising.
    """
    dt = st.dt if dt is None else float(dt)
    t_next = st.t + dt
    if st.mode != "execute" or st.fault:
        st = replace(st, t=t_next)
        return st, make_message("state", t_next, _state_message(st))

    x = np.array(st.x)
    u = np.zeros(st.system.input_dim)
    active_ids: tuple[str, ...] = ()
    if len(st.aset):
        try:
            res = safety.filter(st.aset, st.system, x)
        except InfeasibleFilterError as exc:
            st = replace(st, t=t_next, fault=str(exc))
            msg = make_message("error", t_next, {"message": str(exc), "fault": True})
            return st, msg
        u = res.u_star
        active_ids = res.active_ids
    x_next = step(st.system, x, u, dt=dt, method="euler")
    st = replace(st, t=t_next, x=tuple(float(v) for v in x_next))

    if st.goals:
        goal = np.array(st.goals[st.goal_index])
        if float(np.linalg.norm(x_next - goal)) < st.stop_radius:
            next_index = (st.goal_index + 1) % len(st.goals)
            st = replace(
                st,
                captures=st.captures + 1,
                goal_index=next_index,
                system=st.system.with_goal(np.array(st.goals[next_index])),
            )

    payload = _state_message(st, u)
    payload["active_ids"] = list(active_ids)
    return st, make_message("state", t_next, payload)
